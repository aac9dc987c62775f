// Copyright 2026 The dpspeech Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <stdexcept>
#include <string>

namespace dpspeech {

// All project errors carry a short machine-parsable category so the CLI can
// emit `error: <category>: <detail>` on a single line.
class Error : public std::runtime_error {
 public:
  Error(std::string category, const std::string& message)
      : std::runtime_error(message), category_(std::move(category)) {}

  const std::string& category() const noexcept { return category_; }

 private:
  std::string category_;
};

struct WavFormatError : Error {
  explicit WavFormatError(const std::string& m) : Error("wav_format", m) {}
};
struct WavEncodingError : Error {
  explicit WavEncodingError(const std::string& m) : Error("wav_encoding", m) {}
};
struct WavTruncatedError : Error {
  explicit WavTruncatedError(const std::string& m) : Error("wav_truncated", m) {}
};

}  // namespace dpspeech
