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

#include <span>
#include <string>
#include <vector>

namespace dpspeech {

// Class-balanced evaluation and collapse diagnostics. Overall accuracy is
// reported for context only; collapse detection keys on maj_pred (fraction
// of predictions given to the most predicted class) and balanced accuracy.
struct EvalReport {
  int classes = 0;
  std::size_t count = 0;
  double macro_f1 = 0.0;
  double bal_acc = 0.0;
  double maj_pred = 0.0;
  double overall_acc = 0.0;
  std::vector<double> precision;  // per class, 0/0 -> 0
  std::vector<double> recall;
  std::vector<double> f1;
  std::vector<std::vector<std::size_t>> confusion;  // [label][pred]
  bool collapse_flag = false;

  // One-line CSV row (no trailing newline) and the matching header.
  static std::string csv_header(const std::string& prefix);
  std::string csv_row() const;
  std::string pretty() const;
};

// preds/labels must be equal-length, nonempty, entries in [0, classes).
// collapse_flag = maj_pred >= 0.95 and bal_acc <= 1/K + 0.05.
EvalReport evaluate(std::span<const int> preds, std::span<const int> labels, int classes);

// Index of the maximum entry; ties broken toward the lowest index.
int argmax_pred(std::span<const double> probs);

// Collapse-flag thresholds, exposed for the evaluation report writers.
inline constexpr double kCollapseMajPred = 0.95;
inline constexpr double kCollapseBalAccMargin = 0.05;

}  // namespace dpspeech
