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

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "dpspeech/features.hpp"
#include "dpspeech/rng.hpp"

namespace dpspeech {

struct Example {
  std::string id;
  std::string recording_id;
  Spectrogram features;  // raw (pre-normalization) matrix
  std::optional<std::vector<double>> privileged;
  int label = 0;
};

struct Dataset {
  std::vector<Example> examples;
  int classes = 0;
  std::vector<std::size_t> class_counts;

  std::size_t size() const { return examples.size(); }
  bool multimodal() const;
  int privileged_dim() const;  // 0 when no privileged vectors
  void recount();              // rebuild class_counts from examples
};

struct SplitManifest {
  std::vector<std::string> priv_ids;
  std::vector<std::string> aux_ids;
  std::string disjointness_level = "recording";
};

// Recording-disjoint split: recordings are shuffled with the seeded RNG and
// assigned whole to priv until >= n_priv examples, then to aux until
// >= n_aux; leftovers are dropped. Throws on insufficient data.
SplitManifest split(const Dataset& data, std::size_t n_priv, std::size_t n_aux,
                    std::uint64_t seed);

// Each index joins independently with probability q (true Poisson
// subsampling); the result may be empty.
std::vector<std::size_t> poisson_sample(std::size_t n, double q, CounterRng& rng);

struct SynthSpec {
  int classes = 3;
  std::vector<double> proportions = {0.80, 0.17, 0.03};
  std::size_t count = 4000;
  int n_mels = 40;
  int frames = 100;
  int privileged_dim = 3;        // 0 disables the privileged channel
  double class_separation = 1.0; // s: distance scale between class templates
  double privileged_rho = 0.9;   // P(privileged attribute == label)
  double gain_log_std = 0.5;     // per-example gain jitter exp(N(0, this^2))
  double offset_std = 0.5;       // per-example additive offset jitter
};

// Per class k: features = s * template_k + unit Gaussian noise, then the
// per-example gain/offset jitter. Privileged vector is the one-hot of a
// latent attribute equal to the label with probability rho. Labels follow
// the proportions exactly (largest-remainder rounding). Deterministic given
// (spec, seed); recordings are singletons.
Dataset synth_generate(const SynthSpec& spec, std::uint64_t seed);

// Label counts under largest-remainder rounding; throws unless the
// proportions sum to 1 within 1e-9.
std::vector<std::size_t> proportion_counts(const std::vector<double>& proportions,
                                           std::size_t n);

// Manifest: one line per example, `id,recording_id,label,feature_path,privileged`
// where privileged is `;`-joined reals or empty. Feature files are DSF1,
// paths relative to the manifest's directory.
void save_dataset(const std::filesystem::path& manifest_path,
                  const std::filesystem::path& feature_dir, const Dataset& data);
Dataset load_dataset(const std::filesystem::path& manifest_path);

void save_split(const std::filesystem::path& path, const SplitManifest& manifest);
SplitManifest load_split(const std::filesystem::path& path);

// Examples whose id is in `ids`, preserving dataset order.
Dataset subset(const Dataset& data, const std::vector<std::string>& ids);

}  // namespace dpspeech
