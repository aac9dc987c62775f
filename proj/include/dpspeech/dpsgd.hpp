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
#include <vector>

#include "dpspeech/accountant.hpp"
#include "dpspeech/datamodel.hpp"
#include "dpspeech/model.hpp"
#include "dpspeech/optim.hpp"

namespace dpspeech {

// The differentially private training engine: Poisson batches, adaptive
// class reweighting, per-sample clipping, Gaussian noising, optimizer step.
// Nothing in the reweighting, normalization, or dropout paths touches the
// privacy mechanism; the ledger depends only on (q, sigma, steps, delta).

struct DpConfig {
  double q = 0.0016;      // Poisson sampling rate
  long steps = 12500;
  double clip = 5.0;      // C
  double sigma = 1.0;     // noise multiplier; 0 = non-private
  double delta = 1e-5;
  OptimizerConfig optimizer;  // adamw, lr 1e-3, wd 1e-4 by default
  std::uint64_t seed = 0;
  bool check_clipping = false;  // re-verify every clipped norm in-loop
};

struct AwdpConfig {
  bool enabled = true;
  double eps_w = 1e-6;
  double w_min = 0.1;
  double w_max = 10.0;
};

// Per-class weights from realized batch label counts:
// clip(|B| / (K n_k + eps_w), w_min, w_max) for n_k > 0, exactly 1 otherwise.
std::vector<double> awdp_weights(const std::vector<int>& batch_labels, int classes,
                                 const AwdpConfig& cfg);

// Scale so the norm becomes min(||g||, C); direction preserved.
void clip_grad(PerExampleGrad& grad, double clip);

// (sum of clipped gradients + N(0, sigma^2 C^2 I)) / batch_size, drawing
// noise in tensor-name lexicographic order, row-major, Box-Muller pairs.
// `noise_key` and `step` address the draws; batch_size must be positive.
NamedTensors privatize_sum(NamedTensors sum_of_clipped, std::size_t batch_size, double clip,
                           double sigma, std::uint64_t noise_key, std::uint64_t step);

NamedTensors privatize(const std::vector<PerExampleGrad>& clipped_grads,
                       std::size_t batch_size, double clip, double sigma,
                       std::uint64_t noise_key, std::uint64_t step);

struct TrainState {
  ModelParams params;
  OptimizerState optimizer;
  long step = 0;
  PrivacyLedger ledger;
};

// One optimizer update from a privatized direction. Throws on non-finite
// entries; increments the step index.
void apply_update(TrainState& state, const NamedTensors& update, const DpConfig& cfg);

struct TrainLogRow {
  long step = 0;
  int epoch = 0;
  double loss = 0.0;
  double probe_acc = 0.0;
  double epsilon = 0.0;
};

struct TeacherTrainConfig {
  ModelConfig model;
  DpConfig dp;
  AwdpConfig awdp;
  double dropout_p = 0.5;   // privileged-modality dropout (multimodal only)
  FrontEndConfig front_end; // normalization toggle + (L, eta0)
  std::size_t probe_size = 1000;
  // Written after every epoch-equivalent when set.
  std::filesystem::path checkpoint_dir;
};

struct TrainResult {
  ModelParams params;
  PrivacyLedger ledger;
  std::vector<TrainLogRow> log;
  long clip_violations = 0;  // populated when check_clipping is on
};

// Full training loop. Empty Poisson batches skip the update but still count
// toward the ledger. One epoch-equivalent is ceil(1/q) steps.
TrainResult train_teacher(const Dataset& data, const TeacherTrainConfig& cfg);

long steps_per_epoch(double q);

void save_train_log(const std::filesystem::path& path, const std::vector<TrainLogRow>& log);

}  // namespace dpspeech
