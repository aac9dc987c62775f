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
#include <span>
#include <string>
#include <vector>

#include "dpspeech/features.hpp"
#include "dpspeech/rng.hpp"
#include "dpspeech/tensor.hpp"

namespace dpspeech {

// One hidden layer per branch over the flattened feature matrix, optional
// privileged branch, concatenation, linear head, softmax. Gradients are
// hand-derived so per-example computation stays exact and cheap.

enum class Activation { relu, tanh };

Activation activation_from_string(const std::string& s);
std::string to_string(Activation a);

struct ModelConfig {
  int n_mels = 40;
  int frames = 100;
  int hidden = 128;       // audio branch width
  int priv_dim = 0;       // 0 = audio-only model
  int priv_hidden = 16;   // privileged branch width
  int classes = 3;
  Activation activation = Activation::relu;

  int input_dim() const { return n_mels * frames; }
  bool multimodal() const { return priv_dim > 0; }
  int fused_dim() const { return hidden + (multimodal() ? priv_hidden : 0); }
};

// Tensors: audio_enc.{weight,bias}, head.{weight,bias} and, when
// multimodal, priv_enc.{weight,bias}. Weight layout is [out x in] row-major.
struct ModelParams {
  ModelConfig cfg;
  NamedTensors tensors;
};

// Glorot-uniform weights (+-sqrt(6/(fan_in+fan_out))), zero biases. Weights
// are filled in tensor-name lexicographic order, row-major.
ModelParams init_params(const ModelConfig& cfg, std::uint64_t seed);

struct ForwardCache {
  std::vector<double> pre_audio, act_audio;  // z_a, act(z_a)
  std::vector<double> pre_priv, act_priv;
  std::vector<double> logits, probs;
};

// Softmax class probabilities. Multimodal params require m (the zero vector
// is fine); audio-only params require m == nullptr.
std::vector<double> forward_teacher(const ModelParams& params, const FeatureMatrix& x,
                                    const std::vector<double>* m);
std::vector<double> forward_student(const ModelParams& params, const FeatureMatrix& x);

void forward_cached(const ModelParams& params, const FeatureMatrix& x,
                    const std::vector<double>* m, ForwardCache& cache);

// Whole-vector zeroing with probability p; never per-coordinate.
std::vector<double> priv_dropout(const std::vector<double>& m, double p, CounterRng& rng);

// w * (-log probs[y]), with probs[y] floored at 1e-12.
double weighted_ce_loss(std::span<const double> probs, int y, double w);

inline constexpr double kProbFloor = 1e-12;

struct PerExampleGrad {
  NamedTensors tensors;
  double l2_norm = 0.0;
};

// Exact gradient of weighted_ce_loss(forward(params, x, m), y, w) with
// respect to every parameter tensor; l2_norm is the norm of the
// concatenation of all tensors.
PerExampleGrad per_example_grad(const ModelParams& params, const FeatureMatrix& x,
                                const std::vector<double>* m, int y, double w);

// Allocation-free variant for the training loop; `out` keeps its buffers.
void per_example_grad_into(const ModelParams& params, const FeatureMatrix& x,
                           const std::vector<double>* m, int y, double w,
                           ForwardCache& cache, PerExampleGrad& out);

// Backprop from an arbitrary d(loss)/d(logits); shared between the CE and
// distillation objectives.
void backward_from_dlogits(const ModelParams& params, const FeatureMatrix& x,
                           const std::vector<double>* m, const ForwardCache& cache,
                           std::span<const double> dlogits, PerExampleGrad& out);

// Checkpoint: magic DPM1, u32 version, u32 tensor count; per tensor u32 name
// length + name, u32 rank, u32 dims, little-endian f32 data. A `.meta`
// sidecar carries the config as key=value lines.
void save_checkpoint(const std::filesystem::path& path, const ModelParams& params);
ModelParams load_checkpoint(const std::filesystem::path& path);

// FNV-1a over the checkpoint bytes, as a hex string; identifies which
// teacher produced a probability file.
std::string file_fingerprint(const std::filesystem::path& path);

}  // namespace dpspeech
