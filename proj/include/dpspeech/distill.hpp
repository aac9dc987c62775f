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
#include <span>
#include <string>
#include <vector>

#include "dpspeech/datamodel.hpp"
#include "dpspeech/model.hpp"
#include "dpspeech/optim.hpp"

namespace dpspeech {

// Offline distillation stage. The teacher is queried exactly once on the
// auxiliary set; the stored probabilities are the only teacher artifact the
// student may read, which is what makes the released student a pure
// post-processing of the private training stage.

enum class QueryMode { audio_only, privileged };

QueryMode query_mode_from_string(const std::string& s);
std::string to_string(QueryMode m);

struct TeacherProbRow {
  std::string id;
  int label = 0;
  std::vector<double> probs;
};

struct TeacherProbFile {
  int classes = 0;
  QueryMode mode = QueryMode::audio_only;
  std::string teacher_fingerprint;
  std::vector<TeacherProbRow> rows;
};

// One forward pass per auxiliary example. audio_only passes the zero vector
// through a multimodal teacher; privileged mode requires privileged vectors
// and a multimodal teacher. Deterministic.
TeacherProbFile label_aux(const ModelParams& teacher, const Dataset& aux, QueryMode mode,
                          const FrontEndConfig& front_end,
                          const std::string& teacher_fingerprint);

// Text format: header `#K=<K> mode=<mode> teacher=<fingerprint>`, then
// `id,y,p0,...` with 9 significant digits. Writing over an existing file is
// an error: labeling is one-shot.
void write_prob_file(const std::filesystem::path& path, const TeacherProbFile& probs);
TeacherProbFile read_prob_file(const std::filesystem::path& path);

struct KdConfig {
  double tau = 2.0;    // temperature
  double alpha = 0.7;  // KD mixing coefficient
  int epochs = 30;
  int batch_size = 32;
  OptimizerConfig optimizer;
  std::uint64_t seed = 0;
};

// (1-alpha) CE(y, softmax(z)) + alpha tau^2 KL(p_t^tau || softmax(z/tau)),
// where p_t^tau re-tempers the stored teacher probabilities via
// p^(1/tau) renormalization. KL in nats.
double kd_loss(std::span<const double> student_logits, int y, std::span<const double> teacher_probs,
               const KdConfig& cfg);

// d(kd_loss)/d(logits) = (1-alpha)(p_s - onehot(y)) + alpha tau (p_s^tau - p_t^tau).
std::vector<double> kd_dlogits(std::span<const double> student_logits, int y,
                               std::span<const double> teacher_probs, const KdConfig& cfg);

// Stored-probability re-tempering: softmax(log p / tau) with a 1e-12 floor.
std::vector<double> temper_probs(std::span<const double> probs, double tau);

// Non-private minibatch training of the audio-only student. Consumes only
// the auxiliary examples, their hard labels, and the stored teacher
// probabilities. Deterministic given the seed.
ModelParams train_student(const Dataset& aux, const TeacherProbFile& probs, const KdConfig& cfg,
                          const ModelConfig& model_cfg, const FrontEndConfig& front_end);

}  // namespace dpspeech
