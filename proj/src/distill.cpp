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

#include "dpspeech/distill.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <unordered_map>

#include "dpspeech/error.hpp"

namespace dpspeech {

QueryMode query_mode_from_string(const std::string& s) {
  if (s == "audio_only") return QueryMode::audio_only;
  if (s == "privileged") return QueryMode::privileged;
  throw Error("config", "unknown query mode " + s);
}

std::string to_string(QueryMode m) {
  return m == QueryMode::audio_only ? "audio_only" : "privileged";
}

TeacherProbFile label_aux(const ModelParams& teacher, const Dataset& aux, QueryMode mode,
                          const FrontEndConfig& front_end,
                          const std::string& teacher_fingerprint) {
  // An audio-only teacher has no privileged path; both modes produce the
  // same output, recorded as audio_only.
  const QueryMode effective = teacher.cfg.multimodal() ? mode : QueryMode::audio_only;
  if (effective == QueryMode::privileged && !aux.multimodal())
    throw Error("mode_mismatch",
                "privileged query mode requires privileged vectors in the auxiliary set");

  TeacherProbFile out;
  out.classes = teacher.cfg.classes;
  out.mode = effective;
  out.teacher_fingerprint = teacher_fingerprint;
  out.rows.reserve(aux.size());

  const std::vector<double> zero_m(teacher.cfg.multimodal() ? teacher.cfg.priv_dim : 0, 0.0);
  for (const Example& e : aux.examples) {
    const FeatureMatrix x = apply_front_end(e.features, front_end);
    const std::vector<double>* m = nullptr;
    if (teacher.cfg.multimodal()) {
      m = effective == QueryMode::privileged ? &*e.privileged : &zero_m;
    }
    TeacherProbRow row;
    row.id = e.id;
    row.label = e.label;
    row.probs = forward_teacher(teacher, x, m);
    out.rows.push_back(std::move(row));
  }
  return out;
}

void write_prob_file(const std::filesystem::path& path, const TeacherProbFile& probs) {
  if (std::filesystem::exists(path))
    throw Error("one_shot_guard",
                "teacher probability file already exists (labeling is one-shot): " +
                    path.string());
  std::ofstream out(path);
  if (!out) throw Error("io", "cannot write probability file " + path.string());
  out << "#K=" << probs.classes << " mode=" << to_string(probs.mode)
      << " teacher=" << probs.teacher_fingerprint << "\n";
  out << std::setprecision(9);
  for (const TeacherProbRow& row : probs.rows) {
    out << row.id << ',' << row.label;
    for (double p : row.probs) out << ',' << p;
    out << '\n';
  }
  if (!out) throw Error("io", "short write to probability file " + path.string());
}

TeacherProbFile read_prob_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("missing_file", "cannot open probability file " + path.string());
  std::string header;
  if (!std::getline(in, header) || header.rfind("#K=", 0) != 0)
    throw Error("prob_file", "missing header in " + path.string());

  TeacherProbFile out;
  {
    std::istringstream hs(header.substr(1));
    std::string field;
    while (hs >> field) {
      const auto eq = field.find('=');
      if (eq == std::string::npos) continue;
      const std::string key = field.substr(0, eq);
      const std::string value = field.substr(eq + 1);
      if (key == "K") out.classes = std::stoi(value);
      else if (key == "mode") out.mode = query_mode_from_string(value);
      else if (key == "teacher") out.teacher_fingerprint = value;
    }
  }
  if (out.classes < 2) throw Error("prob_file", "bad class count in header");

  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream row_in(line);
    TeacherProbRow row;
    std::string tok;
    if (!std::getline(row_in, row.id, ',') || !std::getline(row_in, tok, ','))
      throw Error("prob_file", "malformed row: " + line);
    row.label = std::stoi(tok);
    while (std::getline(row_in, tok, ',')) row.probs.push_back(std::stod(tok));
    if (static_cast<int>(row.probs.size()) != out.classes)
      throw Error("prob_file", "row width does not match header K");
    double sum = 0.0;
    for (double p : row.probs) sum += p;
    if (std::abs(sum - 1.0) > 1e-6)
      throw Error("prob_file", "probabilities do not sum to 1 for id " + row.id);
    out.rows.push_back(std::move(row));
  }
  return out;
}

std::vector<double> temper_probs(std::span<const double> probs, double tau) {
  std::vector<double> out(probs.size());
  double max_log = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < probs.size(); ++i) {
    out[i] = std::log(std::max(probs[i], kProbFloor)) / tau;
    max_log = std::max(max_log, out[i]);
  }
  double sum = 0.0;
  for (double& v : out) {
    v = std::exp(v - max_log);
    sum += v;
  }
  for (double& v : out) v /= sum;
  return out;
}

namespace {

void check_kd_inputs(std::span<const double> logits, int y, std::span<const double> teacher_probs,
                     const KdConfig& cfg) {
  if (logits.size() != teacher_probs.size() || logits.empty())
    throw Error("shape_mismatch", "logits and teacher probabilities must share length");
  if (y < 0 || y >= static_cast<int>(logits.size()))
    throw Error("shape_mismatch", "label out of range");
  if (!(cfg.tau > 0.0)) throw Error("config", "temperature must be positive");
  if (cfg.alpha < 0.0 || cfg.alpha > 1.0) throw Error("config", "alpha must lie in [0,1]");
}

std::vector<double> softmax_scaled(std::span<const double> logits, double inv_scale) {
  std::vector<double> out(logits.size());
  double m = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = logits[i] * inv_scale;
    m = std::max(m, out[i]);
  }
  double sum = 0.0;
  for (double& v : out) {
    v = std::exp(v - m);
    sum += v;
  }
  for (double& v : out) v /= sum;
  return out;
}

}  // namespace

double kd_loss(std::span<const double> student_logits, int y,
               std::span<const double> teacher_probs, const KdConfig& cfg) {
  check_kd_inputs(student_logits, y, teacher_probs, cfg);
  const std::vector<double> p_s = softmax_scaled(student_logits, 1.0);
  const double ce = -std::log(std::max(p_s[y], kProbFloor));

  const std::vector<double> p_s_tau = softmax_scaled(student_logits, 1.0 / cfg.tau);
  const std::vector<double> p_t_tau = temper_probs(teacher_probs, cfg.tau);
  double kl = 0.0;
  for (std::size_t i = 0; i < p_t_tau.size(); ++i) {
    if (p_t_tau[i] > 0.0) {
      kl += p_t_tau[i] *
            (std::log(p_t_tau[i]) - std::log(std::max(p_s_tau[i], kProbFloor)));
    }
  }
  kl = std::max(kl, 0.0);  // guard tiny negative round-off
  return (1.0 - cfg.alpha) * ce + cfg.alpha * cfg.tau * cfg.tau * kl;
}

std::vector<double> kd_dlogits(std::span<const double> student_logits, int y,
                               std::span<const double> teacher_probs, const KdConfig& cfg) {
  check_kd_inputs(student_logits, y, teacher_probs, cfg);
  const std::vector<double> p_s = softmax_scaled(student_logits, 1.0);
  const std::vector<double> p_s_tau = softmax_scaled(student_logits, 1.0 / cfg.tau);
  const std::vector<double> p_t_tau = temper_probs(teacher_probs, cfg.tau);

  std::vector<double> dlogits(student_logits.size());
  const double ce_w = 1.0 - cfg.alpha;
  const double kd_w = cfg.alpha * cfg.tau;
  for (std::size_t k = 0; k < dlogits.size(); ++k) {
    dlogits[k] = ce_w * p_s[k] + kd_w * (p_s_tau[k] - p_t_tau[k]);
  }
  dlogits[y] -= ce_w;
  return dlogits;
}

ModelParams train_student(const Dataset& aux, const TeacherProbFile& probs, const KdConfig& cfg,
                          const ModelConfig& model_cfg, const FrontEndConfig& front_end) {
  if (model_cfg.multimodal())
    throw Error("config", "the student is audio-only; priv_dim must be 0");
  if (aux.size() == 0) throw Error("distill", "auxiliary set is empty");
  if (probs.classes != model_cfg.classes)
    throw Error("shape_mismatch", "probability file class count does not match the student");

  std::unordered_map<std::string, const TeacherProbRow*> by_id;
  by_id.reserve(probs.rows.size());
  for (const TeacherProbRow& row : probs.rows) by_id.emplace(row.id, &row);

  std::vector<FeatureMatrix> features;
  std::vector<const TeacherProbRow*> teacher_rows;
  features.reserve(aux.size());
  teacher_rows.reserve(aux.size());
  for (const Example& e : aux.examples) {
    const auto it = by_id.find(e.id);
    if (it == by_id.end())
      throw Error("missing_prob", "no teacher probability row for id " + e.id);
    features.push_back(apply_front_end(e.features, front_end));
    teacher_rows.push_back(it->second);
  }

  ModelParams params = init_params(model_cfg, cfg.seed);
  OptimizerState opt_state;
  CounterRng shuffle_rng(cfg.seed, RngStream::student_shuffle);

  std::vector<std::size_t> order(aux.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  ForwardCache cache;
  PerExampleGrad grad;
  NamedTensors sum = zeros_like(params.tensors);
  const std::size_t batch = static_cast<std::size_t>(std::max(cfg.batch_size, 1));

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) {
      std::swap(order[i - 1], order[shuffle_rng.next_below(i)]);
    }
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::size_t end = std::min(start + batch, order.size());
      for (auto& [name, tensor] : sum) {
        (void)name;
        std::fill(tensor.data.begin(), tensor.data.end(), 0.0);
      }
      for (std::size_t b = start; b < end; ++b) {
        const std::size_t i = order[b];
        forward_cached(params, features[i], nullptr, cache);
        const std::vector<double> dlogits = kd_dlogits(
            cache.logits, aux.examples[i].label, teacher_rows[i]->probs, cfg);
        backward_from_dlogits(params, features[i], nullptr, cache, dlogits, grad);
        add_in_place(sum, grad.tensors);
      }
      scale_in_place(sum, 1.0 / static_cast<double>(end - start));
      optimizer_step(params.tensors, sum, opt_state, cfg.optimizer);
    }
  }
  return params;
}

}  // namespace dpspeech
