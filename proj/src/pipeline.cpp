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

#include "dpspeech/pipeline.hpp"

#include <fstream>
#include <iostream>
#include <sstream>

#include <json.hpp>

#include "dpspeech/error.hpp"

namespace dpspeech {

namespace {

using nlohmann::json;

template <typename T>
void maybe_get(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

ModelConfig RunConfig::teacher_model(int dataset_priv_dim) const {
  ModelConfig mc;
  mc.n_mels = front_end.n_mels;
  mc.frames = front_end.fixed_frames;
  mc.hidden = hidden;
  mc.priv_hidden = priv_hidden;
  mc.classes = synth.classes;
  mc.activation = activation_from_string(activation);
  mc.priv_dim = multimodal_teacher ? dataset_priv_dim : 0;
  if (multimodal_teacher && dataset_priv_dim == 0)
    throw Error("config", "multimodal teacher requested but the dataset has no privileged vectors");
  return mc;
}

ModelConfig RunConfig::student_model() const {
  ModelConfig mc;
  mc.n_mels = front_end.n_mels;
  mc.frames = front_end.fixed_frames;
  mc.hidden = hidden;
  mc.classes = synth.classes;
  mc.activation = activation_from_string(activation);
  mc.priv_dim = 0;
  return mc;
}

void RunConfig::validate() const {
  if (synth.n_mels != front_end.n_mels || synth.frames != front_end.fixed_frames)
    throw Error("config", "synthetic n_mels/frames must agree with the front-end settings");
  if (static_cast<int>(synth.proportions.size()) != synth.classes)
    throw Error("config", "proportions size must equal the class count");
  if (!(dp.q > 0.0 && dp.q <= 1.0)) throw Error("config", "q must lie in (0,1]");
  if (!(dp.clip > 0.0)) throw Error("config", "clip must be positive");
  if (!(dp.delta > 0.0 && dp.delta < 1.0)) throw Error("config", "delta must lie in (0,1)");
  if (dropout_p < 0.0 || dropout_p > 1.0) throw Error("config", "dropout_p must lie in [0,1]");
}

RunConfig default_run_config() { return RunConfig{}; }

RunConfig load_run_config(const std::filesystem::path& json_path) {
  std::ifstream in(json_path);
  if (!in) throw Error("missing_file", "cannot open config " + json_path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw Error("config", std::string("bad JSON: ") + e.what());
  }

  RunConfig cfg;
  maybe_get(j, "seed", cfg.seed);
  if (j.contains("out_dir")) cfg.out_dir = j.at("out_dir").get<std::string>();

  if (j.contains("data")) {
    const json& d = j.at("data");
    maybe_get(d, "source", cfg.data_source);
    if (d.contains("manifest")) cfg.source_manifest = d.at("manifest").get<std::string>();
    maybe_get(d, "n_priv", cfg.n_priv);
    maybe_get(d, "n_aux", cfg.n_aux);
    maybe_get(d, "n_eval", cfg.n_eval);
    if (d.contains("synth")) {
      const json& s = d.at("synth");
      maybe_get(s, "classes", cfg.synth.classes);
      if (s.contains("proportions"))
        cfg.synth.proportions = s.at("proportions").get<std::vector<double>>();
      maybe_get(s, "n_mels", cfg.synth.n_mels);
      maybe_get(s, "frames", cfg.synth.frames);
      maybe_get(s, "privileged_dim", cfg.synth.privileged_dim);
      maybe_get(s, "class_separation", cfg.synth.class_separation);
      maybe_get(s, "privileged_rho", cfg.synth.privileged_rho);
      maybe_get(s, "gain_log_std", cfg.synth.gain_log_std);
      maybe_get(s, "offset_std", cfg.synth.offset_std);
    }
  }

  if (j.contains("front_end")) {
    const json& f = j.at("front_end");
    maybe_get(f, "n_mels", cfg.front_end.n_mels);
    maybe_get(f, "window_ms", cfg.front_end.window_ms);
    maybe_get(f, "hop_ms", cfg.front_end.hop_ms);
    maybe_get(f, "log_floor", cfg.front_end.log_floor);
    maybe_get(f, "fixed_frames", cfg.front_end.fixed_frames);
    maybe_get(f, "eta0", cfg.front_end.eta0);
    maybe_get(f, "dsaf", cfg.front_end.normalize);
  }

  if (j.contains("model")) {
    const json& m = j.at("model");
    maybe_get(m, "hidden", cfg.hidden);
    maybe_get(m, "priv_hidden", cfg.priv_hidden);
    maybe_get(m, "activation", cfg.activation);
    maybe_get(m, "multimodal", cfg.multimodal_teacher);
  }

  if (j.contains("dp")) {
    const json& d = j.at("dp");
    maybe_get(d, "q", cfg.dp.q);
    maybe_get(d, "steps", cfg.dp.steps);
    maybe_get(d, "clip", cfg.dp.clip);
    maybe_get(d, "sigma", cfg.dp.sigma);
    maybe_get(d, "delta", cfg.dp.delta);
    if (d.contains("optimizer"))
      cfg.dp.optimizer.kind = optimizer_from_string(d.at("optimizer").get<std::string>());
    maybe_get(d, "lr", cfg.dp.optimizer.lr);
    maybe_get(d, "weight_decay", cfg.dp.optimizer.weight_decay);
    maybe_get(d, "beta1", cfg.dp.optimizer.beta1);
    maybe_get(d, "beta2", cfg.dp.optimizer.beta2);
    maybe_get(d, "adam_eps", cfg.dp.optimizer.eps);
  }

  if (j.contains("awdp")) {
    const json& a = j.at("awdp");
    maybe_get(a, "enabled", cfg.awdp.enabled);
    maybe_get(a, "eps_w", cfg.awdp.eps_w);
    maybe_get(a, "w_min", cfg.awdp.w_min);
    maybe_get(a, "w_max", cfg.awdp.w_max);
  }

  maybe_get(j, "dropout_p", cfg.dropout_p);

  if (j.contains("kd")) {
    const json& k = j.at("kd");
    maybe_get(k, "tau", cfg.kd.tau);
    maybe_get(k, "alpha", cfg.kd.alpha);
    maybe_get(k, "epochs", cfg.kd.epochs);
    maybe_get(k, "batch_size", cfg.kd.batch_size);
    maybe_get(k, "lr", cfg.kd.optimizer.lr);
    maybe_get(k, "weight_decay", cfg.kd.optimizer.weight_decay);
    maybe_get(k, "query_mode", cfg.query_mode);
  }

  cfg.kd.seed = cfg.seed;
  cfg.dp.seed = cfg.seed;
  cfg.validate();
  return cfg;
}

void run_gen_data(const RunConfig& cfg) {
  cfg.validate();
  std::filesystem::create_directories(cfg.data_dir());

  Dataset all;
  if (cfg.data_source == "synthetic") {
    SynthSpec spec = cfg.synth;
    spec.count = cfg.n_priv + cfg.n_aux + cfg.n_eval;
    all = synth_generate(spec, cfg.seed);
  } else if (cfg.data_source == "manifest") {
    all = load_dataset(cfg.source_manifest);
  } else {
    throw Error("config", "unknown data source " + cfg.data_source);
  }

  // Three-way recording-disjoint split: carve eval off the auxiliary side.
  SplitManifest two_way = split(all, cfg.n_priv, cfg.n_aux + cfg.n_eval, cfg.seed);
  SplitManifest manifest;
  manifest.priv_ids = two_way.priv_ids;
  manifest.aux_ids.assign(two_way.aux_ids.begin(),
                          two_way.aux_ids.begin() + static_cast<long>(cfg.n_aux));
  std::vector<std::string> eval_ids(two_way.aux_ids.begin() + static_cast<long>(cfg.n_aux),
                                    two_way.aux_ids.end());

  save_dataset(cfg.data_dir() / "all.manifest", cfg.data_dir() / "features", all);
  save_split(cfg.data_dir() / "split.txt", manifest);

  const Dataset priv = subset(all, manifest.priv_ids);
  const Dataset aux = subset(all, manifest.aux_ids);
  const Dataset eval_set = subset(all, eval_ids);
  // Subset manifests reference the same per-example feature files.
  auto write_subset_manifest = [&](const std::filesystem::path& path, const Dataset& d) {
    std::ofstream out(path);
    if (!out) throw Error("io", "cannot write manifest " + path.string());
    out.precision(17);
    for (const Example& e : d.examples) {
      out << e.id << ',' << e.recording_id << ',' << e.label << ','
          << "features/" << e.id << ".dsf" << ',';
      if (e.privileged) {
        for (std::size_t i = 0; i < e.privileged->size(); ++i) {
          if (i) out << ';';
          out << (*e.privileged)[i];
        }
      }
      out << '\n';
    }
  };
  write_subset_manifest(cfg.priv_manifest(), priv);
  write_subset_manifest(cfg.aux_manifest(), aux);
  write_subset_manifest(cfg.eval_manifest(), eval_set);

  std::cout << "generated " << all.size() << " examples (priv=" << priv.size()
            << " aux=" << aux.size() << " eval=" << eval_set.size() << ")\n";
  std::cout << "class counts:";
  for (std::size_t c : all.class_counts) std::cout << ' ' << c;
  std::cout << '\n';
}

void run_train_teacher(const RunConfig& cfg) {
  cfg.validate();
  const Dataset priv = load_dataset(cfg.priv_manifest());
  std::filesystem::create_directories(cfg.teacher_dir());

  TeacherTrainConfig tc;
  tc.model = cfg.teacher_model(priv.privileged_dim());
  tc.dp = cfg.dp;
  tc.awdp = cfg.awdp;
  tc.dropout_p = cfg.dropout_p;
  tc.front_end = cfg.front_end;

  const TrainResult result = train_teacher(priv, tc);
  save_checkpoint(cfg.teacher_checkpoint(), result.params);
  save_ledger(cfg.teacher_dir() / "ledger.txt", result.ledger);
  save_train_log(cfg.teacher_dir() / "train_log.csv", result.log);

  if (result.ledger.non_private()) {
    std::cout << "trained " << cfg.dp.steps << " steps, epsilon=inf (non-private baseline)\n";
  } else {
    const EpsilonResult eps = to_epsilon(result.ledger);
    std::cout << "trained " << cfg.dp.steps << " steps, epsilon=" << eps.epsilon
              << " (alpha=" << eps.best_alpha << ", delta=" << cfg.dp.delta << ")\n";
  }
}

EpsilonResult run_epsilon(const EpsilonQuery& query) {
  PrivacyLedger ledger = make_ledger(query.q, query.sigma, query.delta);
  ledger.steps = query.steps;
  const EpsilonResult r = to_epsilon(ledger);
  if (ledger.non_private()) {
    std::cout << "epsilon=inf (non-private: sigma=0)\n";
  } else {
    std::cout << "epsilon=" << r.epsilon << " best_alpha=" << r.best_alpha << '\n';
  }
  if (query.curve_epochs > 0) {
    const long per_epoch = query.steps / query.curve_epochs;
    const std::vector<double> curve =
        epsilon_curve(query.q, query.sigma, query.delta, per_epoch, query.curve_epochs);
    std::cout << "epoch,epsilon\n";
    for (std::size_t e = 0; e < curve.size(); ++e) std::cout << e << ',' << curve[e] << '\n';
  }
  return r;
}

void run_label_aux(const RunConfig& cfg) {
  cfg.validate();
  const Dataset aux = load_dataset(cfg.aux_manifest());
  const ModelParams teacher = load_checkpoint(cfg.teacher_checkpoint());
  std::filesystem::create_directories(cfg.probs_dir());

  const TeacherProbFile probs =
      label_aux(teacher, aux, query_mode_from_string(cfg.query_mode), cfg.front_end,
                file_fingerprint(cfg.teacher_checkpoint()));
  write_prob_file(cfg.prob_file(), probs);
  std::cout << "labeled " << probs.rows.size() << " auxiliary examples (mode="
            << to_string(probs.mode) << ")\n";
}

void run_train_student(const RunConfig& cfg) {
  cfg.validate();
  // Reads only the auxiliary manifest and the stored teacher probabilities.
  const Dataset aux = load_dataset(cfg.aux_manifest());
  const TeacherProbFile probs = read_prob_file(cfg.prob_file());
  std::filesystem::create_directories(cfg.student_dir());

  const ModelParams student =
      train_student(aux, probs, cfg.kd, cfg.student_model(), cfg.front_end);
  save_checkpoint(cfg.student_checkpoint(), student);
  std::cout << "trained student on " << aux.size() << " auxiliary examples\n";
}

EvalReport run_evaluate(const RunConfig& cfg, const std::filesystem::path& checkpoint,
                        const std::filesystem::path& manifest, bool released) {
  const ModelParams params = load_checkpoint(checkpoint);
  if (released && params.cfg.multimodal())
    throw Error("release_violation",
                "a multimodal checkpoint cannot be evaluated as released; release is student-only");
  const Dataset data = load_dataset(manifest);

  // Evaluation is audio-only: a multimodal checkpoint sees the zero vector.
  const std::vector<double> zero_m(params.cfg.multimodal() ? params.cfg.priv_dim : 0, 0.0);
  std::vector<int> preds, labels;
  preds.reserve(data.size());
  labels.reserve(data.size());
  ForwardCache cache;
  for (const Example& e : data.examples) {
    const FeatureMatrix x = apply_front_end(e.features, cfg.front_end);
    forward_cached(params, x, params.cfg.multimodal() ? &zero_m : nullptr, cache);
    preds.push_back(argmax_pred(cache.probs));
    labels.push_back(e.label);
  }
  const EvalReport report = evaluate(preds, labels, data.classes);

  std::filesystem::create_directories(cfg.reports_dir());
  const std::string stem = checkpoint.stem().string() + "_" + manifest.stem().string();
  {
    std::ofstream out(cfg.reports_dir() / (stem + ".txt"));
    out << report.pretty();
  }
  {
    std::ofstream out(cfg.reports_dir() / (stem + ".csv"));
    out << EvalReport::csv_header("") << '\n' << report.csv_row() << '\n';
  }
  std::cout << report.pretty();
  return report;
}

std::string sweep_csv_header() {
  return "sigma,aw,dsaf,aux_size,seed,epsilon," + EvalReport::csv_header("teacher_") + "," +
         EvalReport::csv_header("student_");
}

std::string sweep_csv_row(const SweepRow& row) {
  std::ostringstream out;
  out.precision(6);
  out << row.sigma << ',' << (row.aw ? 1 : 0) << ',' << (row.dsaf ? 1 : 0) << ','
      << row.aux_size << ',' << row.seed << ',' << row.epsilon << ',' << row.teacher.csv_row()
      << ',' << row.student.csv_row();
  return out.str();
}

std::vector<SweepRow> run_sweep(const RunConfig& base, const SweepSpec& grid) {
  base.validate();
  std::vector<SweepRow> rows;
  const std::vector<std::size_t> aux_sizes =
      grid.aux_sizes.empty() ? std::vector<std::size_t>{base.n_aux} : grid.aux_sizes;

  for (double sigma : grid.sigmas) {
    for (bool aw : grid.aw_settings) {
      for (bool dsaf_on : grid.dsaf_settings) {
        for (std::size_t aux_size : aux_sizes) {
          for (std::uint64_t seed : grid.seeds) {
            RunConfig cfg = base;
            cfg.seed = seed;
            cfg.dp.seed = seed;
            cfg.kd.seed = seed;
            cfg.dp.sigma = sigma;
            cfg.awdp.enabled = aw;
            cfg.front_end.normalize = dsaf_on;
            cfg.n_aux = aux_size;
            std::ostringstream cell;
            cell << "cell_s" << sigma << "_aw" << aw << "_d" << dsaf_on << "_x" << aux_size
                 << "_r" << seed;
            cfg.out_dir = base.out_dir / "sweep" / cell.str();

            run_gen_data(cfg);
            run_train_teacher(cfg);
            run_label_aux(cfg);
            run_train_student(cfg);

            SweepRow row;
            row.sigma = sigma;
            row.aw = aw;
            row.dsaf = dsaf_on;
            row.aux_size = aux_size;
            row.seed = seed;
            PrivacyLedger ledger = make_ledger(cfg.dp.q, sigma, cfg.dp.delta);
            ledger.steps = cfg.dp.steps;
            row.epsilon = to_epsilon(ledger).epsilon;
            row.teacher =
                run_evaluate(cfg, cfg.teacher_checkpoint(), cfg.eval_manifest(), false);
            row.student =
                run_evaluate(cfg, cfg.student_checkpoint(), cfg.eval_manifest(), true);
            rows.push_back(row);
          }
        }
      }
    }
  }

  std::filesystem::create_directories(base.reports_dir());
  std::ofstream out(base.reports_dir() / "sweep.csv");
  out << sweep_csv_header() << '\n';
  for (const SweepRow& row : rows) out << sweep_csv_row(row) << '\n';
  std::cout << "sweep complete: " << rows.size() << " cells\n";
  return rows;
}

}  // namespace dpspeech
