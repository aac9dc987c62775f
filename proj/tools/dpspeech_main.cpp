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

#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "dpspeech/error.hpp"
#include "dpspeech/pipeline.hpp"

namespace {

using dpspeech::RunConfig;

// Shared --config/--seed/--out flags; flags override file values.
struct CommonOpts {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
  std::optional<double> sigma;
  std::optional<bool> aw;
  std::optional<bool> dsaf;

  RunConfig resolve() const {
    RunConfig cfg = config_path.empty() ? dpspeech::default_run_config()
                                        : dpspeech::load_run_config(config_path);
    if (seed) {
      cfg.seed = *seed;
      cfg.dp.seed = *seed;
      cfg.kd.seed = *seed;
    }
    if (out_dir) cfg.out_dir = *out_dir;
    if (sigma) cfg.dp.sigma = *sigma;
    if (aw) cfg.awdp.enabled = *aw;
    if (dsaf) cfg.front_end.normalize = *dsaf;
    cfg.validate();
    return cfg;
  }
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
  cmd->add_option("--config", opts.config_path, "JSON run configuration");
  cmd->add_option("--seed", opts.seed, "override the config seed");
  cmd->add_option("--out", opts.out_dir, "override the output directory");
  cmd->add_option("--sigma", opts.sigma, "override the noise multiplier");
  cmd->add_option("--aw", opts.aw, "enable/disable adaptive class reweighting");
  cmd->add_option("--dsaf", opts.dsaf, "enable/disable per-utterance normalization");
}

template <typename C>
std::vector<C> parse_list(const std::string& csv) {
  std::vector<C> out;
  std::istringstream in(csv);
  std::string tok;
  while (std::getline(in, tok, ',')) {
    if constexpr (std::is_same_v<C, double>) out.push_back(std::stod(tok));
    else out.push_back(static_cast<C>(std::stoull(tok)));
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"differentially private speech classification pipeline"};
  app.require_subcommand(1);

  CommonOpts gen_opts, teacher_opts, label_opts, student_opts, eval_opts, sweep_opts;

  CLI::App* gen = app.add_subcommand("gen-data", "generate the dataset and splits");
  add_common(gen, gen_opts);

  CLI::App* teach = app.add_subcommand("train-teacher", "DP-train the teacher");
  add_common(teach, teacher_opts);

  dpspeech::EpsilonQuery eps_query;
  CLI::App* eps = app.add_subcommand("epsilon", "privacy budget for (q, sigma, steps, delta)");
  eps->add_option("--q", eps_query.q, "Poisson sampling rate")->capture_default_str();
  eps->add_option("--sigma", eps_query.sigma, "noise multiplier")->capture_default_str();
  eps->add_option("--steps", eps_query.steps, "composed step count")->capture_default_str();
  eps->add_option("--delta", eps_query.delta, "target delta")->capture_default_str();
  eps->add_option("--curve", eps_query.curve_epochs, "print a per-epoch CSV over this many epochs");

  CLI::App* label = app.add_subcommand("label-aux", "one-shot offline teacher labeling");
  add_common(label, label_opts);
  std::string query_mode;
  label->add_option("--query-mode", query_mode, "audio_only or privileged");

  CLI::App* student = app.add_subcommand("train-student", "distill the released student");
  add_common(student, student_opts);

  CLI::App* eval = app.add_subcommand("evaluate", "evaluate a checkpoint on a manifest");
  add_common(eval, eval_opts);
  std::string eval_checkpoint, eval_manifest;
  bool released = false;
  eval->add_option("--checkpoint", eval_checkpoint, "model checkpoint")->required();
  eval->add_option("--manifest", eval_manifest, "dataset manifest")->required();
  eval->add_flag("--released", released, "require a releasable (audio-only) model");

  CLI::App* sweep = app.add_subcommand("sweep", "grid of full pipeline runs");
  add_common(sweep, sweep_opts);
  std::string sigmas = "1,3", seeds = "0,1,2", aux_sizes, aw_axis = "1,0", dsaf_axis = "1,0";
  sweep->add_option("--sigmas", sigmas, "comma-separated noise multipliers")
      ->capture_default_str();
  sweep->add_option("--seeds", seeds, "comma-separated seeds")->capture_default_str();
  sweep->add_option("--aux-sizes", aux_sizes, "comma-separated auxiliary set sizes");
  sweep->add_option("--aw-axis", aw_axis, "reweighting settings, e.g. 1,0")
      ->capture_default_str();
  sweep->add_option("--dsaf-axis", dsaf_axis, "normalization settings, e.g. 1,0")
      ->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) {
      dpspeech::run_gen_data(gen_opts.resolve());
    } else if (teach->parsed()) {
      dpspeech::run_train_teacher(teacher_opts.resolve());
    } else if (eps->parsed()) {
      dpspeech::run_epsilon(eps_query);
    } else if (label->parsed()) {
      RunConfig cfg = label_opts.resolve();
      if (!query_mode.empty()) cfg.query_mode = query_mode;
      dpspeech::run_label_aux(cfg);
    } else if (student->parsed()) {
      dpspeech::run_train_student(student_opts.resolve());
    } else if (eval->parsed()) {
      dpspeech::run_evaluate(eval_opts.resolve(), eval_checkpoint, eval_manifest, released);
    } else if (sweep->parsed()) {
      dpspeech::SweepSpec grid;
      grid.sigmas = parse_list<double>(sigmas);
      grid.seeds = parse_list<std::uint64_t>(seeds);
      if (!aux_sizes.empty()) grid.aux_sizes = parse_list<std::size_t>(aux_sizes);
      grid.aw_settings.clear();
      for (auto v : parse_list<int>(aw_axis)) grid.aw_settings.push_back(v != 0);
      grid.dsaf_settings.clear();
      for (auto v : parse_list<int>(dsaf_axis)) grid.dsaf_settings.push_back(v != 0);
      dpspeech::run_sweep(sweep_opts.resolve(), grid);
    }
  } catch (const dpspeech::Error& e) {
    std::cerr << "error: " << e.category() << ": " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: internal: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
