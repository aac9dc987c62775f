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

#include "dpspeech/datamodel.hpp"
#include "dpspeech/distill.hpp"
#include "dpspeech/dpsgd.hpp"
#include "dpspeech/metrics.hpp"

namespace dpspeech {

// One configuration record drives every stage. Defaults mirror the standard
// training recipe (clip 5.0, q=0.0016, 12500 steps, AdamW lr 1e-3 wd 1e-4,
// delta 1e-5, tau 2, alpha 0.7, dropout 0.5); the bundled desk-scale config
// overrides the data sizes and (q, steps, sigma).
struct RunConfig {
  std::uint64_t seed = 0;
  std::filesystem::path out_dir = "out";

  // data
  std::string data_source = "synthetic";  // or "manifest"
  std::filesystem::path source_manifest;  // when data_source == "manifest"
  std::size_t n_priv = 4000;
  std::size_t n_aux = 1000;
  std::size_t n_eval = 1000;  // held-out evaluation split
  SynthSpec synth;

  FrontEndConfig front_end;

  // model
  int hidden = 128;
  int priv_hidden = 16;
  std::string activation = "relu";
  bool multimodal_teacher = true;

  DpConfig dp;
  AwdpConfig awdp;
  double dropout_p = 0.5;

  KdConfig kd;
  std::string query_mode = "audio_only";

  // Directory layout under out_dir.
  std::filesystem::path data_dir() const { return out_dir / "data"; }
  std::filesystem::path teacher_dir() const { return out_dir / "teacher"; }
  std::filesystem::path probs_dir() const { return out_dir / "probs"; }
  std::filesystem::path student_dir() const { return out_dir / "student"; }
  std::filesystem::path reports_dir() const { return out_dir / "reports"; }

  std::filesystem::path priv_manifest() const { return data_dir() / "priv.manifest"; }
  std::filesystem::path aux_manifest() const { return data_dir() / "aux.manifest"; }
  std::filesystem::path eval_manifest() const { return data_dir() / "eval.manifest"; }
  std::filesystem::path teacher_checkpoint() const { return teacher_dir() / "checkpoint.dpm"; }
  std::filesystem::path prob_file() const { return probs_dir() / "teacher_probs.txt"; }
  std::filesystem::path student_checkpoint() const { return student_dir() / "student.dpm"; }

  ModelConfig teacher_model(int dataset_priv_dim) const;
  ModelConfig student_model() const;
  void validate() const;
};

RunConfig load_run_config(const std::filesystem::path& json_path);
RunConfig default_run_config();

// Pipeline stages (the CLI subcommands call straight into these).
void run_gen_data(const RunConfig& cfg);
void run_train_teacher(const RunConfig& cfg);
void run_label_aux(const RunConfig& cfg);
void run_train_student(const RunConfig& cfg);

struct EpsilonQuery {
  double q = 0.0016;
  double sigma = 1.0;
  long steps = 12500;
  double delta = 1e-5;
  int curve_epochs = 0;  // when > 0, also emit the per-epoch curve
};
// Prints epsilon and the best order; returns them.
EpsilonResult run_epsilon(const EpsilonQuery& query);

// Audio-only evaluation of any checkpoint against any manifest. `released`
// refuses multimodal checkpoints: only the student is ever released.
EvalReport run_evaluate(const RunConfig& cfg, const std::filesystem::path& checkpoint,
                        const std::filesystem::path& manifest, bool released);

struct SweepSpec {
  std::vector<double> sigmas = {1.0, 3.0};
  std::vector<bool> aw_settings = {true, false};
  std::vector<bool> dsaf_settings = {true, false};
  std::vector<std::size_t> aux_sizes = {};  // empty = config value
  std::vector<std::uint64_t> seeds = {0};
};

struct SweepRow {
  double sigma = 0.0;
  bool aw = false;
  bool dsaf = false;
  std::size_t aux_size = 0;
  std::uint64_t seed = 0;
  double epsilon = 0.0;
  EvalReport teacher;  // DP-direct, audio-only evaluation
  EvalReport student;  // released model
};

// Full pipeline per grid cell; one CSV row each, written to
// out_dir/reports/sweep.csv. Cells are independent and deterministic.
std::vector<SweepRow> run_sweep(const RunConfig& cfg, const SweepSpec& grid);

std::string sweep_csv_header();
std::string sweep_csv_row(const SweepRow& row);

}  // namespace dpspeech
