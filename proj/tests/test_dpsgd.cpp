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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "dpspeech/dpsgd.hpp"
#include "dpspeech/error.hpp"

using namespace dpspeech;

namespace {

SynthSpec small_synth(std::size_t n = 200) {
  SynthSpec spec;
  spec.count = n;
  spec.n_mels = 6;
  spec.frames = 8;
  spec.class_separation = 1.0;
  return spec;
}

TeacherTrainConfig small_train_config(bool multimodal) {
  TeacherTrainConfig tc;
  tc.model.n_mels = 6;
  tc.model.frames = 8;
  tc.model.hidden = 16;
  tc.model.priv_dim = multimodal ? 3 : 0;
  tc.model.priv_hidden = 4;
  tc.model.classes = 3;
  tc.front_end.n_mels = 6;
  tc.front_end.fixed_frames = 8;
  tc.dp.q = 0.1;
  tc.dp.steps = 50;
  tc.dp.clip = 1.0;
  tc.dp.sigma = 1.0;
  tc.probe_size = 100;
  return tc;
}

PerExampleGrad grad_like(const NamedTensors& shape, CounterRng& rng, double scale) {
  PerExampleGrad g;
  g.tensors = zeros_like(shape);
  for (auto& [name, t] : g.tensors) {
    (void)name;
    for (double& v : t.data) v = scale * rng.next_gaussian();
  }
  g.l2_norm = std::sqrt(squared_l2_norm(g.tensors));
  return g;
}

}  // namespace

TEST_CASE("adaptive weights: hand-evaluated batch") {
  // |B|=32, K=3, counts (20,10,2)
  std::vector<int> labels;
  labels.insert(labels.end(), 20, 0);
  labels.insert(labels.end(), 10, 1);
  labels.insert(labels.end(), 2, 2);
  AwdpConfig cfg;
  const auto w = awdp_weights(labels, 3, cfg);
  CHECK(w[0] == doctest::Approx(0.5333).epsilon(1e-3));
  CHECK(w[1] == doctest::Approx(1.0667).epsilon(1e-3));
  CHECK(w[2] == doctest::Approx(5.3333).epsilon(1e-3));
}

TEST_CASE("adaptive weights: absent classes get exactly one") {
  std::vector<int> labels(32, 1);
  AwdpConfig cfg;
  const auto w = awdp_weights(labels, 3, cfg);
  CHECK(w[0] == 1.0);
  CHECK(w[1] == doctest::Approx(32.0 / (96.0 + 1e-6)).epsilon(1e-9));
  CHECK(w[2] == 1.0);
}

TEST_CASE("adaptive weights: balanced batches are neutral") {
  std::vector<int> labels;
  for (int k = 0; k < 3; ++k) labels.insert(labels.end(), 12, k);
  AwdpConfig cfg;
  for (double w : awdp_weights(labels, 3, cfg))
    CHECK(w == doctest::Approx(36.0 / (36.0 + 1e-6)).epsilon(1e-9));

  cfg.enabled = false;
  for (double w : awdp_weights(labels, 3, cfg)) CHECK(w == 1.0);
}

TEST_CASE("adaptive weights: clipping bounds apply") {
  std::vector<int> labels(99, 0);
  labels.push_back(1);  // count 1 in a batch of 100 -> raw weight ~33
  AwdpConfig cfg;      // bounds [0.1, 10]
  const auto w = awdp_weights(labels, 3, cfg);
  CHECK(w[1] == 10.0);
  CHECK(w[0] == doctest::Approx(100.0 / (3 * 99.0)).epsilon(1e-6));
}

TEST_CASE("gradient clipping") {
  ModelConfig mc;
  mc.n_mels = 2;
  mc.frames = 3;
  mc.hidden = 4;
  mc.classes = 3;
  const ModelParams params = init_params(mc, 0);
  CounterRng rng(1, RngStream::synth);

  PerExampleGrad g = grad_like(params.tensors, rng, 1.0);
  const double norm = g.l2_norm;
  const NamedTensors before = g.tensors;

  // Above the threshold: rescaled to norm C, direction preserved.
  PerExampleGrad big = g;
  clip_grad(big, norm / 2.0);
  CHECK(std::sqrt(squared_l2_norm(big.tensors)) == doctest::Approx(norm / 2.0).epsilon(1e-9));
  auto ib = before.begin();
  for (const auto& [name, t] : big.tensors) {
    (void)name;
    for (std::size_t i = 0; i < t.data.size(); ++i)
      CHECK(t.data[i] == doctest::Approx(0.5 * ib->second.data[i]).epsilon(1e-12));
    ++ib;
  }

  // Below the threshold: untouched.
  PerExampleGrad small = g;
  clip_grad(small, norm * 2.0);
  CHECK(max_abs_diff(small.tensors, before) == 0.0);
  CHECK(small.l2_norm == norm);

  // Zero gradient: untouched.
  PerExampleGrad zero;
  zero.tensors = zeros_like(params.tensors);
  zero.l2_norm = 0.0;
  clip_grad(zero, 1.0);
  CHECK(squared_l2_norm(zero.tensors) == 0.0);
}

TEST_CASE("privatize with sigma=0 is the exact clipped mean") {
  ModelConfig mc;
  mc.n_mels = 2;
  mc.frames = 2;
  mc.hidden = 3;
  mc.classes = 3;
  const ModelParams params = init_params(mc, 0);
  CounterRng rng(2, RngStream::synth);
  PerExampleGrad a = grad_like(params.tensors, rng, 0.4);
  PerExampleGrad b = grad_like(params.tensors, rng, 0.3);
  clip_grad(a, 5.0);
  clip_grad(b, 5.0);

  const NamedTensors avg = privatize({a, b}, 2, 5.0, 0.0, 123, 1);
  auto ia = a.tensors.begin();
  auto ib = b.tensors.begin();
  for (const auto& [name, t] : avg) {
    (void)name;
    for (std::size_t i = 0; i < t.data.size(); ++i)
      CHECK(t.data[i] ==
            doctest::Approx((ia->second.data[i] + ib->second.data[i]) / 2.0).epsilon(1e-15));
    ++ia;
    ++ib;
  }
}

TEST_CASE("privatize with sigma=0 preserves the direction of a clipped gradient") {
  ModelConfig mc;
  mc.n_mels = 2;
  mc.frames = 2;
  mc.hidden = 3;
  mc.classes = 3;
  const ModelParams params = init_params(mc, 0);
  CounterRng rng(3, RngStream::synth);
  PerExampleGrad g = grad_like(params.tensors, rng, 10.0);  // norm likely above C
  const NamedTensors raw = g.tensors;
  clip_grad(g, 2.0);
  const NamedTensors out = privatize({g}, 1, 2.0, 0.0, 5, 1);

  // out is a positive multiple of the raw gradient.
  double ratio = 0.0;
  auto ir = raw.begin();
  for (const auto& [name, t] : out) {
    (void)name;
    for (std::size_t i = 0; i < t.data.size(); ++i) {
      if (std::abs(ir->second.data[i]) > 1e-12) {
        const double r = t.data[i] / ir->second.data[i];
        if (ratio == 0.0) ratio = r;
        CHECK(r == doctest::Approx(ratio).epsilon(1e-9));
        CHECK(r > 0.0);
      }
    }
    ++ir;
  }
}

TEST_CASE("noise scale: per-coordinate std of the empty sum") {
  NamedTensors shape;
  shape.emplace("t", Tensor::zeros({4}));
  const double clip = 5.0;
  const double sigma = 1.0;
  const std::size_t batch = 32;
  const int draws = 100000;

  std::vector<double> sum(4, 0.0), sq(4, 0.0);
  for (int d = 0; d < draws; ++d) {
    const NamedTensors noisy =
        privatize_sum(zeros_like(shape), batch, clip, sigma, 99, static_cast<std::uint64_t>(d));
    const auto& v = noisy.at("t").data;
    for (int i = 0; i < 4; ++i) {
      sum[i] += v[i];
      sq[i] += v[i] * v[i];
    }
  }
  const double expect = sigma * clip / static_cast<double>(batch);
  for (int i = 0; i < 4; ++i) {
    const double mean = sum[i] / draws;
    const double var = sq[i] / draws - mean * mean;
    CHECK(std::sqrt(var) == doctest::Approx(expect).epsilon(0.02));
  }
}

TEST_CASE("sensitivity: one-example swap moves the pre-noise sum by at most 2C") {
  ModelConfig mc;
  mc.n_mels = 3;
  mc.frames = 3;
  mc.hidden = 5;
  mc.classes = 3;
  const ModelParams params = init_params(mc, 4);
  CounterRng rng(5, RngStream::synth);
  const double clip = 0.7;

  for (int trial = 0; trial < 25; ++trial) {
    std::vector<PerExampleGrad> batch;
    for (int i = 0; i < 8; ++i) batch.push_back(grad_like(params.tensors, rng, 2.0));
    for (auto& g : batch) clip_grad(g, clip);

    PerExampleGrad swapped = grad_like(params.tensors, rng, 3.0);
    clip_grad(swapped, clip);

    NamedTensors sum_a = zeros_like(params.tensors);
    for (const auto& g : batch) add_in_place(sum_a, g.tensors);
    NamedTensors sum_b = zeros_like(params.tensors);
    for (std::size_t i = 0; i + 1 < batch.size(); ++i) add_in_place(sum_b, batch[i].tensors);
    add_in_place(sum_b, swapped.tensors);

    scale_in_place(sum_b, -1.0);
    add_in_place(sum_a, sum_b);
    CHECK(std::sqrt(squared_l2_norm(sum_a)) <= 2.0 * clip + 1e-9);
  }
}

TEST_CASE("sgd update: lr=1 with the parameters as gradient zeroes them") {
  ModelConfig mc;
  mc.n_mels = 2;
  mc.frames = 2;
  mc.hidden = 3;
  mc.classes = 3;
  TrainState state;
  state.params = init_params(mc, 6);
  state.ledger = make_ledger(0.01, 1.0, 1e-5);
  DpConfig cfg;
  cfg.optimizer.kind = OptimizerKind::sgd;
  cfg.optimizer.lr = 1.0;
  const NamedTensors g = state.params.tensors;
  apply_update(state, g, cfg);
  CHECK(squared_l2_norm(state.params.tensors) == 0.0);
  CHECK(state.step == 1);
}

TEST_CASE("adamw reaches the unit-step fixed point under a constant gradient") {
  ModelConfig mc;
  mc.n_mels = 2;
  mc.frames = 2;
  mc.hidden = 3;
  mc.classes = 3;
  TrainState state;
  state.params = init_params(mc, 7);
  state.ledger = make_ledger(0.01, 1.0, 1e-5);
  DpConfig cfg;
  cfg.optimizer.kind = OptimizerKind::adamw;
  cfg.optimizer.lr = 1e-3;
  cfg.optimizer.weight_decay = 0.0;

  NamedTensors g = zeros_like(state.params.tensors);
  for (auto& [name, t] : g) {
    (void)name;
    for (std::size_t i = 0; i < t.data.size(); ++i) t.data[i] = (i % 2 == 0) ? 0.3 : -0.4;
  }
  // With a constant gradient, bias correction makes m_hat = g and
  // v_hat = g^2 at every step, so each coordinate moves by exactly
  // lr * |g| / (|g| + eps).
  for (int step = 0; step < 100; ++step) {
    const NamedTensors before = state.params.tensors;
    apply_update(state, g, cfg);
    auto ib = before.begin();
    for (const auto& [name, t] : state.params.tensors) {
      (void)name;
      for (std::size_t i = 0; i < t.data.size(); ++i) {
        const double delta = std::abs(t.data[i] - ib->second.data[i]);
        CHECK(delta == doctest::Approx(cfg.optimizer.lr).epsilon(1e-6));
      }
      ++ib;
    }
  }
}

TEST_CASE("sgd ignores weight decay: zero gradient leaves parameters unchanged") {
  ModelConfig mc;
  mc.n_mels = 2;
  mc.frames = 2;
  mc.hidden = 3;
  mc.classes = 3;
  TrainState state;
  state.params = init_params(mc, 8);
  state.ledger = make_ledger(0.01, 1.0, 1e-5);
  const NamedTensors before = state.params.tensors;
  DpConfig cfg;
  cfg.optimizer.kind = OptimizerKind::sgd;
  cfg.optimizer.weight_decay = 0.1;
  apply_update(state, zeros_like(before), cfg);
  CHECK(max_abs_diff(state.params.tensors, before) == 0.0);
}

TEST_CASE("non-finite updates abort the step") {
  ModelConfig mc;
  mc.n_mels = 2;
  mc.frames = 2;
  mc.hidden = 3;
  mc.classes = 3;
  TrainState state;
  state.params = init_params(mc, 9);
  state.ledger = make_ledger(0.01, 1.0, 1e-5);
  NamedTensors g = zeros_like(state.params.tensors);
  g.begin()->second.data[0] = std::numeric_limits<double>::quiet_NaN();
  DpConfig cfg;
  CHECK_THROWS_AS(apply_update(state, g, cfg), Error);
}

TEST_CASE("zero steps leave the initialization untouched with epsilon 0") {
  const Dataset data = synth_generate(small_synth(), 1);
  TeacherTrainConfig tc = small_train_config(true);
  tc.dp.steps = 0;
  const TrainResult r = train_teacher(data, tc);
  const ModelParams init = init_params(tc.model, tc.dp.seed);
  CHECK(max_abs_diff(r.params.tensors, init.tensors) == 0.0);
  CHECK(r.ledger.steps == 0);
  CHECK(to_epsilon(r.ledger).epsilon == 0.0);
}

TEST_CASE("training is bit-reproducible under a fixed seed") {
  const Dataset data = synth_generate(small_synth(), 2);
  TeacherTrainConfig tc = small_train_config(true);
  tc.dp.steps = 40;
  tc.dp.seed = 17;
  const TrainResult a = train_teacher(data, tc);
  const TrainResult b = train_teacher(data, tc);
  CHECK(max_abs_diff(a.params.tensors, b.params.tensors) == 0.0);
  REQUIRE(a.log.size() == b.log.size());
  for (std::size_t i = 0; i < a.log.size(); ++i) {
    CHECK(a.log[i].loss == b.log[i].loss);
    CHECK(a.log[i].probe_acc == b.log[i].probe_acc);
    CHECK(a.log[i].epsilon == b.log[i].epsilon);
  }
  TeacherTrainConfig other = tc;
  other.dp.seed = 18;
  const TrainResult c = train_teacher(data, other);
  CHECK(max_abs_diff(a.params.tensors, c.params.tensors) > 0.0);
}

TEST_CASE("non-private full-batch run matches a plain gradient-descent reference") {
  SynthSpec spec = small_synth(40);
  const Dataset data = synth_generate(spec, 3);

  TeacherTrainConfig tc = small_train_config(false);
  tc.dp.q = 1.0;
  tc.dp.sigma = 0.0;
  tc.dp.clip = 1e9;
  tc.dp.optimizer.kind = OptimizerKind::sgd;
  tc.dp.optimizer.lr = 0.05;
  tc.awdp.enabled = false;
  tc.dropout_p = 0.0;
  tc.front_end.normalize = false;

  // Independent reference: full-batch mean gradient descent.
  ModelParams ref = init_params(tc.model, tc.dp.seed);
  std::vector<FeatureMatrix> features;
  for (const Example& e : data.examples) features.push_back(fix_len(e.features, 8));

  for (long s = 1; s <= 5; ++s) {
    NamedTensors mean = zeros_like(ref.tensors);
    for (std::size_t i = 0; i < data.size(); ++i) {
      const PerExampleGrad g =
          per_example_grad(ref, features[i], nullptr, data.examples[i].label, 1.0);
      add_in_place(mean, g.tensors);
    }
    scale_in_place(mean, 1.0 / static_cast<double>(data.size()));
    for (auto& [name, t] : ref.tensors) {
      const Tensor& g = mean.at(name);
      for (std::size_t i = 0; i < t.data.size(); ++i)
        t.data[i] -= tc.dp.optimizer.lr * g.data[i];
    }

    TeacherTrainConfig upto = tc;
    upto.dp.steps = s;
    const TrainResult r = train_teacher(data, upto);
    CHECK(max_abs_diff(r.params.tensors, ref.tensors) <= 1e-6);
  }
}

TEST_CASE("reweighting disabled is byte-identical to unit weights") {
  const Dataset data = synth_generate(small_synth(), 4);
  TeacherTrainConfig off = small_train_config(true);
  off.dp.steps = 30;
  off.awdp.enabled = false;

  TeacherTrainConfig unit = off;
  unit.awdp.enabled = true;
  unit.awdp.w_min = 1.0;
  unit.awdp.w_max = 1.0;  // clamp everything to exactly 1

  const TrainResult a = train_teacher(data, off);
  const TrainResult b = train_teacher(data, unit);
  CHECK(max_abs_diff(a.params.tensors, b.params.tensors) == 0.0);
}

TEST_CASE("ledger depends only on (q, sigma, steps, delta)") {
  const Dataset data = synth_generate(small_synth(), 5);
  TeacherTrainConfig base = small_train_config(true);
  base.dp.steps = 25;

  TeacherTrainConfig variant = base;
  variant.awdp.enabled = !base.awdp.enabled;
  variant.front_end.normalize = !base.front_end.normalize;
  variant.dropout_p = 0.9;

  const TrainResult a = train_teacher(data, base);
  const TrainResult b = train_teacher(data, variant);
  REQUIRE(a.ledger.rdp_per_step.size() == b.ledger.rdp_per_step.size());
  for (std::size_t i = 0; i < a.ledger.rdp_per_step.size(); ++i)
    CHECK(a.ledger.rdp_per_step[i] == b.ledger.rdp_per_step[i]);
  CHECK(a.ledger.steps == b.ledger.steps);
  CHECK(a.ledger.q == b.ledger.q);
  CHECK(a.ledger.sigma == b.ledger.sigma);
  CHECK(a.ledger.delta == b.ledger.delta);
  CHECK(to_epsilon(a.ledger).epsilon == to_epsilon(b.ledger).epsilon);
}

TEST_CASE("in-loop clipping check reports no violations") {
  const Dataset data = synth_generate(small_synth(), 6);
  for (double clip : {0.01, 1.0, 100.0}) {
    TeacherTrainConfig tc = small_train_config(true);
    tc.dp.steps = 30;
    tc.dp.clip = clip;
    tc.dp.check_clipping = true;
    const TrainResult r = train_teacher(data, tc);
    CHECK(r.clip_violations == 0);
  }
}

TEST_CASE("empty batches advance the ledger without an update") {
  const Dataset data = synth_generate(small_synth(20), 7);
  TeacherTrainConfig tc = small_train_config(true);
  tc.dp.q = 1e-9;  // batches will be empty
  tc.dp.steps = 10;
  const TrainResult r = train_teacher(data, tc);
  const ModelParams init = init_params(tc.model, tc.dp.seed);
  CHECK(max_abs_diff(r.params.tensors, init.tensors) == 0.0);
  CHECK(r.ledger.steps == 10);
  CHECK(to_epsilon(r.ledger).epsilon > 0.0);
}
