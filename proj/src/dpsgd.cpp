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

#include "dpspeech/dpsgd.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <thread>

#include "dpspeech/error.hpp"
#include "dpspeech/metrics.hpp"

namespace dpspeech {

namespace {

// Work is split into fixed-size blocks claimed off an atomic counter, so
// results never depend on the number of worker threads.
template <typename Fn>
void run_blocks(std::size_t blocks, Fn&& fn) {
  const unsigned workers =
      std::min<std::size_t>(std::max(1u, std::thread::hardware_concurrency()), blocks);
  if (workers <= 1) {
    for (std::size_t b = 0; b < blocks; ++b) fn(b);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t b = next.fetch_add(1); b < blocks; b = next.fetch_add(1)) fn(b);
    });
  }
  for (std::thread& t : pool) t.join();
}

}  // namespace

std::vector<double> awdp_weights(const std::vector<int>& batch_labels, int classes,
                                 const AwdpConfig& cfg) {
  if (batch_labels.empty()) throw Error("dpsgd", "batch must be nonempty");
  if (!(cfg.w_min <= 1.0 && 1.0 <= cfg.w_max))
    throw Error("config", "weight bounds must bracket 1");
  std::vector<std::size_t> counts(classes, 0);
  for (int y : batch_labels) {
    if (y < 0 || y >= classes) throw Error("dpsgd", "label out of range");
    counts[y]++;
  }
  std::vector<double> weights(classes, 1.0);
  if (!cfg.enabled) return weights;
  const double batch = static_cast<double>(batch_labels.size());
  for (int k = 0; k < classes; ++k) {
    if (counts[k] == 0) continue;  // absent classes keep weight 1
    const double w = batch / (static_cast<double>(classes) * counts[k] + cfg.eps_w);
    weights[k] = std::clamp(w, cfg.w_min, cfg.w_max);
  }
  return weights;
}

void clip_grad(PerExampleGrad& grad, double clip) {
  if (!(clip > 0.0)) throw Error("config", "clip threshold must be positive");
  if (grad.l2_norm <= clip || grad.l2_norm == 0.0) return;
  const double scale = clip / grad.l2_norm;
  scale_in_place(grad.tensors, scale);
  grad.l2_norm = clip;
}

NamedTensors privatize_sum(NamedTensors sum_of_clipped, std::size_t batch_size, double clip,
                           double sigma, std::uint64_t noise_key, std::uint64_t step) {
  if (batch_size == 0) throw Error("dpsgd", "batch size used as divisor must be positive");
  if (sigma > 0.0) {
    const double noise_std = sigma * clip;
    const std::size_t total = total_size(sum_of_clipped);
    const std::size_t pairs = (total + 1) / 2;

    // Draw addressed by (step, pair index): independent of threading.
    std::vector<double> noise(total);
    constexpr std::size_t kPairBlock = 1 << 15;
    const std::size_t blocks = (pairs + kPairBlock - 1) / kPairBlock;
    run_blocks(blocks, [&](std::size_t b) {
      const std::size_t begin = b * kPairBlock;
      const std::size_t end = std::min(begin + kPairBlock, pairs);
      for (std::size_t p = begin; p < end; ++p) {
        const auto [z0, z1] = keyed_gaussian_pair(noise_key, (step << 32) ^ p);
        noise[2 * p] = z0;
        if (2 * p + 1 < total) noise[2 * p + 1] = z1;
      }
    });

    std::size_t coord = 0;
    for (auto& [name, tensor] : sum_of_clipped) {
      (void)name;
      for (double& v : tensor.data) v += noise_std * noise[coord++];
    }
  }
  scale_in_place(sum_of_clipped, 1.0 / static_cast<double>(batch_size));
  return sum_of_clipped;
}

NamedTensors privatize(const std::vector<PerExampleGrad>& clipped_grads,
                       std::size_t batch_size, double clip, double sigma,
                       std::uint64_t noise_key, std::uint64_t step) {
  if (batch_size == 0) throw Error("dpsgd", "batch size used as divisor must be positive");
  NamedTensors sum;
  if (!clipped_grads.empty()) {
    sum = zeros_like(clipped_grads.front().tensors);
    for (const PerExampleGrad& g : clipped_grads) add_in_place(sum, g.tensors);
  }
  if (sum.empty())
    throw Error("dpsgd", "privatize needs at least one gradient to shape the output");
  return privatize_sum(std::move(sum), batch_size, clip, sigma, noise_key, step);
}

void apply_update(TrainState& state, const NamedTensors& update, const DpConfig& cfg) {
  if (!all_finite(update))
    throw Error("non_finite_update", "non-finite entries in the privatized update");
  optimizer_step(state.params.tensors, update, state.optimizer, cfg.optimizer);
  ++state.step;
}

long steps_per_epoch(double q) { return static_cast<long>(std::ceil(1.0 / q)); }

namespace {

// The probe subset is the first min(probe_size, n) examples; accuracy on it
// stands in for full-train accuracy in the log.
double probe_accuracy(const ModelParams& params, const Dataset& data,
                      const std::vector<FeatureMatrix>& features, std::size_t probe_size) {
  const std::size_t n = std::min(probe_size, data.size());
  if (n == 0) return 0.0;
  const std::vector<double> zero_m(params.cfg.multimodal() ? params.cfg.priv_dim : 0, 0.0);
  std::size_t correct = 0;
  ForwardCache cache;
  for (std::size_t i = 0; i < n; ++i) {
    const std::vector<double>* m = params.cfg.multimodal() ? &zero_m : nullptr;
    forward_cached(params, features[i], m, cache);
    if (argmax_pred(cache.probs) == data.examples[i].label) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(n);
}

}  // namespace

TrainResult train_teacher(const Dataset& data, const TeacherTrainConfig& cfg) {
  if (data.size() == 0) throw Error("dpsgd", "training data is empty");
  const ModelConfig& mc = cfg.model;
  if (mc.multimodal() && data.privileged_dim() != mc.priv_dim)
    throw Error("shape_mismatch", "dataset privileged dimension does not match the model");

  // Deterministic per-example front end, applied once up front.
  std::vector<FeatureMatrix> features;
  features.reserve(data.size());
  for (const Example& e : data.examples)
    features.push_back(apply_front_end(e.features, cfg.front_end));

  TrainState state;
  state.params = init_params(mc, cfg.dp.seed);
  state.ledger = make_ledger(cfg.dp.q, cfg.dp.sigma, cfg.dp.delta);

  const std::uint64_t sample_key = stream_key(cfg.dp.seed, RngStream::poisson_sample);
  const std::uint64_t dropout_key = stream_key(cfg.dp.seed, RngStream::priv_dropout);
  const std::uint64_t noise_key = stream_key(cfg.dp.seed, RngStream::dp_noise);

  const long log_every = steps_per_epoch(cfg.dp.q);
  TrainResult result;
  result.ledger = state.ledger;

  NamedTensors sum = zeros_like(state.params.tensors);
  constexpr std::size_t kChunk = 8;  // examples per work unit
  std::vector<NamedTensors> chunk_sums;
  std::vector<double> chunk_loss;
  std::atomic<long> clip_violations{0};
  double epoch_loss = 0.0;
  std::size_t epoch_examples = 0;

  for (long step = 1; step <= cfg.dp.steps; ++step) {
    // Poisson batch: index i joins iff its keyed uniform falls below q.
    std::vector<std::size_t> batch;
    for (std::size_t i = 0; i < data.size(); ++i) {
      if (keyed_unit(sample_key, (static_cast<std::uint64_t>(step) << 32) ^ i) < cfg.dp.q)
        batch.push_back(i);
    }

    state.ledger.steps = step;  // the sampling event happened even if empty
    if (!batch.empty()) {
      std::vector<int> labels;
      labels.reserve(batch.size());
      for (std::size_t i : batch) labels.push_back(data.examples[i].label);
      const std::vector<double> weights = awdp_weights(labels, data.classes, cfg.awdp);

      // Per-example gradients over fixed chunks; chunk results reduce in
      // index order so the outcome is identical for any thread count.
      const std::size_t n_chunks = (batch.size() + kChunk - 1) / kChunk;
      while (chunk_sums.size() < n_chunks) chunk_sums.push_back(zeros_like(sum));
      chunk_loss.assign(n_chunks, 0.0);
      const std::vector<double> zero_priv(mc.multimodal() ? mc.priv_dim : 0, 0.0);
      run_blocks(n_chunks, [&](std::size_t c) {
        ForwardCache cache;
        PerExampleGrad grad;
        NamedTensors& local = chunk_sums[c];
        for (auto& [name, tensor] : local) {
          (void)name;
          std::fill(tensor.data.begin(), tensor.data.end(), 0.0);
        }
        const std::size_t begin = c * kChunk;
        const std::size_t end = std::min(begin + kChunk, batch.size());
        for (std::size_t bi = begin; bi < end; ++bi) {
          const std::size_t i = batch[bi];
          const Example& e = data.examples[i];
          const std::vector<double>* m = nullptr;
          if (mc.multimodal()) {
            const bool drop =
                cfg.dropout_p > 0.0 &&
                keyed_unit(dropout_key, (static_cast<std::uint64_t>(step) << 32) ^ i) <
                    cfg.dropout_p;
            m = drop ? &zero_priv : &*e.privileged;
          }
          const double w = weights[e.label];
          per_example_grad_into(state.params, features[i], m, e.label, w, cache, grad);
          chunk_loss[c] += weighted_ce_loss(cache.probs, e.label, w);
          clip_grad(grad, cfg.dp.clip);
          if (cfg.dp.check_clipping &&
              std::sqrt(squared_l2_norm(grad.tensors)) > cfg.dp.clip + 1e-9) {
            clip_violations.fetch_add(1);
          }
          add_in_place(local, grad.tensors);
        }
      });
      for (auto& [name, tensor] : sum) {
        (void)name;
        std::fill(tensor.data.begin(), tensor.data.end(), 0.0);
      }
      for (std::size_t c = 0; c < n_chunks; ++c) {
        add_in_place(sum, chunk_sums[c]);
        epoch_loss += chunk_loss[c];
      }
      epoch_examples += batch.size();

      NamedTensors update = privatize_sum(std::move(sum), batch.size(), cfg.dp.clip,
                                          cfg.dp.sigma, noise_key,
                                          static_cast<std::uint64_t>(step));
      apply_update(state, update, cfg.dp);
      sum = std::move(update);  // reuse the buffer next step
    } else {
      ++state.step;  // the step still advances with the ledger
    }

    if (step % log_every == 0 || step == cfg.dp.steps) {
      TrainLogRow row;
      row.step = step;
      row.epoch = static_cast<int>((step + log_every - 1) / log_every);
      row.loss = epoch_examples == 0 ? 0.0 : epoch_loss / static_cast<double>(epoch_examples);
      row.probe_acc = probe_accuracy(state.params, data, features, cfg.probe_size);
      row.epsilon = to_epsilon(state.ledger).epsilon;
      result.log.push_back(row);
      epoch_loss = 0.0;
      epoch_examples = 0;
      if (!cfg.checkpoint_dir.empty()) {
        save_checkpoint(cfg.checkpoint_dir / ("epoch" + std::to_string(row.epoch) + ".dpm"),
                        state.params);
      }
      if (step % log_every != 0 && step == cfg.dp.steps) break;
    }
  }

  result.params = std::move(state.params);
  result.ledger = state.ledger;
  result.clip_violations = clip_violations.load();
  return result;
}

void save_train_log(const std::filesystem::path& path, const std::vector<TrainLogRow>& log) {
  std::ofstream out(path);
  if (!out) throw Error("io", "cannot write training log " + path.string());
  out << "step,epoch,loss,probe_acc,epsilon\n";
  out.precision(10);
  for (const TrainLogRow& row : log) {
    out << row.step << ',' << row.epoch << ',' << row.loss << ',' << row.probe_acc << ','
        << row.epsilon << '\n';
  }
}

}  // namespace dpspeech
