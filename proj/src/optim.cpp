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

#include "dpspeech/optim.hpp"

#include <cmath>

#include "dpspeech/error.hpp"

namespace dpspeech {

OptimizerKind optimizer_from_string(const std::string& s) {
  if (s == "sgd") return OptimizerKind::sgd;
  if (s == "adamw") return OptimizerKind::adamw;
  throw Error("config", "unknown optimizer " + s);
}

std::string to_string(OptimizerKind k) { return k == OptimizerKind::sgd ? "sgd" : "adamw"; }

void optimizer_step(NamedTensors& params, const NamedTensors& grad, OptimizerState& state,
                    const OptimizerConfig& cfg) {
  if (cfg.kind == OptimizerKind::sgd) {
    auto ig = grad.begin();
    for (auto& [name, p] : params) {
      if (ig->first != name || ig->second.data.size() != p.data.size())
        throw Error("shape_mismatch", "gradient does not match parameters at " + name);
      for (std::size_t i = 0; i < p.data.size(); ++i) p.data[i] -= cfg.lr * ig->second.data[i];
      ++ig;
    }
    ++state.step;
    return;
  }

  if (state.first_moment.empty()) {
    state.first_moment = zeros_like(params);
    state.second_moment = zeros_like(params);
  }
  ++state.step;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  auto ig = grad.begin();
  auto im = state.first_moment.begin();
  auto iv = state.second_moment.begin();
  for (auto& [name, p] : params) {
    if (ig->first != name || ig->second.data.size() != p.data.size())
      throw Error("shape_mismatch", "gradient does not match parameters at " + name);
    const double* g = ig->second.data.data();
    double* m = im->second.data.data();
    double* v = iv->second.data.data();
    for (std::size_t i = 0; i < p.data.size(); ++i) {
      m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
      v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
      const double m_hat = m[i] / bc1;
      const double v_hat = v[i] / bc2;
      p.data[i] -= cfg.lr * (m_hat / (std::sqrt(v_hat) + cfg.eps) + cfg.weight_decay * p.data[i]);
    }
    ++ig;
    ++im;
    ++iv;
  }
}

}  // namespace dpspeech
