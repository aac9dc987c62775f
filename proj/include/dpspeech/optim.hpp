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

#include <string>

#include "dpspeech/tensor.hpp"

namespace dpspeech {

enum class OptimizerKind { sgd, adamw };

OptimizerKind optimizer_from_string(const std::string& s);
std::string to_string(OptimizerKind k);

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::adamw;
  double lr = 1e-3;
  double weight_decay = 1e-4;  // decoupled; adamw only
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct OptimizerState {
  NamedTensors first_moment;
  NamedTensors second_moment;
  long step = 0;
};

// sgd:   theta -= lr * grad
// adamw: bias-corrected moment update on grad, then the decoupled decay
//        theta -= lr * weight_decay * theta.
void optimizer_step(NamedTensors& params, const NamedTensors& grad, OptimizerState& state,
                    const OptimizerConfig& cfg);

}  // namespace dpspeech
