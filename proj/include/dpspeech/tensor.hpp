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

#include <cstddef>
#include <map>
#include <string>
#include <vector>

namespace dpspeech {

// Dense row-major tensor. Model parameters and gradients are small enough
// that a flat std::vector<double> per tensor is all we need.
struct Tensor {
  std::vector<std::size_t> dims;
  std::vector<double> data;

  static Tensor zeros(std::vector<std::size_t> dims);
  std::size_t size() const { return data.size(); }
};

// std::map keys iterate in lexicographic name order; parameter
// initialization and noise draws rely on that fixed traversal order.
using NamedTensors = std::map<std::string, Tensor>;

NamedTensors zeros_like(const NamedTensors& ref);
void add_in_place(NamedTensors& dst, const NamedTensors& src);
void scale_in_place(NamedTensors& t, double factor);
double squared_l2_norm(const NamedTensors& t);
std::size_t total_size(const NamedTensors& t);
bool all_finite(const NamedTensors& t);
// Largest |a-b| over all entries; tensors must share structure.
double max_abs_diff(const NamedTensors& a, const NamedTensors& b);

}  // namespace dpspeech
