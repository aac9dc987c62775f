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

#include "dpspeech/tensor.hpp"

#include <cmath>
#include <cstdlib>

#include "dpspeech/error.hpp"

namespace dpspeech {

Tensor Tensor::zeros(std::vector<std::size_t> dims) {
  std::size_t n = 1;
  for (std::size_t d : dims) n *= d;
  Tensor t;
  t.dims = std::move(dims);
  t.data.assign(n, 0.0);
  return t;
}

NamedTensors zeros_like(const NamedTensors& ref) {
  NamedTensors out;
  for (const auto& [name, t] : ref) {
    out.emplace(name, Tensor::zeros(t.dims));
  }
  return out;
}

void add_in_place(NamedTensors& dst, const NamedTensors& src) {
  if (dst.size() != src.size()) throw Error("shape_mismatch", "tensor map size mismatch");
  auto it = src.begin();
  for (auto& [name, t] : dst) {
    if (it->first != name || it->second.data.size() != t.data.size())
      throw Error("shape_mismatch", "tensor mismatch at " + name);
    const double* s = it->second.data.data();
    double* d = t.data.data();
    for (std::size_t i = 0; i < t.data.size(); ++i) d[i] += s[i];
    ++it;
  }
}

void scale_in_place(NamedTensors& t, double factor) {
  for (auto& [name, tensor] : t) {
    (void)name;
    for (double& v : tensor.data) v *= factor;
  }
}

double squared_l2_norm(const NamedTensors& t) {
  double acc = 0.0;
  for (const auto& [name, tensor] : t) {
    (void)name;
    for (double v : tensor.data) acc += v * v;
  }
  return acc;
}

std::size_t total_size(const NamedTensors& t) {
  std::size_t n = 0;
  for (const auto& [name, tensor] : t) {
    (void)name;
    n += tensor.size();
  }
  return n;
}

bool all_finite(const NamedTensors& t) {
  for (const auto& [name, tensor] : t) {
    (void)name;
    for (double v : tensor.data) {
      if (!std::isfinite(v)) return false;
    }
  }
  return true;
}

double max_abs_diff(const NamedTensors& a, const NamedTensors& b) {
  if (a.size() != b.size()) throw Error("shape_mismatch", "tensor map size mismatch");
  double m = 0.0;
  auto ib = b.begin();
  for (const auto& [name, ta] : a) {
    if (ib->first != name || ib->second.data.size() != ta.data.size())
      throw Error("shape_mismatch", "tensor mismatch at " + name);
    for (std::size_t i = 0; i < ta.data.size(); ++i) {
      const double d = std::abs(ta.data[i] - ib->second.data[i]);
      if (d > m) m = d;
    }
    ++ib;
  }
  return m;
}

}  // namespace dpspeech
