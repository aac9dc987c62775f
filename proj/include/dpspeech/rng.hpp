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

#include <cmath>
#include <cstdint>
#include <numbers>
#include <utility>

namespace dpspeech {

// Counter-based generation (SplitMix64 finalizer over a keyed counter) so
// every draw is a pure function of (seed, stream, counter). This keeps runs
// bit-reproducible across platforms and makes keyed draws order-independent.

inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

// Independent stream tags, one per randomness consumer.
enum class RngStream : std::uint64_t {
  param_init = 1,
  poisson_sample = 2,
  priv_dropout = 3,
  dp_noise = 4,
  synth = 5,
  split_shuffle = 6,
  student_shuffle = 7,
};

inline std::uint64_t stream_key(std::uint64_t seed, RngStream stream) {
  return mix64(seed ^ mix64(static_cast<std::uint64_t>(stream) * 0xA24BAED4963EE407ULL));
}

// u64 at a fixed (key, counter) coordinate.
inline std::uint64_t keyed_u64(std::uint64_t key, std::uint64_t counter) {
  return mix64(key ^ mix64(counter + 0x9E3779B97F4A7C15ULL));
}

// Uniform in [0,1) with 53 random bits.
inline double keyed_unit(std::uint64_t key, std::uint64_t counter) {
  return static_cast<double>(keyed_u64(key, counter) >> 11) * 0x1.0p-53;
}

// Box-Muller pair from the uniforms at (key, 2*pair) and (key, 2*pair+1).
// The first uniform is shifted into (0,1] so log() is always finite.
inline std::pair<double, double> keyed_gaussian_pair(std::uint64_t key, std::uint64_t pair) {
  const double u1 =
      static_cast<double>((keyed_u64(key, 2 * pair) >> 11) + 1) * 0x1.0p-53;
  const double u2 = keyed_unit(key, 2 * pair + 1);
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double theta = 2.0 * std::numbers::pi * u2;
  return {r * std::cos(theta), r * std::sin(theta)};
}

// Sequential stream over the same keyed draws, for consumers where a simple
// ordered stream is the natural contract (shuffles, synthetic data, tests).
class CounterRng {
 public:
  CounterRng(std::uint64_t seed, RngStream stream) : key_(stream_key(seed, stream)) {}

  std::uint64_t next_u64() { return keyed_u64(key_, counter_++); }

  double next_unit() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double next_gaussian() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
    const double u2 = next_unit();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

  // Uniform integer in [0, n) by rejection, n >= 1.
  std::uint64_t next_below(std::uint64_t n) {
    const std::uint64_t limit = n * (UINT64_MAX / n);
    std::uint64_t x = next_u64();
    while (x >= limit) x = next_u64();
    return x % n;
  }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace dpspeech
