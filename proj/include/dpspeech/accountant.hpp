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
#include <span>
#include <vector>

namespace dpspeech {

// Renyi-DP accounting for the Poisson-subsampled Gaussian mechanism:
// per-step RDP at a grid of orders, additive composition over steps, and
// conversion to (epsilon, delta).

// Order grid 1.1, 1.2, ..., 10.9 plus integers 12..63.
std::vector<double> default_alpha_grid();

// RDP of one step of the sampled Gaussian mechanism at order alpha.
//   q = 1      -> alpha / (2 sigma^2)
//   integer a  -> (1/(a-1)) log sum_k C(a,k)(1-q)^(a-k) q^k exp((k^2-k)/(2s^2))
//   fractional -> two-sided binomial series over erfc terms, in log space,
//                 truncated once terms fall below a fixed magnitude
// sigma = 0 returns +infinity; q = 0 returns 0.
double rdp_subsampled_gaussian(double q, double sigma, double alpha);

struct PrivacyLedger {
  double q = 0.0;
  double sigma = 0.0;
  double delta = 1e-5;
  long steps = 0;
  std::vector<double> alpha_grid;
  std::vector<double> rdp_per_step;  // aligned with alpha_grid

  bool non_private() const { return sigma == 0.0; }
};

// Precomputes the per-step RDP values; steps starts at 0.
PrivacyLedger make_ledger(double q, double sigma, double delta);
PrivacyLedger make_ledger(double q, double sigma, double delta, std::vector<double> alpha_grid);

// RDP composes additively: per-step values times the step count.
std::vector<double> compose(std::span<const double> rdp_per_step, long steps);

struct EpsilonResult {
  double epsilon = 0.0;
  double best_alpha = 0.0;
};

// min over the grid of RDP(a)*steps + log((a-1)/a) - (log(delta)+log(a))/(a-1),
// floored at 0. sigma = 0 yields +infinity (no DP).
EpsilonResult to_epsilon(const PrivacyLedger& ledger);

// Budget after each of `epochs` blocks of `steps_per_epoch` steps.
std::vector<double> epsilon_curve(double q, double sigma, double delta,
                                  long steps_per_epoch, int epochs);

void save_ledger(const std::filesystem::path& path, const PrivacyLedger& ledger);

}  // namespace dpspeech
