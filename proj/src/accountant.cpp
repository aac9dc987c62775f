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

#include "dpspeech/accountant.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include "dpspeech/error.hpp"

namespace dpspeech {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// log(exp(a) + exp(b)) without overflow.
double log_add(double a, double b) {
  if (a == -kInf) return b;
  if (b == -kInf) return a;
  const double hi = std::max(a, b);
  const double lo = std::min(a, b);
  return hi + std::log1p(std::exp(lo - hi));
}

// log(exp(a) - exp(b)); requires a >= b.
double log_sub(double a, double b) {
  if (b == -kInf) return a;
  if (a == b) return -kInf;
  if (a < b) throw Error("accountant", "log_sub of a negative quantity");
  return a + std::log1p(-std::exp(b - a));
}

// log(erfc(x)), using the asymptotic tail expansion once erfc underflows.
double log_erfc(double x) {
  const double r = std::erfc(x);
  if (r > 0.0) return std::log(r);
  const double x2 = x * x;
  return -0.5 * std::log(M_PI) - std::log(x) - x2 - 0.5 / x2 + 0.625 / (x2 * x2) -
         37.0 / 24.0 / (x2 * x2 * x2) + 353.0 / 64.0 / (x2 * x2 * x2 * x2);
}

// Integer-order log A(alpha): binomial sum in log space, with the log
// binomial coefficient built incrementally.
double log_a_int(double q, double sigma, long alpha) {
  const double log_q = std::log(q);
  const double log_1mq = std::log1p(-q);
  const double inv_2s2 = 1.0 / (2.0 * sigma * sigma);
  double log_binom = 0.0;
  double acc = -kInf;
  for (long k = 0; k <= alpha; ++k) {
    if (k > 0) {
      log_binom += std::log(static_cast<double>(alpha - k + 1)) - std::log(static_cast<double>(k));
    }
    const double term = log_binom + static_cast<double>(k) * log_q +
                        static_cast<double>(alpha - k) * log_1mq +
                        static_cast<double>(k * k - k) * inv_2s2;
    acc = log_add(acc, term);
  }
  return acc;
}

// Fractional-order log A(alpha): the two-sided series with signed
// non-integer binomial coefficients, truncated when both current terms are
// negligible.
double log_a_frac(double q, double sigma, double alpha) {
  const double z0 = sigma * sigma * std::log(1.0 / q - 1.0) + 0.5;
  const double log_q = std::log(q);
  const double log_1mq = std::log1p(-q);
  const double inv_2s2 = 1.0 / (2.0 * sigma * sigma);
  const double sqrt2s = std::sqrt(2.0) * sigma;

  double log_a0 = -kInf;
  double log_a1 = -kInf;
  double log_abs_binom = 0.0;  // log |C(alpha, i)|
  double sign = 1.0;
  for (long i = 0;; ++i) {
    if (i > 0) {
      const double f = alpha - static_cast<double>(i) + 1.0;
      log_abs_binom += std::log(std::abs(f)) - std::log(static_cast<double>(i));
      if (f < 0.0) sign = -sign;
    }
    const double di = static_cast<double>(i);
    const double dj = alpha - di;
    const double log_t0 = log_abs_binom + di * log_q + dj * log_1mq;
    const double log_t1 = log_abs_binom + dj * log_q + di * log_1mq;
    const double log_e0 = std::log(0.5) + log_erfc((di - z0) / sqrt2s);
    const double log_e1 = std::log(0.5) + log_erfc((z0 - dj) / sqrt2s);
    const double log_s0 = log_t0 + (di * di - di) * inv_2s2 + log_e0;
    const double log_s1 = log_t1 + (dj * dj - dj) * inv_2s2 + log_e1;
    if (sign > 0.0) {
      log_a0 = log_add(log_a0, log_s0);
      log_a1 = log_add(log_a1, log_s1);
    } else {
      log_a0 = log_sub(log_a0, log_s0);
      log_a1 = log_sub(log_a1, log_s1);
    }
    if (std::max(log_s0, log_s1) < -30.0 && di > alpha) break;
    if (i > 10000) throw Error("accountant", "fractional RDP series failed to converge");
  }
  return log_add(log_a0, log_a1);
}

}  // namespace

std::vector<double> default_alpha_grid() {
  std::vector<double> grid;
  grid.reserve(99 + 52);
  for (int x = 1; x <= 99; ++x) grid.push_back(1.0 + x / 10.0);
  for (int a = 12; a <= 63; ++a) grid.push_back(static_cast<double>(a));
  return grid;
}

double rdp_subsampled_gaussian(double q, double sigma, double alpha) {
  if (!(alpha > 1.0)) throw Error("accountant", "alpha must exceed 1");
  if (q < 0.0 || q > 1.0) throw Error("accountant", "q must lie in (0,1]");
  if (sigma < 0.0) throw Error("accountant", "sigma must be nonnegative");
  if (sigma == 0.0) return kInf;
  if (q == 0.0) return 0.0;
  if (q == 1.0) return alpha / (2.0 * sigma * sigma);

  const double rounded = std::round(alpha);
  double log_a;
  if (std::abs(alpha - rounded) < 1e-9) {
    log_a = log_a_int(q, sigma, static_cast<long>(rounded));
  } else {
    log_a = log_a_frac(q, sigma, alpha);
  }
  return std::max(0.0, log_a / (alpha - 1.0));
}

PrivacyLedger make_ledger(double q, double sigma, double delta) {
  return make_ledger(q, sigma, delta, default_alpha_grid());
}

PrivacyLedger make_ledger(double q, double sigma, double delta, std::vector<double> alpha_grid) {
  if (!(delta > 0.0 && delta < 1.0)) throw Error("accountant", "delta must lie in (0,1)");
  if (alpha_grid.empty()) throw Error("accountant", "alpha grid is empty");
  PrivacyLedger ledger;
  ledger.q = q;
  ledger.sigma = sigma;
  ledger.delta = delta;
  ledger.alpha_grid = std::move(alpha_grid);
  ledger.rdp_per_step.reserve(ledger.alpha_grid.size());
  for (double a : ledger.alpha_grid) {
    ledger.rdp_per_step.push_back(sigma == 0.0 ? kInf : rdp_subsampled_gaussian(q, sigma, a));
  }
  return ledger;
}

std::vector<double> compose(std::span<const double> rdp_per_step, long steps) {
  if (steps < 0) throw Error("accountant", "steps must be nonnegative");
  std::vector<double> out(rdp_per_step.begin(), rdp_per_step.end());
  for (double& v : out) v *= static_cast<double>(steps);
  return out;
}

EpsilonResult to_epsilon(const PrivacyLedger& ledger) {
  if (ledger.alpha_grid.empty()) throw Error("accountant", "alpha grid is empty");
  if (ledger.non_private()) return {kInf, 0.0};
  if (ledger.steps == 0) return {0.0, ledger.alpha_grid.front()};

  const std::vector<double> total = compose(ledger.rdp_per_step, ledger.steps);
  double best_eps = kInf;
  double best_alpha = ledger.alpha_grid.front();
  for (std::size_t i = 0; i < ledger.alpha_grid.size(); ++i) {
    const double a = ledger.alpha_grid[i];
    const double eps = total[i] + std::log((a - 1.0) / a) -
                       (std::log(ledger.delta) + std::log(a)) / (a - 1.0);
    if (eps < best_eps) {
      best_eps = eps;
      best_alpha = a;
    }
  }
  return {std::max(0.0, best_eps), best_alpha};
}

std::vector<double> epsilon_curve(double q, double sigma, double delta,
                                  long steps_per_epoch, int epochs) {
  PrivacyLedger ledger = make_ledger(q, sigma, delta);
  std::vector<double> curve;
  curve.reserve(static_cast<std::size_t>(epochs) + 1);
  for (int e = 0; e <= epochs; ++e) {
    ledger.steps = steps_per_epoch * e;
    curve.push_back(to_epsilon(ledger).epsilon);
  }
  return curve;
}

void save_ledger(const std::filesystem::path& path, const PrivacyLedger& ledger) {
  std::ofstream out(path);
  if (!out) throw Error("io", "cannot write ledger file " + path.string());
  const EpsilonResult r = to_epsilon(ledger);
  out.precision(17);
  out << "q=" << ledger.q << "\n";
  out << "sigma=" << ledger.sigma << "\n";
  out << "steps=" << ledger.steps << "\n";
  out << "delta=" << ledger.delta << "\n";
  if (ledger.non_private()) {
    out << "epsilon=inf\n";
    out << "note=non-private (sigma=0)\n";
  } else {
    out << "epsilon=" << r.epsilon << "\n";
    out << "best_alpha=" << r.best_alpha << "\n";
  }
}

}  // namespace dpspeech
