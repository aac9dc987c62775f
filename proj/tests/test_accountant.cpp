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
#include <limits>

#include "dpspeech/accountant.hpp"
#include "quadrature_oracle.hpp"

using namespace dpspeech;

TEST_CASE("plain Gaussian limit at q=1") {
  CHECK(rdp_subsampled_gaussian(1.0, 1.0, 2.0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(rdp_subsampled_gaussian(1.0, 2.0, 8.0) == doctest::Approx(1.0).epsilon(1e-12));
  for (double alpha : {1.5, 3.0, 17.0, 63.0}) {
    CHECK(rdp_subsampled_gaussian(1.0, 0.7, alpha) ==
          doctest::Approx(alpha / (2.0 * 0.49)).epsilon(1e-12));
  }
}

TEST_CASE("degenerate rates") {
  CHECK(rdp_subsampled_gaussian(0.0, 1.0, 2.0) == 0.0);
  CHECK(rdp_subsampled_gaussian(0.0, 3.0, 32.5) == 0.0);
  CHECK(rdp_subsampled_gaussian(0.0016, 0.0, 2.0) ==
        std::numeric_limits<double>::infinity());
}

TEST_CASE("integer orders match the quadrature oracle") {
  for (double q : {0.0016, 0.01, 0.1}) {
    for (double sigma : {0.5, 1.0, 3.0}) {
      for (long alpha : {2L, 3L, 8L, 32L, 64L}) {
        const double formula = rdp_subsampled_gaussian(q, sigma, static_cast<double>(alpha));
        const double oracle = dpspeech_test::rdp_quadrature(q, sigma, static_cast<double>(alpha));
        CHECK(formula == doctest::Approx(oracle).epsilon(1e-6));
      }
    }
  }
}

TEST_CASE("fractional orders match the quadrature oracle") {
  for (double q : {0.0016, 0.01, 0.1}) {
    for (double sigma : {0.5, 1.0, 3.0}) {
      for (double alpha : {1.5, 2.5, 7.3, 10.9}) {
        const double formula = rdp_subsampled_gaussian(q, sigma, alpha);
        const double oracle = dpspeech_test::rdp_quadrature(q, sigma, alpha);
        CHECK(formula == doctest::Approx(oracle).epsilon(1e-5));
      }
    }
  }
}

TEST_CASE("composition is element-wise multiplication") {
  PrivacyLedger ledger = make_ledger(0.01, 1.0, 1e-5);
  const auto zero = compose(ledger.rdp_per_step, 0);
  for (double v : zero) CHECK(v == 0.0);

  const auto two = compose(ledger.rdp_per_step, 2);
  for (std::size_t i = 0; i < two.size(); ++i)
    CHECK(two[i] == doctest::Approx(2.0 * ledger.rdp_per_step[i]).epsilon(1e-15));

  // 12500 sequential additions agree with the product.
  const auto composed = compose(ledger.rdp_per_step, 12500);
  for (std::size_t i = 0; i < composed.size(); i += 37) {
    double acc = 0.0;
    for (int s = 0; s < 12500; ++s) acc += ledger.rdp_per_step[i];
    CHECK(std::abs(acc - composed[i]) <= 1e-12 * std::max(1.0, std::abs(acc)));
  }
}

TEST_CASE("default grid shape") {
  const auto grid = default_alpha_grid();
  REQUIRE(grid.size() == 99 + 52);
  CHECK(grid.front() == doctest::Approx(1.1));
  CHECK(grid[98] == doctest::Approx(10.9));
  CHECK(grid[99] == 12.0);
  CHECK(grid.back() == 63.0);
  for (std::size_t i = 1; i < grid.size(); ++i) CHECK(grid[i] > grid[i - 1]);
}

TEST_CASE("epsilon for the reference training configuration") {
  // Regression anchors for (q=0.0016, S=12500, delta=1e-5), cross-validated
  // against the quadrature oracle and the canonical accountant family.
  PrivacyLedger ledger = make_ledger(0.0016, 1.0, 1e-5);
  ledger.steps = 12500;
  const EpsilonResult r = to_epsilon(ledger);
  CHECK(r.epsilon == doctest::Approx(1.0963).epsilon(2e-3));
  CHECK(r.best_alpha == doctest::Approx(12.0));

  ledger = make_ledger(0.0016, 0.5, 1e-5);
  ledger.steps = 12500;
  CHECK(to_epsilon(ledger).epsilon == doctest::Approx(9.4134).epsilon(2e-3));
}

TEST_CASE("epsilon conversion: zero steps and sigma=0 sentinel") {
  PrivacyLedger ledger = make_ledger(0.0016, 1.0, 1e-5);
  ledger.steps = 0;
  CHECK(to_epsilon(ledger).epsilon == 0.0);

  PrivacyLedger off = make_ledger(0.0016, 0.0, 1e-5);
  off.steps = 100;
  CHECK(off.non_private());
  CHECK(std::isinf(to_epsilon(off).epsilon));
}

TEST_CASE("epsilon monotonicity over a parameter grid") {
  const double sigmas[] = {0.6, 1.0, 1.5, 2.5, 4.0};
  const long steps[] = {100, 500, 2000, 8000, 20000};
  const double qs[] = {0.0016, 0.01, 0.05};

  for (double q : qs) {
    for (long s : steps) {
      double prev = std::numeric_limits<double>::infinity();
      for (double sigma : sigmas) {  // nonincreasing in sigma
        PrivacyLedger ledger = make_ledger(q, sigma, 1e-5);
        ledger.steps = s;
        const double eps = to_epsilon(ledger).epsilon;
        CHECK(eps <= prev + 1e-12);
        prev = eps;
      }
    }
  }
  for (double q : qs) {
    for (double sigma : sigmas) {
      PrivacyLedger ledger = make_ledger(q, sigma, 1e-5);
      double prev = 0.0;
      for (long s : steps) {  // nondecreasing in steps
        ledger.steps = s;
        const double eps = to_epsilon(ledger).epsilon;
        CHECK(eps >= prev - 1e-12);
        prev = eps;
      }
    }
  }
  for (double sigma : sigmas) {
    for (long s : steps) {
      double prev = 0.0;
      for (double q : qs) {  // nondecreasing in q
        PrivacyLedger ledger = make_ledger(q, sigma, 1e-5);
        ledger.steps = s;
        const double eps = to_epsilon(ledger).epsilon;
        CHECK(eps >= prev - 1e-12);
        prev = eps;
      }
    }
  }
}

TEST_CASE("conversion candidates stay finite for sigma > 0") {
  PrivacyLedger ledger = make_ledger(0.0016, 0.5, 1e-5);
  ledger.steps = 1;
  const auto total = compose(ledger.rdp_per_step, ledger.steps);
  for (std::size_t i = 0; i < ledger.alpha_grid.size(); ++i) {
    const double a = ledger.alpha_grid[i];
    const double eps =
        total[i] + std::log((a - 1.0) / a) - (std::log(1e-5) + std::log(a)) / (a - 1.0);
    CHECK(std::isfinite(eps));
  }
}

TEST_CASE("epsilon curve is nondecreasing and consistent") {
  const auto curve = epsilon_curve(0.0016, 1.0, 1e-5, 625, 20);
  REQUIRE(curve.size() == 21);
  CHECK(curve[0] == 0.0);
  for (std::size_t i = 1; i < curve.size(); ++i) CHECK(curve[i] >= curve[i - 1]);

  PrivacyLedger ledger = make_ledger(0.0016, 1.0, 1e-5);
  ledger.steps = 12500;
  CHECK(curve.back() == doctest::Approx(to_epsilon(ledger).epsilon).epsilon(1e-12));
}
