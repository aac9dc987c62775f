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

#include <algorithm>
#include <numeric>
#include <vector>

#include "dpspeech/error.hpp"
#include "dpspeech/metrics.hpp"
#include "dpspeech/rng.hpp"

using namespace dpspeech;

namespace {

// Brute-force oracle: direct counting loops, no shared code with evaluate().
struct OracleReport {
  double macro_f1, bal_acc, maj_pred, overall_acc;
};

OracleReport oracle_evaluate(const std::vector<int>& preds, const std::vector<int>& labels,
                             int classes) {
  OracleReport o{0, 0, 0, 0};
  const double n = static_cast<double>(preds.size());
  std::size_t correct = 0;
  for (std::size_t i = 0; i < preds.size(); ++i)
    if (preds[i] == labels[i]) ++correct;
  o.overall_acc = correct / n;

  std::size_t top = 0;
  for (int k = 0; k < classes; ++k) {
    std::size_t c = 0;
    for (int p : preds)
      if (p == k) ++c;
    top = std::max(top, c);
  }
  o.maj_pred = top / n;

  for (int k = 0; k < classes; ++k) {
    std::size_t tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < preds.size(); ++i) {
      if (preds[i] == k && labels[i] == k) ++tp;
      if (preds[i] == k && labels[i] != k) ++fp;
      if (preds[i] != k && labels[i] == k) ++fn;
    }
    const double recall = (tp + fn) == 0 ? 0.0 : double(tp) / double(tp + fn);
    const double precision = (tp + fp) == 0 ? 0.0 : double(tp) / double(tp + fp);
    const double f1 = (precision + recall) == 0.0 ? 0.0 : 2 * precision * recall / (precision + recall);
    o.bal_acc += recall / classes;
    o.macro_f1 += f1 / classes;
  }
  return o;
}

}  // namespace

TEST_CASE("hand-computed example") {
  const std::vector<int> preds = {0, 0, 1, 2};
  const std::vector<int> labels = {0, 1, 1, 2};
  const EvalReport r = evaluate(preds, labels, 3);
  CHECK(r.recall[0] == doctest::Approx(1.0));
  CHECK(r.recall[1] == doctest::Approx(0.5));
  CHECK(r.recall[2] == doctest::Approx(1.0));
  CHECK(r.bal_acc == doctest::Approx(2.5 / 3.0));
  CHECK(r.precision[0] == doctest::Approx(0.5));
  CHECK(r.precision[1] == doctest::Approx(1.0));
  CHECK(r.precision[2] == doctest::Approx(1.0));
  CHECK(r.f1[0] == doctest::Approx(2.0 / 3.0));
  CHECK(r.f1[1] == doctest::Approx(2.0 / 3.0));
  CHECK(r.f1[2] == doctest::Approx(1.0));
  CHECK(r.macro_f1 == doctest::Approx((2.0 / 3.0 + 2.0 / 3.0 + 1.0) / 3.0));
  CHECK(r.maj_pred == doctest::Approx(0.5));
}

TEST_CASE("single-class predictor collapses exactly") {
  const std::vector<int> preds(90, 0);
  std::vector<int> labels;
  for (int i = 0; i < 90; ++i) labels.push_back(i % 3);
  const EvalReport r = evaluate(preds, labels, 3);
  CHECK(r.bal_acc == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  CHECK(r.maj_pred == 1.0);
  CHECK(r.collapse_flag);
}

TEST_CASE("perfect predictions") {
  const std::vector<int> labels = {0, 0, 0, 1, 1, 2};
  const EvalReport r = evaluate(labels, labels, 3);
  CHECK(r.macro_f1 == doctest::Approx(1.0));
  CHECK(r.bal_acc == doctest::Approx(1.0));
  CHECK(r.maj_pred == doctest::Approx(0.5));  // the largest class share
  CHECK(!r.collapse_flag);
}

TEST_CASE("matches the brute-force oracle on random instances") {
  CounterRng rng(7, RngStream::synth);
  for (int iter = 0; iter < 1000; ++iter) {
    const int classes = 2 + static_cast<int>(rng.next_below(4));  // K in 2..5
    const std::size_t n = 1 + rng.next_below(40);
    std::vector<int> preds(n), labels(n);
    for (std::size_t i = 0; i < n; ++i) {
      preds[i] = static_cast<int>(rng.next_below(classes));
      labels[i] = static_cast<int>(rng.next_below(classes));
    }
    const EvalReport r = evaluate(preds, labels, classes);
    const OracleReport o = oracle_evaluate(preds, labels, classes);
    CHECK(r.macro_f1 == doctest::Approx(o.macro_f1).epsilon(1e-12));
    CHECK(r.bal_acc == doctest::Approx(o.bal_acc).epsilon(1e-12));
    CHECK(r.maj_pred == doctest::Approx(o.maj_pred).epsilon(1e-12));
    CHECK(r.overall_acc == doctest::Approx(o.overall_acc).epsilon(1e-12));

    // Range invariants.
    CHECK(r.maj_pred >= 1.0 / classes - 1e-12);
    CHECK(r.maj_pred <= 1.0 + 1e-12);
    CHECK(r.bal_acc >= 0.0);
    CHECK(r.bal_acc <= 1.0 + 1e-12);
    CHECK(r.macro_f1 <= 1.0 + 1e-12);
  }
}

TEST_CASE("permutation of pairs leaves the report unchanged") {
  CounterRng rng(11, RngStream::synth);
  std::vector<int> preds(50), labels(50);
  for (std::size_t i = 0; i < 50; ++i) {
    preds[i] = static_cast<int>(rng.next_below(3));
    labels[i] = static_cast<int>(rng.next_below(3));
  }
  const EvalReport a = evaluate(preds, labels, 3);
  std::vector<std::size_t> order(50);
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t i = 50; i > 1; --i) std::swap(order[i - 1], order[rng.next_below(i)]);
  std::vector<int> p2(50), l2(50);
  for (std::size_t i = 0; i < 50; ++i) {
    p2[i] = preds[order[i]];
    l2[i] = labels[order[i]];
  }
  const EvalReport b = evaluate(p2, l2, 3);
  CHECK(a.macro_f1 == b.macro_f1);
  CHECK(a.bal_acc == b.bal_acc);
  CHECK(a.maj_pred == b.maj_pred);
  CHECK(a.confusion == b.confusion);
}

TEST_CASE("class relabeling permutes per-class entries, macro aggregates unchanged") {
  CounterRng rng(13, RngStream::synth);
  std::vector<int> preds(60), labels(60);
  for (std::size_t i = 0; i < 60; ++i) {
    preds[i] = static_cast<int>(rng.next_below(3));
    labels[i] = static_cast<int>(rng.next_below(3));
  }
  const int perm[3] = {2, 0, 1};
  std::vector<int> p2(60), l2(60);
  for (std::size_t i = 0; i < 60; ++i) {
    p2[i] = perm[preds[i]];
    l2[i] = perm[labels[i]];
  }
  const EvalReport a = evaluate(preds, labels, 3);
  const EvalReport b = evaluate(p2, l2, 3);
  CHECK(a.macro_f1 == doctest::Approx(b.macro_f1).epsilon(1e-14));
  CHECK(a.bal_acc == doctest::Approx(b.bal_acc).epsilon(1e-14));
  CHECK(a.maj_pred == b.maj_pred);
  for (int k = 0; k < 3; ++k) {
    CHECK(a.recall[k] == doctest::Approx(b.recall[perm[k]]).epsilon(1e-14));
    CHECK(a.precision[k] == doctest::Approx(b.precision[perm[k]]).epsilon(1e-14));
  }
}

TEST_CASE("argmax tie-breaking picks the lowest index") {
  CHECK(argmax_pred(std::vector<double>{0.2, 0.5, 0.3}) == 1);
  CHECK(argmax_pred(std::vector<double>{0.5, 0.5, 0.0}) == 0);
  CHECK(argmax_pred(std::vector<double>{1.0 / 3, 1.0 / 3, 1.0 / 3}) == 0);
}

TEST_CASE("error paths") {
  CHECK_THROWS_AS(evaluate(std::vector<int>{}, std::vector<int>{}, 3), Error);
  CHECK_THROWS_AS(evaluate(std::vector<int>{0}, std::vector<int>{0, 1}, 3), Error);
  CHECK_THROWS_AS(evaluate(std::vector<int>{5}, std::vector<int>{0}, 3), Error);
}
