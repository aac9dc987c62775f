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

#include "dpspeech/metrics.hpp"

#include <algorithm>
#include <sstream>

#include "dpspeech/error.hpp"

namespace dpspeech {

EvalReport evaluate(std::span<const int> preds, std::span<const int> labels, int classes) {
  if (preds.empty() || preds.size() != labels.size())
    throw Error("metrics", "preds/labels must be nonempty and equal length");
  if (classes < 1) throw Error("metrics", "classes must be positive");

  EvalReport r;
  r.classes = classes;
  r.count = preds.size();
  r.confusion.assign(classes, std::vector<std::size_t>(classes, 0));
  for (std::size_t i = 0; i < preds.size(); ++i) {
    if (preds[i] < 0 || preds[i] >= classes || labels[i] < 0 || labels[i] >= classes)
      throw Error("metrics", "class index out of range");
    r.confusion[labels[i]][preds[i]]++;
  }

  r.precision.assign(classes, 0.0);
  r.recall.assign(classes, 0.0);
  r.f1.assign(classes, 0.0);
  std::size_t correct = 0;
  std::size_t max_pred_count = 0;
  for (int k = 0; k < classes; ++k) {
    const std::size_t tp = r.confusion[k][k];
    std::size_t label_count = 0;
    std::size_t pred_count = 0;
    for (int j = 0; j < classes; ++j) {
      label_count += r.confusion[k][j];
      pred_count += r.confusion[j][k];
    }
    correct += tp;
    max_pred_count = std::max(max_pred_count, pred_count);
    r.recall[k] = label_count == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(label_count);
    r.precision[k] = pred_count == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(pred_count);
    const double pr = r.precision[k] + r.recall[k];
    r.f1[k] = pr == 0.0 ? 0.0 : 2.0 * r.precision[k] * r.recall[k] / pr;
  }

  double f1_sum = 0.0;
  double recall_sum = 0.0;
  for (int k = 0; k < classes; ++k) {
    f1_sum += r.f1[k];
    recall_sum += r.recall[k];
  }
  r.macro_f1 = f1_sum / classes;
  r.bal_acc = recall_sum / classes;
  r.maj_pred = static_cast<double>(max_pred_count) / static_cast<double>(r.count);
  r.overall_acc = static_cast<double>(correct) / static_cast<double>(r.count);
  r.collapse_flag = r.maj_pred >= kCollapseMajPred &&
                    r.bal_acc <= 1.0 / classes + kCollapseBalAccMargin;
  return r;
}

int argmax_pred(std::span<const double> probs) {
  if (probs.empty()) throw Error("metrics", "empty probability vector");
  int best = 0;
  for (int i = 1; i < static_cast<int>(probs.size()); ++i) {
    if (probs[i] > probs[best]) best = i;
  }
  return best;
}

std::string EvalReport::csv_header(const std::string& prefix) {
  return prefix + "macro_f1," + prefix + "bal_acc," + prefix + "maj_pred," + prefix +
         "overall_acc," + prefix + "collapse";
}

std::string EvalReport::csv_row() const {
  std::ostringstream out;
  out.precision(6);
  out << macro_f1 << ',' << bal_acc << ',' << maj_pred << ',' << overall_acc << ','
      << (collapse_flag ? 1 : 0);
  return out.str();
}

std::string EvalReport::pretty() const {
  std::ostringstream out;
  out.precision(4);
  out << "examples: " << count << "\n";
  out << "macro_f1: " << macro_f1 << "\n";
  out << "bal_acc: " << bal_acc << "\n";
  out << "maj_pred: " << maj_pred << "\n";
  out << "overall_acc: " << overall_acc << "\n";
  out << "collapse_flag: " << (collapse_flag ? "true" : "false") << "\n";
  for (int k = 0; k < classes; ++k) {
    out << "class " << k << ": precision=" << precision[k] << " recall=" << recall[k]
        << " f1=" << f1[k] << "\n";
  }
  out << "confusion (rows=label, cols=pred):\n";
  for (int k = 0; k < classes; ++k) {
    for (int j = 0; j < classes; ++j) out << confusion[k][j] << (j + 1 == classes ? '\n' : ' ');
  }
  return out.str();
}

}  // namespace dpspeech
