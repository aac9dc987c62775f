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

#include "dpspeech/datamodel.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>
#include <unordered_set>

#include "dpspeech/error.hpp"

namespace dpspeech {

bool Dataset::multimodal() const { return privileged_dim() > 0; }

int Dataset::privileged_dim() const {
  if (examples.empty() || !examples.front().privileged.has_value()) return 0;
  return static_cast<int>(examples.front().privileged->size());
}

void Dataset::recount() {
  class_counts.assign(classes, 0);
  for (const Example& e : examples) {
    if (e.label < 0 || e.label >= classes) throw Error("datamodel", "label out of range");
    class_counts[e.label]++;
  }
}

SplitManifest split(const Dataset& data, std::size_t n_priv, std::size_t n_aux,
                    std::uint64_t seed) {
  // Group ids by recording; groups are atomic.
  std::map<std::string, std::vector<std::string>> groups;
  for (const Example& e : data.examples) groups[e.recording_id].push_back(e.id);

  std::vector<const std::vector<std::string>*> order;
  order.reserve(groups.size());
  for (const auto& [rec, ids] : groups) {
    (void)rec;
    order.push_back(&ids);
  }
  CounterRng rng(seed, RngStream::split_shuffle);
  for (std::size_t i = order.size(); i > 1; --i) {
    std::swap(order[i - 1], order[rng.next_below(i)]);
  }

  SplitManifest manifest;
  std::size_t i = 0;
  while (i < order.size() && manifest.priv_ids.size() < n_priv) {
    for (const std::string& id : *order[i]) manifest.priv_ids.push_back(id);
    ++i;
  }
  while (i < order.size() && manifest.aux_ids.size() < n_aux) {
    for (const std::string& id : *order[i]) manifest.aux_ids.push_back(id);
    ++i;
  }
  if (manifest.priv_ids.size() < n_priv || manifest.aux_ids.size() < n_aux)
    throw Error("insufficient_data", "not enough recordings to satisfy the requested split");
  return manifest;
}

std::vector<std::size_t> poisson_sample(std::size_t n, double q, CounterRng& rng) {
  if (!(q > 0.0 && q <= 1.0)) throw Error("datamodel", "q must lie in (0,1]");
  std::vector<std::size_t> picked;
  for (std::size_t i = 0; i < n; ++i) {
    if (rng.next_unit() < q) picked.push_back(i);
  }
  return picked;
}

std::vector<std::size_t> proportion_counts(const std::vector<double>& proportions,
                                           std::size_t n) {
  double sum = 0.0;
  for (double p : proportions) {
    if (p < 0.0) throw Error("config", "negative class proportion");
    sum += p;
  }
  if (std::abs(sum - 1.0) > 1e-9)
    throw Error("config", "class proportions must sum to 1");

  std::vector<std::size_t> counts(proportions.size());
  std::vector<std::pair<double, std::size_t>> remainders;  // (-fraction, class)
  std::size_t assigned = 0;
  for (std::size_t k = 0; k < proportions.size(); ++k) {
    const double exact = proportions[k] * static_cast<double>(n);
    counts[k] = static_cast<std::size_t>(std::floor(exact));
    assigned += counts[k];
    remainders.emplace_back(-(exact - std::floor(exact)), k);
  }
  std::sort(remainders.begin(), remainders.end());
  for (std::size_t i = 0; assigned < n; ++i, ++assigned) {
    counts[remainders[i % remainders.size()].second]++;
  }
  return counts;
}

Dataset synth_generate(const SynthSpec& spec, std::uint64_t seed) {
  const std::vector<std::size_t> counts = proportion_counts(spec.proportions, spec.count);
  if (static_cast<int>(spec.proportions.size()) != spec.classes)
    throw Error("config", "proportions size must equal the class count");
  if (spec.privileged_dim > 0 && spec.privileged_dim < spec.classes)
    throw Error("config", "privileged_dim must be 0 or >= classes");

  CounterRng rng(seed, RngStream::synth);
  const std::size_t cells = static_cast<std::size_t>(spec.n_mels) * spec.frames;

  // Fixed per-seed class templates; the separation scale s controls the
  // distance between them.
  std::vector<std::vector<double>> templates(spec.classes);
  for (int k = 0; k < spec.classes; ++k) {
    templates[k].resize(cells);
    for (double& v : templates[k]) v = spec.class_separation * rng.next_gaussian();
  }

  Dataset data;
  data.classes = spec.classes;
  data.examples.reserve(spec.count);
  std::size_t index = 0;
  for (int k = 0; k < spec.classes; ++k) {
    for (std::size_t c = 0; c < counts[k]; ++c, ++index) {
      Example e;
      e.id = "ex" + std::to_string(index);
      e.recording_id = "rec" + std::to_string(index);
      e.label = k;
      e.features.n_mels = spec.n_mels;
      e.features.frames = spec.frames;
      e.features.values.resize(cells);
      const double gain = std::exp(spec.gain_log_std * rng.next_gaussian());
      const double offset = spec.offset_std * rng.next_gaussian();
      for (std::size_t i = 0; i < cells; ++i) {
        e.features.values[i] = gain * (templates[k][i] + rng.next_gaussian()) + offset;
      }
      if (spec.privileged_dim > 0) {
        int attribute = k;
        if (rng.next_unit() >= spec.privileged_rho) {
          // Uniform over the other classes.
          attribute = static_cast<int>(rng.next_below(spec.classes - 1));
          if (attribute >= k) ++attribute;
        }
        std::vector<double> one_hot(spec.privileged_dim, 0.0);
        one_hot[attribute] = 1.0;
        e.privileged = std::move(one_hot);
      }
      data.examples.push_back(std::move(e));
    }
  }
  data.recount();
  return data;
}

void save_dataset(const std::filesystem::path& manifest_path,
                  const std::filesystem::path& feature_dir, const Dataset& data) {
  std::filesystem::create_directories(feature_dir);
  const std::filesystem::path base = manifest_path.parent_path();
  std::ofstream out(manifest_path);
  if (!out) throw Error("io", "cannot write manifest " + manifest_path.string());
  out.precision(17);
  for (const Example& e : data.examples) {
    const std::filesystem::path fpath = feature_dir / (e.id + ".dsf");
    write_feature_file(fpath, e.features);
    out << e.id << ',' << e.recording_id << ',' << e.label << ','
        << std::filesystem::relative(fpath, base).generic_string() << ',';
    if (e.privileged) {
      for (std::size_t i = 0; i < e.privileged->size(); ++i) {
        if (i) out << ';';
        out << (*e.privileged)[i];
      }
    }
    out << '\n';
  }
  if (!out) throw Error("io", "short write to manifest " + manifest_path.string());
}

Dataset load_dataset(const std::filesystem::path& manifest_path) {
  std::ifstream in(manifest_path);
  if (!in) throw Error("missing_file", "cannot open manifest " + manifest_path.string());
  const std::filesystem::path base = manifest_path.parent_path();

  Dataset data;
  int max_label = -1;
  std::unordered_set<std::string> seen;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    Example e;
    std::string label_str, feature_path, privileged_str;
    if (!std::getline(row, e.id, ',') || !std::getline(row, e.recording_id, ',') ||
        !std::getline(row, label_str, ',') || !std::getline(row, feature_path, ','))
      throw Error("manifest", "malformed manifest line: " + line);
    std::getline(row, privileged_str);
    e.label = std::stoi(label_str);
    if (!seen.insert(e.id).second) throw Error("manifest", "duplicate id " + e.id);
    e.features = read_feature_file(base / feature_path);
    if (!privileged_str.empty()) {
      std::vector<double> v;
      std::istringstream ps(privileged_str);
      std::string tok;
      while (std::getline(ps, tok, ';')) v.push_back(std::stod(tok));
      e.privileged = std::move(v);
    }
    max_label = std::max(max_label, e.label);
    data.examples.push_back(std::move(e));
  }
  if (data.examples.empty()) throw Error("manifest", "empty manifest " + manifest_path.string());
  const int dim = data.privileged_dim();
  for (const Example& e : data.examples) {
    const int d = e.privileged ? static_cast<int>(e.privileged->size()) : 0;
    if (d != dim) throw Error("manifest", "inconsistent privileged dimension");
  }
  data.classes = max_label + 1;
  data.recount();
  return data;
}

void save_split(const std::filesystem::path& path, const SplitManifest& manifest) {
  std::ofstream out(path);
  if (!out) throw Error("io", "cannot write split manifest " + path.string());
  out << "disjointness=" << manifest.disjointness_level << '\n';
  out << "[priv]\n";
  for (const std::string& id : manifest.priv_ids) out << id << '\n';
  out << "[aux]\n";
  for (const std::string& id : manifest.aux_ids) out << id << '\n';
}

SplitManifest load_split(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("missing_file", "cannot open split manifest " + path.string());
  SplitManifest manifest;
  std::string line;
  std::vector<std::string>* current = nullptr;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line.rfind("disjointness=", 0) == 0) {
      manifest.disjointness_level = line.substr(13);
    } else if (line == "[priv]") {
      current = &manifest.priv_ids;
    } else if (line == "[aux]") {
      current = &manifest.aux_ids;
    } else {
      if (current == nullptr) throw Error("manifest", "id before section header");
      current->push_back(line);
    }
  }
  return manifest;
}

Dataset subset(const Dataset& data, const std::vector<std::string>& ids) {
  std::unordered_set<std::string> wanted(ids.begin(), ids.end());
  Dataset out;
  out.classes = data.classes;
  for (const Example& e : data.examples) {
    if (wanted.count(e.id)) out.examples.push_back(e);
  }
  out.recount();
  return out;
}

}  // namespace dpspeech
