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

#include "dpspeech/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "dpspeech/error.hpp"

namespace dpspeech {

namespace {

double activate(Activation a, double z) {
  return a == Activation::relu ? (z > 0.0 ? z : 0.0) : std::tanh(z);
}

// Derivative in terms of the pre-activation z (relu) or the activation
// value (tanh: 1 - act^2).
double activate_grad(Activation a, double z, double act) {
  return a == Activation::relu ? (z > 0.0 ? 1.0 : 0.0) : 1.0 - act * act;
}

// y = W x + b for row-major W [rows x cols].
void affine(const Tensor& w, const Tensor& b, std::span<const double> x,
            std::vector<double>& y) {
  const std::size_t rows = w.dims[0];
  const std::size_t cols = w.dims[1];
  y.resize(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* wr = w.data.data() + r * cols;
    double acc = b.data[r];
    for (std::size_t c = 0; c < cols; ++c) acc += wr[c] * x[c];
    y[r] = acc;
  }
}

void softmax_in_place(std::vector<double>& v) {
  const double m = *std::max_element(v.begin(), v.end());
  double sum = 0.0;
  for (double& x : v) {
    x = std::exp(x - m);
    sum += x;
  }
  for (double& x : v) x /= sum;
}

void check_input(const ModelParams& params, const FeatureMatrix& x,
                 const std::vector<double>* m) {
  if (static_cast<int>(x.size()) != params.cfg.input_dim())
    throw Error("shape_mismatch", "feature matrix does not match the model input size");
  if (params.cfg.multimodal()) {
    if (m == nullptr || static_cast<int>(m->size()) != params.cfg.priv_dim)
      throw Error("shape_mismatch", "multimodal model requires a privileged vector of size " +
                                        std::to_string(params.cfg.priv_dim));
  } else if (m != nullptr) {
    throw Error("shape_mismatch", "audio-only model given a privileged vector");
  }
}

}  // namespace

Activation activation_from_string(const std::string& s) {
  if (s == "relu") return Activation::relu;
  if (s == "tanh") return Activation::tanh;
  throw Error("config", "unknown activation " + s);
}

std::string to_string(Activation a) { return a == Activation::relu ? "relu" : "tanh"; }

ModelParams init_params(const ModelConfig& cfg, std::uint64_t seed) {
  if (cfg.hidden < 1 || cfg.classes < 2 || cfg.input_dim() < 1)
    throw Error("config", "invalid model dimensions");
  ModelParams params;
  params.cfg = cfg;
  auto& t = params.tensors;
  t.emplace("audio_enc.bias", Tensor::zeros({static_cast<std::size_t>(cfg.hidden)}));
  t.emplace("audio_enc.weight", Tensor::zeros({static_cast<std::size_t>(cfg.hidden),
                                               static_cast<std::size_t>(cfg.input_dim())}));
  t.emplace("head.bias", Tensor::zeros({static_cast<std::size_t>(cfg.classes)}));
  t.emplace("head.weight", Tensor::zeros({static_cast<std::size_t>(cfg.classes),
                                          static_cast<std::size_t>(cfg.fused_dim())}));
  if (cfg.multimodal()) {
    t.emplace("priv_enc.bias", Tensor::zeros({static_cast<std::size_t>(cfg.priv_hidden)}));
    t.emplace("priv_enc.weight", Tensor::zeros({static_cast<std::size_t>(cfg.priv_hidden),
                                                static_cast<std::size_t>(cfg.priv_dim)}));
  }

  CounterRng rng(seed, RngStream::param_init);
  for (auto& [name, tensor] : t) {
    if (tensor.dims.size() != 2) continue;  // biases stay zero
    (void)name;
    const double fan_in = static_cast<double>(tensor.dims[1]);
    const double fan_out = static_cast<double>(tensor.dims[0]);
    const double bound = std::sqrt(6.0 / (fan_in + fan_out));
    for (double& v : tensor.data) v = bound * (2.0 * rng.next_unit() - 1.0);
  }
  return params;
}

void forward_cached(const ModelParams& params, const FeatureMatrix& x,
                    const std::vector<double>* m, ForwardCache& cache) {
  check_input(params, x, m);
  const ModelConfig& cfg = params.cfg;
  const auto& t = params.tensors;

  affine(t.at("audio_enc.weight"), t.at("audio_enc.bias"), x.values, cache.pre_audio);
  cache.act_audio.resize(cache.pre_audio.size());
  for (std::size_t i = 0; i < cache.pre_audio.size(); ++i)
    cache.act_audio[i] = activate(cfg.activation, cache.pre_audio[i]);

  const Tensor& hw = t.at("head.weight");
  const Tensor& hb = t.at("head.bias");
  cache.logits.assign(cfg.classes, 0.0);
  if (cfg.multimodal()) {
    affine(t.at("priv_enc.weight"), t.at("priv_enc.bias"), *m, cache.pre_priv);
    cache.act_priv.resize(cache.pre_priv.size());
    for (std::size_t i = 0; i < cache.pre_priv.size(); ++i)
      cache.act_priv[i] = activate(cfg.activation, cache.pre_priv[i]);
  } else {
    cache.pre_priv.clear();
    cache.act_priv.clear();
  }
  const std::size_t fused = static_cast<std::size_t>(cfg.fused_dim());
  for (int k = 0; k < cfg.classes; ++k) {
    const double* wr = hw.data.data() + static_cast<std::size_t>(k) * fused;
    double acc = hb.data[k];
    for (std::size_t j = 0; j < cache.act_audio.size(); ++j) acc += wr[j] * cache.act_audio[j];
    for (std::size_t j = 0; j < cache.act_priv.size(); ++j)
      acc += wr[cache.act_audio.size() + j] * cache.act_priv[j];
    cache.logits[k] = acc;
  }
  cache.probs = cache.logits;
  softmax_in_place(cache.probs);
}

std::vector<double> forward_teacher(const ModelParams& params, const FeatureMatrix& x,
                                    const std::vector<double>* m) {
  ForwardCache cache;
  forward_cached(params, x, m, cache);
  return cache.probs;
}

std::vector<double> forward_student(const ModelParams& params, const FeatureMatrix& x) {
  if (params.cfg.multimodal())
    throw Error("shape_mismatch", "student forward requires an audio-only model");
  return forward_teacher(params, x, nullptr);
}

std::vector<double> priv_dropout(const std::vector<double>& m, double p, CounterRng& rng) {
  if (p < 0.0 || p > 1.0) throw Error("config", "dropout probability must lie in [0,1]");
  if (rng.next_unit() < p) return std::vector<double>(m.size(), 0.0);
  return m;
}

double weighted_ce_loss(std::span<const double> probs, int y, double w) {
  if (y < 0 || y >= static_cast<int>(probs.size()))
    throw Error("shape_mismatch", "label out of range");
  if (!(w > 0.0)) throw Error("config", "loss weight must be positive");
  return w * -std::log(std::max(probs[y], kProbFloor));
}

void backward_from_dlogits(const ModelParams& params, const FeatureMatrix& x,
                           const std::vector<double>* m, const ForwardCache& cache,
                           std::span<const double> dlogits, PerExampleGrad& out) {
  const ModelConfig& cfg = params.cfg;
  if (out.tensors.empty()) out.tensors = zeros_like(params.tensors);

  const Tensor& hw = params.tensors.at("head.weight");
  Tensor& d_hw = out.tensors.at("head.weight");
  Tensor& d_hb = out.tensors.at("head.bias");
  const std::size_t fused = static_cast<std::size_t>(cfg.fused_dim());
  const std::size_t h = cache.act_audio.size();

  // Head: d_hw = dlogits (x) fused_act, d_hb = dlogits; also the fused
  // upstream gradient du = head.weight^T dlogits.
  std::vector<double> du(fused, 0.0);
  for (int k = 0; k < cfg.classes; ++k) {
    const double g = dlogits[k];
    d_hb.data[k] = g;
    double* dw = d_hw.data.data() + static_cast<std::size_t>(k) * fused;
    const double* wr = hw.data.data() + static_cast<std::size_t>(k) * fused;
    for (std::size_t j = 0; j < h; ++j) {
      dw[j] = g * cache.act_audio[j];
      du[j] += wr[j] * g;
    }
    for (std::size_t j = 0; j < cache.act_priv.size(); ++j) {
      dw[h + j] = g * cache.act_priv[j];
      du[h + j] += wr[h + j] * g;
    }
  }

  // Audio branch.
  Tensor& d_aw = out.tensors.at("audio_enc.weight");
  Tensor& d_ab = out.tensors.at("audio_enc.bias");
  const std::size_t in_dim = static_cast<std::size_t>(cfg.input_dim());
  for (std::size_t i = 0; i < h; ++i) {
    const double dz =
        du[i] * activate_grad(cfg.activation, cache.pre_audio[i], cache.act_audio[i]);
    d_ab.data[i] = dz;
    double* dw = d_aw.data.data() + i * in_dim;
    const double* xv = x.values.data();
    for (std::size_t f = 0; f < in_dim; ++f) dw[f] = dz * xv[f];
  }

  // Privileged branch.
  if (cfg.multimodal()) {
    Tensor& d_pw = out.tensors.at("priv_enc.weight");
    Tensor& d_pb = out.tensors.at("priv_enc.bias");
    const std::size_t pd = static_cast<std::size_t>(cfg.priv_dim);
    for (std::size_t i = 0; i < cache.act_priv.size(); ++i) {
      const double dz =
          du[h + i] * activate_grad(cfg.activation, cache.pre_priv[i], cache.act_priv[i]);
      d_pb.data[i] = dz;
      double* dw = d_pw.data.data() + i * pd;
      for (std::size_t f = 0; f < pd; ++f) dw[f] = dz * (*m)[f];
    }
  }

  out.l2_norm = std::sqrt(squared_l2_norm(out.tensors));
}

void per_example_grad_into(const ModelParams& params, const FeatureMatrix& x,
                           const std::vector<double>* m, int y, double w,
                           ForwardCache& cache, PerExampleGrad& out) {
  forward_cached(params, x, m, cache);
  if (y < 0 || y >= params.cfg.classes) throw Error("shape_mismatch", "label out of range");

  // Softmax cross-entropy: dlogits = w (p - onehot(y)); zero when the
  // floored log is flat in the logits.
  std::vector<double> dlogits(params.cfg.classes, 0.0);
  if (cache.probs[y] > kProbFloor) {
    for (int k = 0; k < params.cfg.classes; ++k) dlogits[k] = w * cache.probs[k];
    dlogits[y] -= w;
  }
  backward_from_dlogits(params, x, m, cache, dlogits, out);
}

PerExampleGrad per_example_grad(const ModelParams& params, const FeatureMatrix& x,
                                const std::vector<double>* m, int y, double w) {
  ForwardCache cache;
  PerExampleGrad out;
  per_example_grad_into(params, x, m, y, w, cache, out);
  return out;
}

void save_checkpoint(const std::filesystem::path& path, const ModelParams& params) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("io", "cannot write checkpoint " + path.string());
  out.write("DPM1", 4);
  const std::uint32_t version = 1;
  const std::uint32_t count = static_cast<std::uint32_t>(params.tensors.size());
  out.write(reinterpret_cast<const char*>(&version), 4);
  out.write(reinterpret_cast<const char*>(&count), 4);
  for (const auto& [name, tensor] : params.tensors) {
    const std::uint32_t name_len = static_cast<std::uint32_t>(name.size());
    out.write(reinterpret_cast<const char*>(&name_len), 4);
    out.write(name.data(), name_len);
    const std::uint32_t rank = static_cast<std::uint32_t>(tensor.dims.size());
    out.write(reinterpret_cast<const char*>(&rank), 4);
    for (std::size_t d : tensor.dims) {
      const std::uint32_t dim = static_cast<std::uint32_t>(d);
      out.write(reinterpret_cast<const char*>(&dim), 4);
    }
    std::vector<float> f32(tensor.data.begin(), tensor.data.end());
    out.write(reinterpret_cast<const char*>(f32.data()),
              static_cast<std::streamsize>(f32.size() * sizeof(float)));
  }
  if (!out) throw Error("io", "short write to checkpoint " + path.string());

  std::ofstream meta(path.string() + ".meta");
  if (!meta) throw Error("io", "cannot write checkpoint metadata");
  meta << "classes=" << params.cfg.classes << "\n";
  meta << "n_mels=" << params.cfg.n_mels << "\n";
  meta << "frames=" << params.cfg.frames << "\n";
  meta << "hidden=" << params.cfg.hidden << "\n";
  meta << "priv_dim=" << params.cfg.priv_dim << "\n";
  meta << "priv_hidden=" << params.cfg.priv_hidden << "\n";
  meta << "activation=" << to_string(params.cfg.activation) << "\n";
  meta << "multimodal=" << (params.cfg.multimodal() ? 1 : 0) << "\n";
}

ModelParams load_checkpoint(const std::filesystem::path& path) {
  std::ifstream meta_in(path.string() + ".meta");
  if (!meta_in) throw Error("missing_file", "missing checkpoint metadata for " + path.string());
  ModelConfig cfg;
  std::string line;
  while (std::getline(meta_in, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    const std::string key = line.substr(0, eq);
    const std::string value = line.substr(eq + 1);
    if (key == "classes") cfg.classes = std::stoi(value);
    else if (key == "n_mels") cfg.n_mels = std::stoi(value);
    else if (key == "frames") cfg.frames = std::stoi(value);
    else if (key == "hidden") cfg.hidden = std::stoi(value);
    else if (key == "priv_dim") cfg.priv_dim = std::stoi(value);
    else if (key == "priv_hidden") cfg.priv_hidden = std::stoi(value);
    else if (key == "activation") cfg.activation = activation_from_string(value);
  }

  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("missing_file", "cannot open checkpoint " + path.string());
  char magic[4];
  std::uint32_t version = 0, count = 0;
  in.read(magic, 4);
  in.read(reinterpret_cast<char*>(&version), 4);
  in.read(reinterpret_cast<char*>(&count), 4);
  if (!in || std::memcmp(magic, "DPM1", 4) != 0 || version != 1)
    throw Error("checkpoint", "bad checkpoint header in " + path.string());

  ModelParams params;
  params.cfg = cfg;
  for (std::uint32_t i = 0; i < count; ++i) {
    std::uint32_t name_len = 0;
    in.read(reinterpret_cast<char*>(&name_len), 4);
    std::string name(name_len, '\0');
    in.read(name.data(), name_len);
    std::uint32_t rank = 0;
    in.read(reinterpret_cast<char*>(&rank), 4);
    std::vector<std::size_t> dims(rank);
    std::size_t total = 1;
    for (std::uint32_t d = 0; d < rank; ++d) {
      std::uint32_t dim = 0;
      in.read(reinterpret_cast<char*>(&dim), 4);
      dims[d] = dim;
      total *= dim;
    }
    std::vector<float> f32(total);
    in.read(reinterpret_cast<char*>(f32.data()),
            static_cast<std::streamsize>(total * sizeof(float)));
    if (!in) throw Error("checkpoint", "truncated checkpoint " + path.string());
    Tensor t;
    t.dims = std::move(dims);
    t.data.assign(f32.begin(), f32.end());
    params.tensors.emplace(std::move(name), std::move(t));
  }
  return params;
}

std::string file_fingerprint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("missing_file", "cannot open " + path.string());
  std::uint64_t h = 0xCBF29CE484222325ULL;
  char buf[4096];
  while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
    for (std::streamsize i = 0; i < in.gcount(); ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 0x100000001B3ULL;
    }
    if (!in) break;
  }
  std::ostringstream hex;
  hex << std::hex << h;
  return hex.str();
}

}  // namespace dpspeech
