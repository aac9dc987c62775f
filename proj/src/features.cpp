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

#include "dpspeech/features.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <complex>
#include <cstring>
#include <fstream>
#include <numbers>

#include "dpspeech/error.hpp"

namespace dpspeech {

namespace {

std::uint32_t read_u32le(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

std::uint16_t read_u16le(const std::uint8_t* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

// Iterative radix-2 FFT, in place. n must be a power of two.
void fft_radix2(std::vector<std::complex<double>>& a) {
  const std::size_t n = a.size();
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const double ang = -2.0 * std::numbers::pi / static_cast<double>(len);
    const std::complex<double> wlen(std::cos(ang), std::sin(ang));
    for (std::size_t i = 0; i < n; i += len) {
      std::complex<double> w(1.0, 0.0);
      for (std::size_t k = 0; k < len / 2; ++k) {
        const std::complex<double> u = a[i + k];
        const std::complex<double> v = a[i + k + len / 2] * w;
        a[i + k] = u + v;
        a[i + k + len / 2] = u - v;
        w *= wlen;
      }
    }
  }
}

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

}  // namespace

RawAudio decode_wav(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0)
    throw WavFormatError("not a RIFF/WAVE stream");

  // Walk the chunk list for fmt and data.
  std::size_t pos = 12;
  bool have_fmt = false;
  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t sample_rate = 0;
  const std::uint8_t* data = nullptr;
  std::uint32_t data_size = 0;
  while (pos + 8 <= bytes.size()) {
    const std::uint8_t* chunk = bytes.data() + pos;
    const std::uint32_t chunk_size = read_u32le(chunk + 4);
    if (pos + 8 + chunk_size > bytes.size()) {
      if (std::memcmp(chunk, "data", 4) == 0)
        throw WavTruncatedError("data chunk extends past end of stream");
      throw WavFormatError("chunk extends past end of stream");
    }
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      if (chunk_size < 16) throw WavFormatError("fmt chunk too small");
      format = read_u16le(chunk + 8);
      channels = read_u16le(chunk + 10);
      sample_rate = read_u32le(chunk + 12);
      bits = read_u16le(chunk + 22);
      have_fmt = true;
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      data = chunk + 8;
      data_size = chunk_size;
    }
    pos += 8 + chunk_size + (chunk_size & 1);  // chunks are word-aligned
  }
  if (!have_fmt || data == nullptr) throw WavFormatError("missing fmt or data chunk");
  if (format != 1 || channels != 1 || bits != 16)
    throw WavEncodingError("only 16-bit PCM mono is supported");
  if (sample_rate == 0) throw WavFormatError("zero sample rate");
  if (data_size % 2 != 0) throw WavTruncatedError("odd data chunk size for 16-bit samples");
  if (data_size == 0) throw WavFormatError("empty data chunk");

  RawAudio audio;
  audio.sample_rate = static_cast<int>(sample_rate);
  audio.samples.resize(data_size / 2);
  for (std::size_t i = 0; i < audio.samples.size(); ++i) {
    const std::int16_t s = static_cast<std::int16_t>(read_u16le(data + 2 * i));
    audio.samples[i] = static_cast<double>(s) / 32768.0;
  }
  return audio;
}

MelFilterbank build_mel_filterbank(int n_mels, int n_fft, int sample_rate) {
  MelFilterbank fb;
  fb.n_mels = n_mels;
  fb.bins = n_fft / 2 + 1;
  fb.weights.assign(static_cast<std::size_t>(n_mels) * fb.bins, 0.0);
  fb.center_hz.resize(n_mels);

  const double mel_lo = hz_to_mel(0.0);
  const double mel_hi = hz_to_mel(sample_rate / 2.0);
  std::vector<double> edges(n_mels + 2);
  for (int i = 0; i < n_mels + 2; ++i) {
    edges[i] = mel_to_hz(mel_lo + (mel_hi - mel_lo) * i / (n_mels + 1));
  }
  for (int m = 0; m < n_mels; ++m) {
    fb.center_hz[m] = edges[m + 1];
    const double left = edges[m], center = edges[m + 1], right = edges[m + 2];
    for (int k = 0; k < fb.bins; ++k) {
      const double f = static_cast<double>(k) * sample_rate / n_fft;
      double w = 0.0;
      if (f > left && f < center) {
        w = (f - left) / (center - left);
      } else if (f >= center && f < right) {
        w = (right - f) / (right - center);
      }
      fb.weights[static_cast<std::size_t>(m) * fb.bins + k] = w;
    }
  }
  return fb;
}

Spectrogram log_mel(const RawAudio& audio, const FrontEndConfig& cfg) {
  const int win = static_cast<int>(std::lround(cfg.window_ms * audio.sample_rate / 1000.0));
  const int hop = static_cast<int>(std::lround(cfg.hop_ms * audio.sample_rate / 1000.0));
  if (win <= 0 || hop <= 0) throw Error("features", "window/hop must be positive");
  if (static_cast<int>(audio.samples.size()) < win)
    throw Error("features", "audio shorter than one analysis window");

  const int frames = (static_cast<int>(audio.samples.size()) - win) / hop + 1;
  const int n_fft = static_cast<int>(std::bit_ceil(static_cast<unsigned>(win)));
  const MelFilterbank fb = build_mel_filterbank(cfg.n_mels, n_fft, audio.sample_rate);

  std::vector<double> window(win);
  for (int i = 0; i < win; ++i) {
    window[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * i / (win - 1));
  }

  Spectrogram out;
  out.n_mels = cfg.n_mels;
  out.frames = frames;
  out.values.assign(static_cast<std::size_t>(cfg.n_mels) * frames, 0.0);

  std::vector<std::complex<double>> buf(n_fft);
  std::vector<double> power(fb.bins);
  for (int t = 0; t < frames; ++t) {
    const double* src = audio.samples.data() + static_cast<std::size_t>(t) * hop;
    for (int i = 0; i < win; ++i) buf[i] = src[i] * window[i];
    std::fill(buf.begin() + win, buf.end(), std::complex<double>(0.0, 0.0));
    fft_radix2(buf);
    for (int k = 0; k < fb.bins; ++k) power[k] = std::norm(buf[k]);
    for (int m = 0; m < cfg.n_mels; ++m) {
      const double* w = fb.weights.data() + static_cast<std::size_t>(m) * fb.bins;
      double energy = 0.0;
      for (int k = 0; k < fb.bins; ++k) energy += w[k] * power[k];
      out.at(m, t) = std::log(energy + cfg.log_floor);
    }
  }
  return out;
}

FeatureMatrix dsaf(const Spectrogram& spec, int fixed_frames, double eta0) {
  if (fixed_frames < 1) throw Error("features", "fixed_frames must be at least 1");
  if (!(eta0 > 0.0)) throw Error("features", "eta0 must be positive");

  FeatureMatrix out;
  out.n_mels = spec.n_mels;
  out.frames = fixed_frames;
  out.values.assign(static_cast<std::size_t>(spec.n_mels) * fixed_frames, 0.0);

  // A constant matrix has numerator identically zero; return the zero
  // matrix directly rather than dividing rounding residue by eta0.
  const bool constant =
      std::all_of(spec.values.begin(), spec.values.end(),
                  [&](double v) { return v == spec.values.front(); });
  if (constant) return out;

  const std::size_t n = spec.values.size();
  double mean = 0.0;
  for (double v : spec.values) mean += v;
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (double v : spec.values) {
    const double d = v - mean;
    var += d * d;
  }
  var /= static_cast<double>(n);
  const double denom = std::sqrt(var) + eta0;

  const int keep = std::min(fixed_frames, spec.frames);
  for (int m = 0; m < spec.n_mels; ++m) {
    for (int t = 0; t < keep; ++t) {
      out.values[static_cast<std::size_t>(m) * fixed_frames + t] =
          (spec.at(m, t) - mean) / denom;
    }
  }
  return out;
}

FeatureMatrix fix_len(const Spectrogram& spec, int fixed_frames) {
  if (fixed_frames < 1) throw Error("features", "fixed_frames must be at least 1");
  FeatureMatrix out;
  out.n_mels = spec.n_mels;
  out.frames = fixed_frames;
  out.values.assign(static_cast<std::size_t>(spec.n_mels) * fixed_frames, 0.0);
  const int keep = std::min(fixed_frames, spec.frames);
  for (int m = 0; m < spec.n_mels; ++m) {
    for (int t = 0; t < keep; ++t) {
      out.values[static_cast<std::size_t>(m) * fixed_frames + t] = spec.at(m, t);
    }
  }
  return out;
}

FeatureMatrix apply_front_end(const Spectrogram& spec, const FrontEndConfig& cfg) {
  return cfg.normalize ? dsaf(spec, cfg.fixed_frames, cfg.eta0)
                       : fix_len(spec, cfg.fixed_frames);
}

void write_feature_file(const std::filesystem::path& path, const Spectrogram& matrix) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("io", "cannot write feature file " + path.string());
  out.write("DSF1", 4);
  const std::uint32_t n_mels = static_cast<std::uint32_t>(matrix.n_mels);
  const std::uint32_t frames = static_cast<std::uint32_t>(matrix.frames);
  out.write(reinterpret_cast<const char*>(&n_mels), 4);
  out.write(reinterpret_cast<const char*>(&frames), 4);
  std::vector<float> f32(matrix.values.begin(), matrix.values.end());
  out.write(reinterpret_cast<const char*>(f32.data()),
            static_cast<std::streamsize>(f32.size() * sizeof(float)));
  if (!out) throw Error("io", "short write to feature file " + path.string());
}

Spectrogram read_feature_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("io", "cannot open feature file " + path.string());
  char magic[4];
  std::uint32_t n_mels = 0, frames = 0;
  in.read(magic, 4);
  in.read(reinterpret_cast<char*>(&n_mels), 4);
  in.read(reinterpret_cast<char*>(&frames), 4);
  if (!in || std::memcmp(magic, "DSF1", 4) != 0)
    throw Error("feature_file", "bad feature file header in " + path.string());
  Spectrogram out;
  out.n_mels = static_cast<int>(n_mels);
  out.frames = static_cast<int>(frames);
  std::vector<float> f32(static_cast<std::size_t>(n_mels) * frames);
  in.read(reinterpret_cast<char*>(f32.data()),
          static_cast<std::streamsize>(f32.size() * sizeof(float)));
  if (!in) throw Error("feature_file", "truncated feature file " + path.string());
  out.values.assign(f32.begin(), f32.end());
  return out;
}

}  // namespace dpspeech
