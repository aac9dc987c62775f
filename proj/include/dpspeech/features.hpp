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

// Deterministic per-example acoustic front-end: WAV decoding, STFT, Mel
// filterbank, log compression, and per-utterance normalization with
// fixed-length alignment. Everything here is pure and thread-safe.

struct RawAudio {
  std::vector<double> samples;  // in [-1, 1]
  int sample_rate = 0;          // Hz
};

struct FrontEndConfig {
  int n_mels = 40;
  double window_ms = 25.0;
  double hop_ms = 10.0;
  double log_floor = 1e-10;  // added to band energy before the log
  int fixed_frames = 100;    // L
  double eta0 = 1e-5;        // std stabilizer in the normalization
  bool normalize = true;     // the per-utterance normalization toggle
};

// Row-major [n_mels x frames] matrix of log-Mel energies.
struct Spectrogram {
  int n_mels = 0;
  int frames = 0;
  std::vector<double> values;

  double& at(int mel, int frame) { return values[static_cast<std::size_t>(mel) * frames + frame]; }
  double at(int mel, int frame) const {
    return values[static_cast<std::size_t>(mel) * frames + frame];
  }
};

// Normalized, fixed-length input to the models: exactly L frames.
struct FeatureMatrix {
  int n_mels = 0;
  int frames = 0;  // always the configured L
  std::vector<double> values;

  double at(int mel, int frame) const {
    return values[static_cast<std::size_t>(mel) * frames + frame];
  }
  std::size_t size() const { return values.size(); }
};

// 16-bit PCM mono RIFF/WAVE only; samples scaled by 1/32768.
// Throws WavFormatError / WavEncodingError / WavTruncatedError.
RawAudio decode_wav(std::span<const std::uint8_t> bytes);

// Magnitude STFT (Hann window) -> triangular Mel filterbank (HTK scale,
// 2595 log10(1 + f/700)) on the power spectrum -> log(energy + floor).
// Throws if the audio is shorter than one window.
Spectrogram log_mel(const RawAudio& audio, const FrontEndConfig& cfg);

// (S - mean(S)) / (std(S) + eta0), then truncate or zero-pad to L frames.
// Mean and std are scalars over the whole matrix; std is the population std.
FeatureMatrix dsaf(const Spectrogram& spec, int fixed_frames, double eta0);

// Length alignment alone (the normalization-disabled path).
FeatureMatrix fix_len(const Spectrogram& spec, int fixed_frames);

FeatureMatrix apply_front_end(const Spectrogram& spec, const FrontEndConfig& cfg);

// Triangular filterbank over [0, sample_rate/2]; weights are row-major
// [n_mels x bins] applied to the power spectrum of an n_fft-point FFT.
struct MelFilterbank {
  int n_mels = 0;
  int bins = 0;
  std::vector<double> weights;
  std::vector<double> center_hz;  // peak frequency per band
};

MelFilterbank build_mel_filterbank(int n_mels, int n_fft, int sample_rate);

// Binary feature file: magic "DSF1", u32 n_mels, u32 frames, then
// row-major little-endian f32 values.
void write_feature_file(const std::filesystem::path& path, const Spectrogram& matrix);
Spectrogram read_feature_file(const std::filesystem::path& path);

}  // namespace dpspeech
