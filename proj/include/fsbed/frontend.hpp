// Copyright 2026 The fsbed Authors
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

#include <filesystem>
#include <vector>

#include "fsbed/audio.hpp"
#include "fsbed/common.hpp"

namespace fsbed::audio {

struct PcenParams {
  double smoothing = 0.025;
  double alpha = 0.98;
  double delta = 2.0;
  double root = 0.5;
  double floor = 1e-6;
};

struct FrontendConfig {
  int target_rate = 16000;
  double frame_length_ms = 25.0;
  double frame_shift_ms = 10.0;
  int n_mels = 128;
  int fft_size = 1024;
  double fmin = 0.0;
  double fmax = 8000.0;
  PcenParams pcen;

  int frame_length_samples() const;
  int frame_shift_samples() const;
  // Throws InvalidConfig on any violated constraint.
  void validate() const;
};

// Frame-major [n_frames x n_mels] matrix of nonnegative PCEN values.
struct PcenGram {
  Matrix values;
  double frame_shift_ms = 10.0;

  int n_frames() const { return static_cast<int>(values.rows()); }
  int n_mels() const { return static_cast<int>(values.cols()); }
};

double hz_to_mel(double hz);
double mel_to_hz(double mel);

// Frames start at sample 0 (no centering): 1 + floor((len - frame) / shift),
// or 0 when the signal is shorter than one frame.
int frame_count(std::size_t n_samples, const FrontendConfig& cfg);

// Center frequency of each triangular filter, in Hz.
std::vector<double> mel_center_frequencies(const FrontendConfig& cfg);

// [n_mels x (fft_size/2 + 1)] triangular filters with unit peak.
Matrix mel_filterbank(const FrontendConfig& cfg);

// Hann-windowed power spectrogram projected onto the mel filterbank.
Matrix mel_energies(const Waveform& wave, const FrontendConfig& cfg);

// Per-channel energy normalization with a causal first-order smoother
// seeded by the first frame (M_0 = E_0).
Matrix pcen(const Matrix& energies, const PcenParams& params);

PcenGram mel_pcen(const Waveform& wave, const FrontendConfig& cfg);

// Debug dump: "PCEN", u32 n_frames, u32 n_mels, u32 reserved, then
// little-endian f32 values in frame-major order.
void write_pcen_dump(const std::filesystem::path& path, const PcenGram& gram);
PcenGram read_pcen_dump(const std::filesystem::path& path,
                        double frame_shift_ms = 10.0);

}  // namespace fsbed::audio
