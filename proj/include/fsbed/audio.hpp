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

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace fsbed::audio {

// Mono signal with amplitudes nominally in [-1, 1].
struct Waveform {
  std::vector<double> samples;
  int sample_rate = 0;

  double duration_seconds() const {
    return sample_rate > 0 ? static_cast<double>(samples.size()) / sample_rate
                           : 0.0;
  }
};

enum class SampleFormat { Pcm16, Pcm24, Pcm32, Float32 };

// Decodes a RIFF/WAVE byte buffer. Multichannel audio is downmixed by the
// arithmetic mean; integer PCM is scaled by 1/2^(bits-1).
Waveform decode_wav(std::span<const std::uint8_t> bytes);
Waveform load_wav(const std::filesystem::path& path);

// Encodes interleaved samples. Integer formats clip to [-1, 1].
std::vector<std::uint8_t> encode_wav(std::span<const double> interleaved,
                                     int channels, int sample_rate,
                                     SampleFormat format);
void write_wav(const std::filesystem::path& path, const Waveform& wave,
               SampleFormat format = SampleFormat::Float32);

// Band-limited rational rate conversion with a Kaiser-windowed sinc
// polyphase filter. Output length is round(len * target / native). Equal
// rates return the input unchanged.
Waveform resample(const Waveform& wave, int target_rate);

}  // namespace fsbed::audio
