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
#include <string>
#include <vector>

#include "fsbed/audio.hpp"
#include "fsbed/manifest.hpp"
#include "fsbed/task.hpp"

namespace fsbed::synth {

enum class EventKind { Tone, Chirp, PulseTrain };
enum class NoiseColor { Pink, White };
enum class DurationShape { Uniform, LogUniform };

struct SynthProfile {
  std::string name = "custom";
  double min_duration_s = 0.2;
  double max_duration_s = 0.5;
  DurationShape duration_shape = DurationShape::Uniform;
  double event_rate_per_min = 20.0;
  EventKind kind = EventKind::Tone;
  double carrier_min_hz = 1000.0;
  double carrier_max_hz = 3000.0;
  double carrier_jitter = 0.02;     // relative per-event carrier spread
  double chirp_span_hz = 800.0;     // chirps sweep carrier -> carrier + span
  double pulse_len_s = 0.03;        // pulse trains only
  double pulse_gap_min_s = 0.05;
  double pulse_gap_max_s = 0.15;
  double snr_db = 30.0;
  double snr_spread_db = 0.0;  // target SNR drawn from [snr - spread, snr]
  NoiseColor background = NoiseColor::Pink;
  double noise_rms = 0.005;
  double recording_len_s = 60.0;
  int sample_rate = 16000;
  double min_gap_s = 0.1;
  double lead_in_s = 0.0;  // background only before the first event
  // Unannotated events of another class, carriers >= 500 Hz away from the
  // target carrier.
  double distractor_rate_per_min = 0.0;
  double distractor_min_duration_s = 0.1;
  double distractor_max_duration_s = 0.4;
  EventKind distractor_kind = EventKind::Tone;

  void validate() const;
};

// Named presets: "easy" (short tones), "dense" (events over about 45% of the
// query, levels spread over 12 dB), "long" (multi-second pulse trains at 12 dB),
// "short" (tens of ms).
SynthProfile preset_profile(const std::string& name);
std::vector<std::string> preset_names();

struct SynthTask {
  audio::Waveform waveform;
  std::vector<task::AnnotationEvent> annotations;  // target events, POS
  std::vector<task::AnnotationEvent> distractors;  // not written to CSV
  double target_carrier_hz = 0.0;
  std::uint64_t seed = 0;
};

// Events are laid out without overlap and at least min_gap_s apart;
// annotation times are exact sample positions.
SynthTask generate_task(const SynthProfile& profile, std::uint64_t seed);

// Writes <id>.wav / <id>.csv pairs plus manifest.json into out_dir.
// Profiles are assigned round-robin.
task::Manifest generate_corpus(const std::vector<SynthProfile>& profiles,
                               int n_train, int n_test, std::uint64_t seed,
                               const std::filesystem::path& out_dir);

// Voss-McCartney pink noise with unit RMS.
std::vector<double> pink_noise(std::size_t n, std::uint64_t seed);

}  // namespace fsbed::synth
