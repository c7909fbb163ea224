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

#include "fsbed/synth.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <iomanip>
#include <numbers>
#include <random>
#include <sstream>

#include "fsbed/common.hpp"

namespace fsbed::synth {
namespace {

constexpr double kRampS = 0.02;
constexpr double kMinCarrierSeparationHz = 500.0;

std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

struct Placed {
  double start_s;
  double duration_s;
  bool target;
  double carrier_hz;
  double snr_db;
};

double sample_duration(std::mt19937_64& rng, double lo, double hi,
                       DurationShape shape) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  if (shape == DurationShape::LogUniform) {
    return std::exp(std::log(lo) + u(rng) * (std::log(hi) - std::log(lo)));
  }
  return lo + u(rng) * (hi - lo);
}

// Raised-cosine onset/offset ramps; flat in between.
double envelope(double t, double dur) {
  const double ramp = std::min(kRampS, dur / 4.0);
  if (t < ramp) return 0.5 - 0.5 * std::cos(std::numbers::pi * t / ramp);
  if (t > dur - ramp) {
    return 0.5 - 0.5 * std::cos(std::numbers::pi * (dur - t) / ramp);
  }
  return 1.0;
}

void render_event(std::vector<double>& out, int sr, std::size_t start,
                  std::size_t len, EventKind kind, double carrier,
                  double amplitude, const SynthProfile& p,
                  std::mt19937_64& rng) {
  const double dur = static_cast<double>(len) / sr;
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double phase0 = 2.0 * std::numbers::pi * u(rng);

  // Pulse trains: on-intervals of pulse_len with random gaps.
  std::vector<std::pair<double, double>> pulses;
  if (kind == EventKind::PulseTrain) {
    double t = 0.0;
    while (t < dur) {
      const double len_s = std::min(p.pulse_len_s, dur - t);
      pulses.emplace_back(t, len_s);
      t += len_s + p.pulse_gap_min_s +
           u(rng) * (p.pulse_gap_max_s - p.pulse_gap_min_s);
    }
  }
  std::size_t pulse_idx = 0;
  for (std::size_t i = 0; i < len && start + i < out.size(); ++i) {
    const double t = static_cast<double>(i) / sr;
    double env = envelope(t, dur);
    double phase = 0.0;
    switch (kind) {
      case EventKind::Tone:
      case EventKind::PulseTrain:
        phase = 2.0 * std::numbers::pi * carrier * t;
        break;
      case EventKind::Chirp: {
        const double rate = p.chirp_span_hz / dur;
        phase = 2.0 * std::numbers::pi * (carrier * t + 0.5 * rate * t * t);
        break;
      }
    }
    if (kind == EventKind::PulseTrain) {
      while (pulse_idx + 1 < pulses.size() &&
             t >= pulses[pulse_idx + 1].first) {
        ++pulse_idx;
      }
      const auto [p0, plen] = pulses[pulse_idx];
      const double local = t - p0;
      env = (local >= 0.0 && local < plen)
                ? 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * local / plen)
                : 0.0;
    }
    out[start + i] += amplitude * env * std::sin(phase + phase0);
  }
}

}  // namespace

void SynthProfile::validate() const {
  auto fail = [&](const std::string& what) {
    throw Error(Errc::InvalidConfig, "profile " + name + ": " + what);
  };
  if (!(min_duration_s > 0.0 && max_duration_s >= min_duration_s)) {
    fail("durations must be positive with min <= max");
  }
  if (!(event_rate_per_min > 0.0)) fail("event rate must be positive");
  if (!(recording_len_s > 0.0) || sample_rate <= 0) fail("bad length or rate");
  if (!(carrier_min_hz > 0.0 && carrier_max_hz >= carrier_min_hz &&
        carrier_max_hz < sample_rate / 2.0)) {
    fail("carrier range must lie below Nyquist");
  }
  if (min_gap_s < 0.0) fail("min_gap_s must be >= 0");
  if (snr_spread_db < 0.0) fail("snr_spread_db must be >= 0");
  if (lead_in_s < 0.0) fail("lead_in_s must be >= 0");
  if (distractor_rate_per_min < 0.0) fail("distractor rate must be >= 0");
  if (kind == EventKind::PulseTrain &&
      !(pulse_len_s > 0.0 && pulse_gap_max_s >= pulse_gap_min_s &&
        pulse_gap_min_s >= 0.0)) {
    fail("bad pulse parameters");
  }
}

SynthProfile preset_profile(const std::string& name) {
  SynthProfile p;
  p.name = name;
  if (name == "easy") {
    p.min_duration_s = 0.2;
    p.max_duration_s = 0.5;
    p.event_rate_per_min = 15.0;
    p.snr_db = 30.0;
    p.recording_len_s = 60.0;
    p.distractor_rate_per_min = 0.0;
    p.min_gap_s = 0.5;
  } else if (name == "dense") {
    p.min_duration_s = 0.45;
    p.max_duration_s = 0.65;
    p.event_rate_per_min = 46.0;
    p.snr_db = 20.0;
    p.snr_spread_db = 12.0;
    p.recording_len_s = 60.0;
    p.min_gap_s = 0.6;
    p.lead_in_s = 4.0;
  } else if (name == "long") {
    p.kind = EventKind::PulseTrain;
    p.min_duration_s = 1.0;
    p.max_duration_s = 4.0;
    p.event_rate_per_min = 8.0;
    p.snr_db = 12.0;
    p.recording_len_s = 180.0;
    p.min_gap_s = 1.5;
    p.pulse_gap_min_s = 0.15;
    p.pulse_gap_max_s = 0.4;
  } else if (name == "short") {
    p.min_duration_s = 0.03;
    p.max_duration_s = 0.08;
    p.event_rate_per_min = 30.0;
    p.snr_db = 25.0;
    p.recording_len_s = 60.0;
    p.distractor_rate_per_min = 6.0;
  } else {
    throw Error(Errc::InvalidConfig, "unknown synth profile '" + name + "'");
  }
  return p;
}

std::vector<std::string> preset_names() {
  return {"easy", "dense", "long", "short"};
}

std::vector<double> pink_noise(std::size_t n, std::uint64_t seed) {
  constexpr int kRows = 16;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::array<double, kRows> rows{};
  double running = 0.0;
  for (double& r : rows) {
    r = normal(rng);
    running += r;
  }
  std::vector<double> out(n);
  double energy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    // Row k is refreshed every 2^k samples, selected by trailing zeros.
    const std::uint64_t counter = i + 1;
    const int k = std::min(kRows - 1, std::countr_zero(counter));
    running -= rows[k];
    rows[k] = normal(rng);
    running += rows[k];
    out[i] = running + normal(rng);
    energy += out[i] * out[i];
  }
  // Remove DC drift, then scale to unit RMS.
  double mean = 0.0;
  for (double v : out) mean += v;
  mean /= static_cast<double>(std::max<std::size_t>(n, 1));
  energy = 0.0;
  for (double& v : out) {
    v -= mean;
    energy += v * v;
  }
  const double rms = std::sqrt(energy / static_cast<double>(std::max<std::size_t>(n, 1)));
  if (rms > 0.0) {
    for (double& v : out) v /= rms;
  }
  return out;
}

SynthTask generate_task(const SynthProfile& p, std::uint64_t seed) {
  p.validate();
  std::mt19937_64 rng(splitmix(seed));
  std::uniform_real_distribution<double> u(0.0, 1.0);

  const int n_targets = static_cast<int>(
      std::lround(p.event_rate_per_min * p.recording_len_s / 60.0));
  const int n_distract = static_cast<int>(
      std::lround(p.distractor_rate_per_min * p.recording_len_s / 60.0));
  if (n_targets < 6) {
    throw Error(Errc::PlacementFailure,
                "profile " + p.name + " yields fewer than 6 target events");
  }

  SynthTask out;
  out.seed = seed;
  out.target_carrier_hz =
      p.carrier_min_hz + u(rng) * (p.carrier_max_hz - p.carrier_min_hz);

  std::vector<Placed> events;
  for (int i = 0; i < n_targets; ++i) {
    const double dur =
        sample_duration(rng, p.min_duration_s, p.max_duration_s, p.duration_shape);
    const double carrier =
        out.target_carrier_hz * (1.0 + p.carrier_jitter * (2.0 * u(rng) - 1.0));
    const double snr =
        p.snr_spread_db > 0.0 ? p.snr_db - p.snr_spread_db * u(rng) : p.snr_db;
    events.push_back({0.0, dur, true, carrier, snr});
  }
  const double nyq = p.sample_rate / 2.0;
  for (int i = 0; i < n_distract; ++i) {
    const double dur = sample_duration(rng, p.distractor_min_duration_s,
                                       p.distractor_max_duration_s,
                                       DurationShape::Uniform);
    double carrier = 0.0;
    for (int attempt = 0; attempt < 1000; ++attempt) {
      carrier = 300.0 + u(rng) * (0.85 * nyq - 300.0);
      const double span =
          p.distractor_kind == EventKind::Chirp ? p.chirp_span_hz : 0.0;
      const double target_hi = out.target_carrier_hz * (1.0 + p.carrier_jitter) +
                               (p.kind == EventKind::Chirp ? p.chirp_span_hz : 0.0);
      const double target_lo = out.target_carrier_hz * (1.0 - p.carrier_jitter);
      if (carrier + span < target_lo - kMinCarrierSeparationHz ||
          carrier > target_hi + kMinCarrierSeparationHz) {
        break;
      }
      carrier = 0.0;
    }
    if (carrier == 0.0) {
      throw Error(Errc::PlacementFailure, "no distractor carrier available");
    }
    events.push_back({0.0, dur, false, carrier, p.snr_db});
  }
  std::shuffle(events.begin(), events.end(), rng);

  // Lay out events in order; spread the free time over the n+1 gaps.
  double busy = 0.0;
  for (const auto& e : events) busy += e.duration_s;
  const double free = p.recording_len_s - p.lead_in_s - busy -
                      p.min_gap_s * static_cast<double>(events.size() + 1);
  if (free < 0.0) {
    throw Error(Errc::PlacementFailure,
                "profile " + p.name + ": events do not fit the recording");
  }
  std::vector<double> cuts(events.size());
  for (double& c : cuts) c = u(rng) * free;
  std::sort(cuts.begin(), cuts.end());
  double t = p.lead_in_s;
  double prev_cut = 0.0;
  for (std::size_t i = 0; i < events.size(); ++i) {
    t += p.min_gap_s + (cuts[i] - prev_cut);
    prev_cut = cuts[i];
    events[i].start_s = t;
    t += events[i].duration_s;
  }

  const int sr = p.sample_rate;
  const auto n_samples =
      static_cast<std::size_t>(std::llround(p.recording_len_s * sr));
  std::vector<double> signal =
      p.background == NoiseColor::Pink
          ? pink_noise(n_samples, splitmix(seed ^ 0xABCDEFull))
          : [&] {
              std::mt19937_64 nrng(splitmix(seed ^ 0xABCDEFull));
              std::normal_distribution<double> normal(0.0, 1.0);
              std::vector<double> w(n_samples);
              for (double& v : w) v = normal(nrng);
              return w;
            }();
  for (double& v : signal) v *= p.noise_rms;

  for (const auto& e : events) {
    // Tone power A^2/2 sits snr_db above the background power.
    const double amplitude =
        p.noise_rms * std::sqrt(2.0) * std::pow(10.0, e.snr_db / 20.0);
    const auto start = static_cast<std::size_t>(std::llround(e.start_s * sr));
    const auto len = static_cast<std::size_t>(std::llround(e.duration_s * sr));
    const EventKind kind = e.target ? p.kind : p.distractor_kind;
    render_event(signal, sr, start, len, kind, e.carrier_hz, amplitude, p, rng);
    task::AnnotationEvent ev{static_cast<double>(start) / sr,
                             static_cast<double>(start + len) / sr,
                             task::EventLabel::Pos};
    (e.target ? out.annotations : out.distractors).push_back(ev);
  }
  out.waveform.samples = std::move(signal);
  out.waveform.sample_rate = sr;
  return out;
}

task::Manifest generate_corpus(const std::vector<SynthProfile>& profiles,
                               int n_train, int n_test, std::uint64_t seed,
                               const std::filesystem::path& out_dir) {
  if (profiles.empty()) throw Error(Errc::InvalidConfig, "no profiles given");
  if (n_train < 1 || n_test < 1) {
    throw Error(Errc::InvalidConfig, "need n_train >= 1 and n_test >= 1");
  }
  std::filesystem::create_directories(out_dir);
  task::Manifest manifest;
  manifest.base_dir = out_dir;
  int k = 0;
  auto emit = [&](const std::string& split, int index) {
    const SynthProfile& prof = profiles[static_cast<std::size_t>(k) % profiles.size()];
    const std::uint64_t task_seed = splitmix(seed + 7919ull * static_cast<std::uint64_t>(k));
    ++k;
    std::ostringstream id;
    id << split << '_' << std::setw(3) << std::setfill('0') << index << '_'
       << prof.name;
    const SynthTask t = generate_task(prof, task_seed);
    audio::write_wav(out_dir / (id.str() + ".wav"), t.waveform);
    task::save_annotations(out_dir / (id.str() + ".csv"), t.annotations);
    manifest.entries.push_back({id.str(), id.str() + ".wav", id.str() + ".csv",
                                5, split, prof.name});
  };
  for (int i = 0; i < n_train; ++i) emit("train", i);
  for (int i = 0; i < n_test; ++i) emit("test", i);
  task::save_manifest(out_dir / "manifest.json", manifest);
  return manifest;
}

}  // namespace fsbed::synth
