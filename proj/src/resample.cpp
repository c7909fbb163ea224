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

#include <cmath>
#include <numbers>
#include <numeric>

#include "fsbed/audio.hpp"
#include "fsbed/common.hpp"

namespace fsbed::audio {
namespace {

constexpr int kZeroCrossings = 32;
constexpr double kRolloff = 0.95;
constexpr double kKaiserBeta = 9.0;
constexpr std::int64_t kMaxCachedPhases = 4096;

double bessel_i0(double x) {
  double sum = 1.0;
  double term = 1.0;
  const double q = x * x / 4.0;
  for (int k = 1; k < 64; ++k) {
    term *= q / (static_cast<double>(k) * k);
    sum += term;
    if (term < sum * 1e-17) break;
  }
  return sum;
}

// Windowed-sinc taps for one fractional delay. Offsets run from -reach+1 to
// reach relative to floor(t); the taps are renormalized to unit sum so DC
// passes exactly.
class PolyphaseKernel {
 public:
  PolyphaseKernel(double cutoff, std::int64_t phases)
      : cutoff_(cutoff),
        half_width_(kZeroCrossings / cutoff),
        reach_(static_cast<int>(std::ceil(half_width_))),
        phases_(phases) {
    if (phases_ <= kMaxCachedPhases) {
      table_.resize(static_cast<std::size_t>(phases_));
      for (std::int64_t p = 0; p < phases_; ++p) {
        table_[p] = compute(static_cast<double>(p) / phases_);
      }
    }
  }

  int reach() const { return reach_; }

  const std::vector<double>& taps(std::int64_t phase,
                                  std::vector<double>& scratch) const {
    if (!table_.empty()) return table_[static_cast<std::size_t>(phase)];
    scratch = compute(static_cast<double>(phase) / phases_);
    return scratch;
  }

 private:
  std::vector<double> compute(double frac) const {
    std::vector<double> h(2 * reach_);
    const double norm_beta = bessel_i0(kKaiserBeta);
    double sum = 0.0;
    for (int j = -reach_ + 1; j <= reach_; ++j) {
      const double tau = frac - j;
      double v = 0.0;
      if (std::abs(tau) < half_width_) {
        const double x = cutoff_ * tau;
        const double sinc =
            x == 0.0 ? 1.0
                     : std::sin(std::numbers::pi * x) / (std::numbers::pi * x);
        const double r = tau / half_width_;
        const double win = bessel_i0(kKaiserBeta * std::sqrt(1.0 - r * r)) /
                           norm_beta;
        v = cutoff_ * sinc * win;
      }
      h[j + reach_ - 1] = v;
      sum += v;
    }
    for (double& v : h) v /= sum;
    return h;
  }

  double cutoff_;
  double half_width_;
  int reach_;
  std::int64_t phases_;
  std::vector<std::vector<double>> table_;
};

}  // namespace

Waveform resample(const Waveform& wave, int target_rate) {
  if (target_rate <= 0) {
    throw Error(Errc::InvalidConfig, "target rate must be positive");
  }
  if (wave.sample_rate <= 0) {
    throw Error(Errc::InvalidConfig, "source rate must be positive");
  }
  if (wave.sample_rate == target_rate) return wave;

  const std::int64_t g = std::gcd(wave.sample_rate, target_rate);
  const std::int64_t up = target_rate / g;
  const std::int64_t down = wave.sample_rate / g;
  const double cutoff =
      kRolloff * std::min(1.0, static_cast<double>(up) / down);
  const PolyphaseKernel kernel(cutoff, up);

  const auto n_in = static_cast<std::int64_t>(wave.samples.size());
  const auto n_out = static_cast<std::int64_t>(std::llround(
      static_cast<double>(n_in) * target_rate / wave.sample_rate));

  Waveform out;
  out.sample_rate = target_rate;
  out.samples.resize(static_cast<std::size_t>(n_out));
  const int reach = kernel.reach();
  std::vector<double> scratch;
  for (std::int64_t n = 0; n < n_out; ++n) {
    const std::int64_t pos = n * down;
    const std::int64_t base = pos / up;
    const std::vector<double>& h = kernel.taps(pos % up, scratch);
    double acc = 0.0;
    for (int j = -reach + 1; j <= reach; ++j) {
      const std::int64_t i = base + j;
      if (i < 0 || i >= n_in) continue;
      acc += h[j + reach - 1] * wave.samples[static_cast<std::size_t>(i)];
    }
    out.samples[static_cast<std::size_t>(n)] = acc;
  }
  return out;
}

}  // namespace fsbed::audio
