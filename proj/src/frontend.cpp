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

#include "fsbed/frontend.hpp"

#include <fftw3.h>

#include <bit>
#include <cmath>
#include <fstream>
#include <mutex>
#include <numbers>

namespace fsbed::audio {
namespace {

// FFTW planning is not thread-safe; execution through the new-array
// interface is.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

class RealFft {
 public:
  explicit RealFft(int n) : n_(n) {
    in_ = static_cast<double*>(fftw_malloc(sizeof(double) * n));
    out_ = static_cast<fftw_complex*>(
        fftw_malloc(sizeof(fftw_complex) * (n / 2 + 1)));
    std::lock_guard lock(planner_mutex());
    plan_ = fftw_plan_dft_r2c_1d(n, in_, out_, FFTW_ESTIMATE);
  }
  ~RealFft() {
    {
      std::lock_guard lock(planner_mutex());
      fftw_destroy_plan(plan_);
    }
    fftw_free(in_);
    fftw_free(out_);
  }
  RealFft(const RealFft&) = delete;
  RealFft& operator=(const RealFft&) = delete;

  double* input() { return in_; }
  const fftw_complex* output() const { return out_; }
  void run() { fftw_execute(plan_); }

 private:
  int n_;
  double* in_ = nullptr;
  fftw_complex* out_ = nullptr;
  fftw_plan plan_ = nullptr;
};

void put_u32(std::ostream& out, std::uint32_t v) {
  char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
  out.write(b, 4);
}

std::uint32_t get_u32(std::istream& in) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) {
    throw Error(Errc::CorruptHeader, "truncated PCEN dump");
  }
  return b[0] | (b[1] << 8) | (b[2] << 16) |
         (static_cast<std::uint32_t>(b[3]) << 24);
}

}  // namespace

int FrontendConfig::frame_length_samples() const {
  return static_cast<int>(std::lround(frame_length_ms * target_rate / 1000.0));
}

int FrontendConfig::frame_shift_samples() const {
  return static_cast<int>(std::lround(frame_shift_ms * target_rate / 1000.0));
}

void FrontendConfig::validate() const {
  auto fail = [](const std::string& what) {
    throw Error(Errc::InvalidConfig, "frontend: " + what);
  };
  if (target_rate <= 0) fail("target_rate must be positive");
  if (frame_shift_samples() < 1) fail("frame shift below one sample");
  if (frame_shift_ms > frame_length_ms) fail("frame_shift exceeds frame_length");
  if (n_mels < 1) fail("n_mels must be >= 1");
  if (fft_size < frame_length_samples()) fail("fft_size below frame length");
  if (fmin < 0.0 || fmax <= fmin || fmax > target_rate / 2.0) {
    fail("need 0 <= fmin < fmax <= Nyquist");
  }
  if (!(pcen.alpha > 0.0 && pcen.alpha <= 1.0)) fail("pcen alpha in (0,1]");
  if (!(pcen.root > 0.0)) fail("pcen root must be positive");
  if (!(pcen.floor > 0.0)) fail("pcen floor must be positive");
  if (!(pcen.smoothing > 0.0 && pcen.smoothing <= 1.0)) {
    fail("pcen smoothing in (0,1]");
  }
  if (pcen.delta < 0.0) fail("pcen delta must be nonnegative");
}

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }

double mel_to_hz(double mel) {
  return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0);
}

int frame_count(std::size_t n_samples, const FrontendConfig& cfg) {
  const auto len = static_cast<std::size_t>(cfg.frame_length_samples());
  if (n_samples < len) return 0;
  return 1 + static_cast<int>((n_samples - len) /
                              static_cast<std::size_t>(cfg.frame_shift_samples()));
}

std::vector<double> mel_center_frequencies(const FrontendConfig& cfg) {
  const double lo = hz_to_mel(cfg.fmin);
  const double hi = hz_to_mel(cfg.fmax);
  std::vector<double> centers(cfg.n_mels);
  for (int m = 0; m < cfg.n_mels; ++m) {
    centers[m] = mel_to_hz(lo + (hi - lo) * (m + 1) / (cfg.n_mels + 1));
  }
  return centers;
}

Matrix mel_filterbank(const FrontendConfig& cfg) {
  const int n_bins = cfg.fft_size / 2 + 1;
  const double lo = hz_to_mel(cfg.fmin);
  const double hi = hz_to_mel(cfg.fmax);
  std::vector<double> edges(cfg.n_mels + 2);
  for (int i = 0; i < cfg.n_mels + 2; ++i) {
    edges[i] = mel_to_hz(lo + (hi - lo) * i / (cfg.n_mels + 1));
  }
  Matrix fb = Matrix::Zero(cfg.n_mels, n_bins);
  for (int m = 0; m < cfg.n_mels; ++m) {
    const double left = edges[m], center = edges[m + 1], right = edges[m + 2];
    for (int k = 0; k < n_bins; ++k) {
      const double f = static_cast<double>(k) * cfg.target_rate / cfg.fft_size;
      if (f > left && f <= center) {
        fb(m, k) = (f - left) / (center - left);
      } else if (f > center && f < right) {
        fb(m, k) = (right - f) / (right - center);
      }
    }
  }
  return fb;
}

Matrix mel_energies(const Waveform& wave, const FrontendConfig& cfg) {
  cfg.validate();
  if (wave.sample_rate != cfg.target_rate) {
    throw Error(Errc::InvalidConfig,
                "waveform rate " + std::to_string(wave.sample_rate) +
                    " differs from frontend rate " +
                    std::to_string(cfg.target_rate));
  }
  const int n_frames = frame_count(wave.samples.size(), cfg);
  if (n_frames == 0) {
    throw Error(Errc::TooShort, "signal shorter than one frame");
  }
  const int len = cfg.frame_length_samples();
  const int shift = cfg.frame_shift_samples();
  const int n_bins = cfg.fft_size / 2 + 1;

  std::vector<double> window(len);
  for (int i = 0; i < len; ++i) {
    window[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * i / len);
  }
  const Matrix fb = mel_filterbank(cfg);

  RealFft fft(cfg.fft_size);
  Matrix power(n_frames, n_bins);
  for (int t = 0; t < n_frames; ++t) {
    double* in = fft.input();
    const double* src = wave.samples.data() + static_cast<std::size_t>(t) * shift;
    for (int i = 0; i < len; ++i) in[i] = src[i] * window[i];
    for (int i = len; i < cfg.fft_size; ++i) in[i] = 0.0;
    fft.run();
    const fftw_complex* out = fft.output();
    for (int k = 0; k < n_bins; ++k) {
      power(t, k) = out[k][0] * out[k][0] + out[k][1] * out[k][1];
    }
  }
  return power * fb.transpose();
}

Matrix pcen(const Matrix& energies, const PcenParams& p) {
  Matrix out(energies.rows(), energies.cols());
  if (energies.rows() == 0) return out;
  const double offset = std::pow(p.delta, p.root);
  Eigen::RowVectorXd smooth = energies.row(0);
  for (Eigen::Index t = 0; t < energies.rows(); ++t) {
    if (t > 0) {
      smooth = (1.0 - p.smoothing) * smooth + p.smoothing * energies.row(t);
    }
    for (Eigen::Index m = 0; m < energies.cols(); ++m) {
      const double gain = std::pow(p.floor + smooth(m), p.alpha);
      const double v =
          std::pow(energies(t, m) / gain + p.delta, p.root) - offset;
      out(t, m) = v < 0.0 ? 0.0 : v;
    }
  }
  return out;
}

PcenGram mel_pcen(const Waveform& wave, const FrontendConfig& cfg) {
  PcenGram gram;
  gram.values = pcen(mel_energies(wave, cfg), cfg.pcen);
  gram.frame_shift_ms = cfg.frame_shift_ms;
  return gram;
}

void write_pcen_dump(const std::filesystem::path& path, const PcenGram& gram) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::Io, "cannot write " + path.string());
  out.write("PCEN", 4);
  put_u32(out, static_cast<std::uint32_t>(gram.n_frames()));
  put_u32(out, static_cast<std::uint32_t>(gram.n_mels()));
  put_u32(out, 0);
  for (Eigen::Index t = 0; t < gram.values.rows(); ++t) {
    for (Eigen::Index m = 0; m < gram.values.cols(); ++m) {
      put_u32(out, std::bit_cast<std::uint32_t>(
                       static_cast<float>(gram.values(t, m))));
    }
  }
}

PcenGram read_pcen_dump(const std::filesystem::path& path,
                        double frame_shift_ms) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::Io, "cannot open " + path.string());
  char magic[4];
  if (!in.read(magic, 4) || std::string(magic, 4) != "PCEN") {
    throw Error(Errc::CorruptHeader, "bad PCEN magic");
  }
  const std::uint32_t frames = get_u32(in);
  const std::uint32_t mels = get_u32(in);
  get_u32(in);
  PcenGram gram;
  gram.frame_shift_ms = frame_shift_ms;
  gram.values.resize(frames, mels);
  for (std::uint32_t t = 0; t < frames; ++t) {
    for (std::uint32_t m = 0; m < mels; ++m) {
      gram.values(t, m) = std::bit_cast<float>(get_u32(in));
    }
  }
  return gram;
}

}  // namespace fsbed::audio
