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

#include <gtest/gtest.h>

#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <numbers>
#include <vector>

#include "fsbed/audio.hpp"
#include "fsbed/common.hpp"

namespace {

using fsbed::Errc;
using fsbed::audio::SampleFormat;
using fsbed::audio::Waveform;

// Hand-assembled RIFF/WAVE buffer with a 16-byte fmt chunk.
std::vector<std::uint8_t> raw_wav(std::uint16_t format_tag, std::uint16_t channels,
                                  std::uint32_t rate, std::uint16_t bits,
                                  const std::vector<std::uint8_t>& data) {
  std::vector<std::uint8_t> out;
  auto put = [&](std::uint64_t v, int n) {
    for (int i = 0; i < n; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  };
  auto tag = [&](const char* s) { out.insert(out.end(), s, s + 4); };
  tag("RIFF");
  put(36 + data.size(), 4);
  tag("WAVE");
  tag("fmt ");
  put(16, 4);
  put(format_tag, 2);
  put(channels, 2);
  put(rate, 4);
  put(rate * channels * bits / 8, 4);
  put(channels * bits / 8, 2);
  put(bits, 2);
  tag("data");
  put(data.size(), 4);
  out.insert(out.end(), data.begin(), data.end());
  return out;
}

std::vector<std::uint8_t> pcm16(const std::vector<std::int16_t>& v) {
  std::vector<std::uint8_t> b;
  for (std::int16_t s : v) {
    const auto u = static_cast<std::uint16_t>(s);
    b.push_back(static_cast<std::uint8_t>(u & 0xff));
    b.push_back(static_cast<std::uint8_t>(u >> 8));
  }
  return b;
}

template <typename F>
Errc code_of(F&& f) {
  try {
    f();
  } catch (const fsbed::Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return Errc::Io;
}

}  // namespace

TEST(Wav, Pcm16MonoScaling) {
  const auto bytes = raw_wav(1, 1, 16000, 16, pcm16({0, 16384, -16384}));
  const Waveform w = fsbed::audio::decode_wav(bytes);
  ASSERT_EQ(w.samples.size(), 3u);
  EXPECT_EQ(w.sample_rate, 16000);
  EXPECT_NEAR(w.samples[0], 0.0, 1e-4);
  EXPECT_NEAR(w.samples[1], 0.5, 1e-4);
  EXPECT_NEAR(w.samples[2], -0.5, 1e-4);
}

TEST(Wav, IdenticalStereoMatchesMono) {
  const std::vector<std::int16_t> mono = {100, -2000, 30000, 7};
  std::vector<std::int16_t> stereo;
  for (auto s : mono) {
    stereo.push_back(s);
    stereo.push_back(s);
  }
  const Waveform a = fsbed::audio::decode_wav(raw_wav(1, 1, 8000, 16, pcm16(mono)));
  const Waveform b = fsbed::audio::decode_wav(raw_wav(1, 2, 8000, 16, pcm16(stereo)));
  EXPECT_EQ(a.samples, b.samples);
}

TEST(Wav, OppositeChannelsCancel) {
  const std::vector<double> frames = {1.0, -1.0, 1.0, -1.0, 1.0, -1.0};
  for (auto fmt : {SampleFormat::Float32, SampleFormat::Pcm24, SampleFormat::Pcm32}) {
    const auto bytes = fsbed::audio::encode_wav(frames, 2, 16000, fmt);
    const Waveform w = fsbed::audio::decode_wav(bytes);
    ASSERT_EQ(w.samples.size(), 3u);
    for (double s : w.samples) EXPECT_NEAR(s, 0.0, 1e-6);
  }
}

TEST(Wav, FormatsRoundTrip) {
  std::vector<double> x;
  for (int i = 0; i < 200; ++i) x.push_back(0.9 * std::sin(0.05 * i));
  const struct {
    SampleFormat fmt;
    double tol;
  } cases[] = {{SampleFormat::Pcm16, 1e-4},
               {SampleFormat::Pcm24, 1e-6},
               {SampleFormat::Pcm32, 1e-8},
               {SampleFormat::Float32, 1e-7}};
  for (const auto& c : cases) {
    const Waveform w =
        fsbed::audio::decode_wav(fsbed::audio::encode_wav(x, 1, 22050, c.fmt));
    ASSERT_EQ(w.samples.size(), x.size());
    EXPECT_EQ(w.sample_rate, 22050);
    for (std::size_t i = 0; i < x.size(); ++i) EXPECT_NEAR(w.samples[i], x[i], c.tol);
  }
}

TEST(Wav, FileRoundTrip) {
  Waveform w{{0.25, -0.125, 0.5}, 16000};
  const auto path = std::filesystem::temp_directory_path() / "fsbed_audio_rt.wav";
  fsbed::audio::write_wav(path, w);
  const Waveform r = fsbed::audio::load_wav(path);
  std::filesystem::remove(path);
  EXPECT_EQ(r.samples, w.samples);
  EXPECT_EQ(r.sample_rate, 16000);
}

TEST(Wav, Errors) {
  auto bytes = fsbed::audio::encode_wav(std::vector<double>{0.1, 0.2}, 1, 16000,
                                        SampleFormat::Pcm16);
  auto adpcm = bytes;
  adpcm[20] = 2;  // format tag
  EXPECT_EQ(code_of([&] { fsbed::audio::decode_wav(adpcm); }),
            Errc::UnsupportedEncoding);

  auto riff = bytes;
  std::memcpy(riff.data(), "RIFX", 4);
  EXPECT_EQ(code_of([&] { fsbed::audio::decode_wav(riff); }), Errc::CorruptHeader);

  const std::vector<std::uint8_t> truncated(bytes.begin(), bytes.begin() + 20);
  EXPECT_EQ(code_of([&] { fsbed::audio::decode_wav(truncated); }),
            Errc::CorruptHeader);

  EXPECT_EQ(code_of([&] { fsbed::audio::decode_wav(raw_wav(1, 1, 16000, 16, {})); }),
            Errc::EmptyAudio);
  EXPECT_EQ(code_of([&] { fsbed::audio::load_wav("/nonexistent/x.wav"); }), Errc::Io);
}

TEST(Resample, EqualRateIsIdentity) {
  Waveform w{{0.1, -0.3, 0.7, 0.0, 0.2}, 16000};
  const Waveform r = fsbed::audio::resample(w, 16000);
  EXPECT_EQ(r.samples, w.samples);
  EXPECT_EQ(r.sample_rate, 16000);
}

TEST(Resample, LengthRule) {
  Waveform w{std::vector<double>(44101, 0.0), 44100};
  EXPECT_EQ(fsbed::audio::resample(w, 16000).samples.size(),
            static_cast<std::size_t>(std::lround(44101.0 * 16000 / 44100)));
}

TEST(Resample, PreservesDc) {
  Waveform w{std::vector<double>(32000, 1.0), 32000};
  const Waveform r = fsbed::audio::resample(w, 16000);
  ASSERT_EQ(r.samples.size(), 16000u);
  for (std::size_t i = 200; i + 200 < r.samples.size(); ++i) {
    ASSERT_NEAR(r.samples[i], 1.0, 1e-3) << i;
  }
}

TEST(Resample, Sine440Downsampled) {
  constexpr double f = 440.0;
  Waveform w;
  w.sample_rate = 32000;
  for (int i = 0; i < 32000; ++i) {
    w.samples.push_back(std::sin(2.0 * std::numbers::pi * f * i / 32000.0));
  }
  const Waveform r = fsbed::audio::resample(w, 16000);
  for (std::size_t n = 200; n + 200 < r.samples.size(); ++n) {
    const double expect = std::sin(2.0 * std::numbers::pi * f * n / 16000.0);
    ASSERT_NEAR(r.samples[n], expect, 0.01) << n;
  }
}

TEST(Resample, UpThenDownRoundTrip) {
  Waveform w;
  w.sample_rate = 16000;
  for (int i = 0; i < 8000; ++i) {
    const double t = i / 16000.0;
    w.samples.push_back(0.5 * std::sin(2 * std::numbers::pi * 300 * t) +
                        0.3 * std::sin(2 * std::numbers::pi * 2100 * t + 0.4));
  }
  const Waveform back =
      fsbed::audio::resample(fsbed::audio::resample(w, 48000), 16000);
  ASSERT_EQ(back.samples.size(), w.samples.size());
  for (std::size_t i = 300; i + 300 < w.samples.size(); ++i) {
    ASSERT_NEAR(back.samples[i], w.samples[i], 1e-3) << i;
  }
}
