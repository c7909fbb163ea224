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

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

#include "fsbed/audio.hpp"
#include "fsbed/common.hpp"

namespace fsbed::audio {
namespace {

constexpr std::uint16_t kFormatPcm = 0x0001;
constexpr std::uint16_t kFormatFloat = 0x0003;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::size_t remaining() const { return bytes_.size() - pos_; }
  std::size_t position() const { return pos_; }

  void need(std::size_t n) const {
    if (remaining() < n) throw Error(Errc::CorruptHeader, "truncated WAV data");
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = bytes_[pos_] | (bytes_[pos_ + 1] << 8) |
                      (bytes_[pos_ + 2] << 16) |
                      (static_cast<std::uint32_t>(bytes_[pos_ + 3]) << 24);
    pos_ += 4;
    return v;
  }
  std::uint16_t u16() {
    need(2);
    std::uint16_t v = static_cast<std::uint16_t>(bytes_[pos_] |
                                                 (bytes_[pos_ + 1] << 8));
    pos_ += 2;
    return v;
  }
  std::string tag() {
    need(4);
    std::string t(reinterpret_cast<const char*>(bytes_.data() + pos_), 4);
    pos_ += 4;
    return t;
  }
  std::span<const std::uint8_t> take(std::size_t n) {
    need(n);
    auto s = bytes_.subspan(pos_, n);
    pos_ += n;
    return s;
  }
  void skip(std::size_t n) { pos_ += std::min(n, remaining()); }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

struct FormatChunk {
  std::uint16_t tag = 0;
  int channels = 0;
  int sample_rate = 0;
  int bits = 0;
};

double read_sample(const std::uint8_t* p, const FormatChunk& fmt) {
  switch (fmt.bits) {
    case 16: {
      auto v = static_cast<std::int16_t>(p[0] | (p[1] << 8));
      return v / 32768.0;
    }
    case 24: {
      std::int32_t v = p[0] | (p[1] << 8) | (p[2] << 16);
      if (v & 0x800000) v |= ~0xFFFFFF;
      return v / 8388608.0;
    }
    case 32: {
      std::uint32_t raw = p[0] | (p[1] << 8) | (p[2] << 16) |
                          (static_cast<std::uint32_t>(p[3]) << 24);
      if (fmt.tag == kFormatFloat) return std::bit_cast<float>(raw);
      return static_cast<std::int32_t>(raw) / 2147483648.0;
    }
  }
  throw Error(Errc::UnsupportedEncoding, "unsupported bit depth");
}

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(v & 0xFF);
  out.push_back(v >> 8);
}
void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back((v >> (8 * i)) & 0xFF);
}
void put_tag(std::vector<std::uint8_t>& out, const char* t) {
  out.insert(out.end(), t, t + 4);
}

}  // namespace

Waveform decode_wav(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  if (r.remaining() < 12 || r.tag() != "RIFF") {
    throw Error(Errc::CorruptHeader, "missing RIFF tag");
  }
  r.u32();
  if (r.tag() != "WAVE") throw Error(Errc::CorruptHeader, "missing WAVE tag");

  FormatChunk fmt;
  bool have_fmt = false;
  std::span<const std::uint8_t> data;
  bool have_data = false;
  while (r.remaining() >= 8 && !have_data) {
    std::string id = r.tag();
    std::uint32_t size = r.u32();
    if (id == "fmt ") {
      if (size < 16) throw Error(Errc::CorruptHeader, "short fmt chunk");
      auto body = r.take(size);
      ByteReader f(body);
      fmt.tag = f.u16();
      fmt.channels = f.u16();
      fmt.sample_rate = static_cast<int>(f.u32());
      f.u32();  // byte rate
      f.u16();  // block align
      fmt.bits = f.u16();
      if (fmt.tag == kFormatExtensible) {
        if (size < 40) throw Error(Errc::CorruptHeader, "short extensible fmt");
        f.u16();  // cb size
        f.u16();  // valid bits
        f.u32();  // channel mask
        fmt.tag = f.u16();  // first two bytes of the subformat GUID
      }
      if (size % 2) r.skip(1);
      have_fmt = true;
    } else if (id == "data") {
      if (!have_fmt) throw Error(Errc::CorruptHeader, "data before fmt");
      // Some writers leave the size field at 0 or 0xFFFFFFFF for streams.
      std::size_t n = std::min<std::size_t>(size, r.remaining());
      if (size == 0 || size == 0xFFFFFFFFu) n = r.remaining();
      data = r.take(n);
      have_data = true;
    } else {
      r.skip(size + (size % 2));
    }
  }
  if (!have_fmt) throw Error(Errc::CorruptHeader, "no fmt chunk");
  if (!have_data) throw Error(Errc::CorruptHeader, "no data chunk");

  const bool int_ok = fmt.tag == kFormatPcm &&
                      (fmt.bits == 16 || fmt.bits == 24 || fmt.bits == 32);
  const bool float_ok = fmt.tag == kFormatFloat && fmt.bits == 32;
  if (!int_ok && !float_ok) {
    throw Error(Errc::UnsupportedEncoding,
                "format tag " + std::to_string(fmt.tag) + " with " +
                    std::to_string(fmt.bits) + " bits");
  }
  if (fmt.channels < 1 || fmt.channels > 8) {
    throw Error(Errc::UnsupportedEncoding,
                std::to_string(fmt.channels) + " channels");
  }
  if (fmt.sample_rate <= 0) throw Error(Errc::CorruptHeader, "sample rate 0");

  const std::size_t block = static_cast<std::size_t>(fmt.channels) * fmt.bits / 8;
  const std::size_t frames = data.size() / block;
  if (frames == 0) throw Error(Errc::EmptyAudio, "no samples");

  Waveform wave;
  wave.sample_rate = fmt.sample_rate;
  wave.samples.resize(frames);
  const std::size_t width = fmt.bits / 8;
  for (std::size_t i = 0; i < frames; ++i) {
    double acc = 0.0;
    for (int c = 0; c < fmt.channels; ++c) {
      acc += read_sample(data.data() + i * block + c * width, fmt);
    }
    const double v = acc / fmt.channels;
    if (!std::isfinite(v)) {
      throw Error(Errc::NonFiniteValue, "non-finite float sample");
    }
    wave.samples[i] = v;
  }
  return wave;
}

Waveform load_wav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::Io, "cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return decode_wav(bytes);
}

std::vector<std::uint8_t> encode_wav(std::span<const double> interleaved,
                                     int channels, int sample_rate,
                                     SampleFormat format) {
  const int bits = format == SampleFormat::Pcm16   ? 16
                   : format == SampleFormat::Pcm24 ? 24
                                                   : 32;
  const std::uint16_t tag =
      format == SampleFormat::Float32 ? kFormatFloat : kFormatPcm;
  const std::uint32_t data_bytes =
      static_cast<std::uint32_t>(interleaved.size() * (bits / 8));

  std::vector<std::uint8_t> out;
  out.reserve(44 + data_bytes);
  put_tag(out, "RIFF");
  put_u32(out, 36 + data_bytes);
  put_tag(out, "WAVE");
  put_tag(out, "fmt ");
  put_u32(out, 16);
  put_u16(out, tag);
  put_u16(out, static_cast<std::uint16_t>(channels));
  put_u32(out, static_cast<std::uint32_t>(sample_rate));
  put_u32(out, static_cast<std::uint32_t>(sample_rate * channels * bits / 8));
  put_u16(out, static_cast<std::uint16_t>(channels * bits / 8));
  put_u16(out, static_cast<std::uint16_t>(bits));
  put_tag(out, "data");
  put_u32(out, data_bytes);

  for (double x : interleaved) {
    if (format == SampleFormat::Float32) {
      put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(x)));
      continue;
    }
    const double c = std::clamp(x, -1.0, 1.0);
    const double scale = std::ldexp(1.0, bits - 1);
    const auto q = static_cast<std::int64_t>(std::clamp(
        std::llround(c * scale), -static_cast<long long>(scale),
        static_cast<long long>(scale) - 1));
    for (int b = 0; b < bits / 8; ++b) out.push_back((q >> (8 * b)) & 0xFF);
  }
  return out;
}

void write_wav(const std::filesystem::path& path, const Waveform& wave,
               SampleFormat format) {
  auto bytes = encode_wav(wave.samples, 1, wave.sample_rate, format);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::Io, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
}

}  // namespace fsbed::audio
