// Copyright 2026 The SBSE Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "sbse/error.hpp"

namespace sbse {

constexpr int kSampleRateHz = 16000;

// Mono time-domain signal. Samples are dimensionless amplitudes with nominal
// range [-1, 1].
struct AudioClip {
  std::vector<double> samples;
  int sample_rate_hz = kSampleRateHz;

  std::size_t size() const { return samples.size(); }
  double duration_s() const {
    return static_cast<double>(samples.size()) / sample_rate_hz;
  }
};

inline bool all_finite(const AudioClip& clip) {
  for (double s : clip.samples) {
    if (!std::isfinite(s)) return false;
  }
  return true;
}

// Mean squared amplitude over the whole clip (silent gaps included).
inline double mean_power(const AudioClip& clip) {
  if (clip.samples.empty()) return 0.0;
  double acc = 0.0;
  for (double s : clip.samples) acc += s * s;
  return acc / static_cast<double>(clip.samples.size());
}

inline double rms(const AudioClip& clip) { return std::sqrt(mean_power(clip)); }

enum class WavEncoding { pcm16, float32 };

namespace wav_detail {

constexpr std::uint16_t kFormatPcm = 0x0001;
constexpr std::uint16_t kFormatIeeeFloat = 0x0003;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

inline std::uint16_t read_u16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}
inline std::uint32_t read_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) |
         (static_cast<std::uint32_t>(p[3]) << 24);
}
inline void put_u16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
}
inline void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

}  // namespace wav_detail

// Reads a RIFF/WAVE file. Accepted content: mono, 16 kHz, 16-bit integer PCM
// or 32-bit IEEE float. Integer samples are scaled by 1/32768. Unknown chunks
// are skipped.
inline AudioClip read_wav(const std::string& path) {
  using namespace wav_detail;

  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("read_wav: cannot open '" + path + "'");

  auto read_bytes = [&](unsigned char* buf, std::size_t n, const char* what) {
    if (!in.read(reinterpret_cast<char*>(buf), static_cast<std::streamsize>(n))) {
      throw IoError("read_wav: truncated file '" + path + "' while reading " + what);
    }
  };

  unsigned char hdr[12];
  read_bytes(hdr, 12, "RIFF header");
  if (std::memcmp(hdr, "RIFF", 4) != 0 || std::memcmp(hdr + 8, "WAVE", 4) != 0) {
    throw FormatError("read_wav: '" + path + "' is not a RIFF/WAVE file");
  }

  bool have_fmt = false;
  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  std::vector<unsigned char> data;
  bool have_data = false;

  unsigned char chunk_hdr[8];
  while (in.read(reinterpret_cast<char*>(chunk_hdr), 8)) {
    const std::uint32_t chunk_size = read_u32(chunk_hdr + 4);
    if (std::memcmp(chunk_hdr, "fmt ", 4) == 0) {
      if (chunk_size < 16) throw FormatError("read_wav: fmt chunk too small");
      std::vector<unsigned char> fmt(chunk_size);
      read_bytes(fmt.data(), chunk_size, "fmt chunk");
      format = read_u16(fmt.data());
      channels = read_u16(fmt.data() + 2);
      rate = read_u32(fmt.data() + 4);
      bits = read_u16(fmt.data() + 14);
      if (format == kFormatExtensible && chunk_size >= 40) {
        format = read_u16(fmt.data() + 24);  // first two bytes of SubFormat
      }
      have_fmt = true;
    } else if (std::memcmp(chunk_hdr, "data", 4) == 0) {
      data.resize(chunk_size);
      read_bytes(data.data(), chunk_size, "data chunk");
      have_data = true;
    } else {
      in.seekg(chunk_size + (chunk_size & 1), std::ios::cur);
      if (!in) throw IoError("read_wav: truncated file '" + path + "'");
      continue;
    }
    if (chunk_size & 1) in.seekg(1, std::ios::cur);
  }

  if (!have_fmt) throw FormatError("read_wav: missing fmt chunk in '" + path + "'");
  if (!have_data) throw IoError("read_wav: missing data chunk in '" + path + "'");
  if (channels != 1) {
    throw FormatError("read_wav: unsupported channel count " +
                      std::to_string(channels) + " (mono required)");
  }
  if (rate != kSampleRateHz) {
    throw FormatError("read_wav: unsupported sample rate " + std::to_string(rate) +
                      " (16000 required)");
  }

  AudioClip clip;
  clip.sample_rate_hz = static_cast<int>(rate);
  if (format == kFormatPcm && bits == 16) {
    if (data.size() % 2 != 0) throw IoError("read_wav: odd pcm16 data size");
    const std::size_t n = data.size() / 2;
    clip.samples.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      const auto v = static_cast<std::int16_t>(read_u16(data.data() + 2 * i));
      clip.samples[i] = static_cast<double>(v) / 32768.0;
    }
  } else if (format == kFormatIeeeFloat && bits == 32) {
    if (data.size() % 4 != 0) throw IoError("read_wav: odd float32 data size");
    const std::size_t n = data.size() / 4;
    clip.samples.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      std::uint32_t u = read_u32(data.data() + 4 * i);
      float f;
      std::memcpy(&f, &u, 4);
      clip.samples[i] = static_cast<double>(f);
    }
  } else {
    throw FormatError("read_wav: unsupported encoding (format tag " +
                      std::to_string(format) + ", " + std::to_string(bits) +
                      " bits); pcm16 or float32 required");
  }
  return clip;
}

// Writes a mono 16 kHz WAV. pcm16 hard-clips samples outside [-1, 1]; float32
// is lossless apart from the double->float rounding.
inline void write_wav(const AudioClip& clip, const std::string& path,
                      WavEncoding encoding = WavEncoding::float32) {
  using namespace wav_detail;

  std::string payload;
  if (encoding == WavEncoding::pcm16) {
    payload.reserve(clip.samples.size() * 2);
    for (double s : clip.samples) {
      double v = std::clamp(s, -1.0, 1.0) * 32768.0;
      auto q = static_cast<long>(std::lround(v));
      q = std::clamp<long>(q, -32768, 32767);
      put_u16(payload, static_cast<std::uint16_t>(static_cast<std::int16_t>(q)));
    }
  } else {
    payload.reserve(clip.samples.size() * 4);
    for (double s : clip.samples) {
      const float f = static_cast<float>(s);
      std::uint32_t u;
      std::memcpy(&u, &f, 4);
      put_u32(payload, u);
    }
  }

  const std::uint16_t format =
      encoding == WavEncoding::pcm16 ? kFormatPcm : kFormatIeeeFloat;
  const std::uint16_t bits = encoding == WavEncoding::pcm16 ? 16 : 32;
  const std::uint16_t block_align = bits / 8;  // mono
  const auto rate = static_cast<std::uint32_t>(clip.sample_rate_hz);

  std::string out;
  out.reserve(44 + payload.size());
  out += "RIFF";
  put_u32(out, static_cast<std::uint32_t>(36 + payload.size()));
  out += "WAVE";
  out += "fmt ";
  put_u32(out, 16);
  put_u16(out, format);
  put_u16(out, 1);  // channels
  put_u32(out, rate);
  put_u32(out, rate * block_align);
  put_u16(out, block_align);
  put_u16(out, bits);
  out += "data";
  put_u32(out, static_cast<std::uint32_t>(payload.size()));
  out += payload;

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("write_wav: cannot open '" + path + "' for writing");
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw IoError("write_wav: short write to '" + path + "'");
}

}  // namespace sbse
