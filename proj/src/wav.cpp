// Copyright 2026 The unitlm Authors.
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
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

#include "unitlm/audio.hpp"
#include "unitlm/error.hpp"

namespace unitlm {
namespace {

std::uint32_t ReadU32(const unsigned char* p) {
  return std::uint32_t(p[0]) | std::uint32_t(p[1]) << 8 |
         std::uint32_t(p[2]) << 16 | std::uint32_t(p[3]) << 24;
}

std::uint16_t ReadU16(const unsigned char* p) {
  return std::uint16_t(p[0] | p[1] << 8);
}

void PutU32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(char((v >> (8 * i)) & 0xff));
}

void PutU16(std::string& out, std::uint16_t v) {
  out.push_back(char(v & 0xff));
  out.push_back(char(v >> 8));
}

}  // namespace

Waveform LoadWav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) Fail(ErrorKind::kIo, "cannot open wav file: " + path.string());
  const std::vector<unsigned char> bytes{std::istreambuf_iterator<char>(in),
                                         std::istreambuf_iterator<char>()};
  const std::string where = " (" + path.string() + ")";
  if (bytes.size() < 12) Fail(ErrorKind::kFormat, "truncated header" + where);
  if (std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
    Fail(ErrorKind::kFormat, "not a RIFF/WAVE file" + where);
  }

  bool have_fmt = false;
  int channels = 0;
  int bits = 0;
  std::uint32_t rate = 0;
  std::size_t pos = 12;
  while (true) {
    if (pos + 8 > bytes.size()) Fail(ErrorKind::kFormat, "truncated header" + where);
    const unsigned char* chunk = bytes.data() + pos;
    const std::uint32_t size = ReadU32(chunk + 4);
    const std::size_t body = pos + 8;
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      if (size < 16 || body + 16 > bytes.size()) {
        Fail(ErrorKind::kFormat, "truncated header" + where);
      }
      const std::uint16_t format = ReadU16(bytes.data() + body);
      channels = ReadU16(bytes.data() + body + 2);
      rate = ReadU32(bytes.data() + body + 4);
      bits = ReadU16(bytes.data() + body + 14);
      if (format != 1) Fail(ErrorKind::kFormat, "unsupported encoding: not PCM" + where);
      if (channels != 1) {
        Fail(ErrorKind::kFormat,
             "unsupported channel count " + std::to_string(channels) + where);
      }
      if (bits != 16) {
        Fail(ErrorKind::kFormat,
             "unsupported sample width " + std::to_string(bits) + " bits" + where);
      }
      if (rate == 0) Fail(ErrorKind::kFormat, "zero sample rate" + where);
      have_fmt = true;
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      if (!have_fmt) Fail(ErrorKind::kFormat, "data chunk before fmt chunk" + where);
      if (body + size > bytes.size()) {
        Fail(ErrorKind::kFormat, "truncated data chunk" + where);
      }
      Waveform wave;
      wave.sample_rate = int(rate);
      const std::size_t count = size / 2;
      wave.samples.resize(count);
      for (std::size_t i = 0; i < count; ++i) {
        const auto raw = std::int16_t(ReadU16(bytes.data() + body + 2 * i));
        wave.samples[i] = float(raw) / 32768.0f;
      }
      return wave;
    }
    pos = body + size + (size & 1);
  }
}

void SaveWav(const std::filesystem::path& path, const Waveform& wave) {
  const auto count = std::uint32_t(wave.samples.size());
  std::string out;
  out.reserve(44 + 2 * std::size_t(count));
  out += "RIFF";
  PutU32(out, 36 + 2 * count);
  out += "WAVEfmt ";
  PutU32(out, 16);
  PutU16(out, 1);  // PCM
  PutU16(out, 1);  // mono
  PutU32(out, std::uint32_t(wave.sample_rate));
  PutU32(out, std::uint32_t(wave.sample_rate) * 2);
  PutU16(out, 2);
  PutU16(out, 16);
  out += "data";
  PutU32(out, 2 * count);
  for (float s : wave.samples) {
    const double clamped = std::clamp(double(s), -1.0, 1.0);
    const long v = std::lround(clamped * 32768.0);
    PutU16(out, std::uint16_t(std::int16_t(std::clamp(v, -32768L, 32767L))));
  }
  std::ofstream file(path, std::ios::binary);
  if (!file) Fail(ErrorKind::kIo, "cannot write wav file: " + path.string());
  file.write(out.data(), std::streamsize(out.size()));
  if (!file) Fail(ErrorKind::kIo, "short write: " + path.string());
}

}  // namespace unitlm
