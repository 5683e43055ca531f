// src/wav.cpp

// Copyright 2026 The msfser Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "msfser/wav.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>

#include "msfser/error.hpp"

namespace msfser {

namespace {

std::uint32_t ReadU32(const unsigned char *p) {
  return std::uint32_t(p[0]) | std::uint32_t(p[1]) << 8 | std::uint32_t(p[2]) << 16 |
         std::uint32_t(p[3]) << 24;
}

std::uint16_t ReadU16(const unsigned char *p) {
  return static_cast<std::uint16_t>(p[0] | p[1] << 8);
}

void PutU32(std::vector<unsigned char> &out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<unsigned char>(v >> (8 * i)));
}

void PutU16(std::vector<unsigned char> &out, std::uint16_t v) {
  out.push_back(static_cast<unsigned char>(v));
  out.push_back(static_cast<unsigned char>(v >> 8));
}

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

}  // namespace

void ValidateAudio(const AudioBuffer &audio) {
  if (audio.sample_rate <= 0) Fail(ErrorCode::kInvalidArgument, "sample rate must be positive");
  for (double s : audio.samples)
    if (!std::isfinite(s)) Fail(ErrorCode::kInvalidArgument, "audio contains non-finite samples");
}

AudioBuffer DecodeWav(const std::vector<unsigned char> &bytes) {
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0)
    Fail(ErrorCode::kUnsupportedAudio, "not a RIFF/WAVE file");

  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  bool have_fmt = false;
  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const unsigned char *chunk = bytes.data() + pos;
    std::uint32_t size = ReadU32(chunk + 4);
    std::size_t body = pos + 8;
    if (body + size > bytes.size()) size = static_cast<std::uint32_t>(bytes.size() - body);
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      if (size < 16) Fail(ErrorCode::kUnsupportedAudio, "fmt chunk too short");
      format = ReadU16(bytes.data() + body);
      channels = ReadU16(bytes.data() + body + 2);
      rate = ReadU32(bytes.data() + body + 4);
      bits = ReadU16(bytes.data() + body + 14);
      if (format == kFormatExtensible && size >= 26) format = ReadU16(bytes.data() + body + 24);
      have_fmt = true;
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      if (!have_fmt) Fail(ErrorCode::kUnsupportedAudio, "data chunk before fmt chunk");
      if (channels != 1)
        Fail(ErrorCode::kUnsupportedAudio,
             "only mono audio is supported (got " + std::to_string(channels) + " channels)");
      AudioBuffer audio;
      audio.sample_rate = static_cast<int>(rate);
      const unsigned char *p = bytes.data() + body;
      if (format == kFormatPcm && bits == 16) {
        audio.samples.resize(size / 2);
        for (std::size_t i = 0; i < audio.samples.size(); ++i)
          audio.samples[i] = static_cast<std::int16_t>(ReadU16(p + 2 * i)) / 32768.0;
      } else if (format == kFormatFloat && bits == 32) {
        audio.samples.resize(size / 4);
        for (std::size_t i = 0; i < audio.samples.size(); ++i) {
          std::uint32_t raw = ReadU32(p + 4 * i);
          float f;
          std::memcpy(&f, &raw, sizeof(f));
          audio.samples[i] = f;
        }
      } else {
        Fail(ErrorCode::kUnsupportedAudio, "unsupported encoding (format " +
                                               std::to_string(format) + ", " +
                                               std::to_string(bits) + " bits)");
      }
      ValidateAudio(audio);
      return audio;
    }
    pos = body + size + (size & 1u);
  }
  Fail(ErrorCode::kUnsupportedAudio, "no data chunk");
}

AudioBuffer ReadWav(const std::string &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) Fail(ErrorCode::kIo, "cannot open " + path);
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  return DecodeWav(bytes);
}

std::vector<unsigned char> EncodeWavPcm16(const AudioBuffer &audio) {
  ValidateAudio(audio);
  const std::uint32_t data_bytes = static_cast<std::uint32_t>(audio.samples.size() * 2);
  std::vector<unsigned char> out;
  out.reserve(44 + data_bytes);
  out.insert(out.end(), {'R', 'I', 'F', 'F'});
  PutU32(out, 36 + data_bytes);
  out.insert(out.end(), {'W', 'A', 'V', 'E', 'f', 'm', 't', ' '});
  PutU32(out, 16);
  PutU16(out, kFormatPcm);
  PutU16(out, 1);
  PutU32(out, static_cast<std::uint32_t>(audio.sample_rate));
  PutU32(out, static_cast<std::uint32_t>(audio.sample_rate) * 2);
  PutU16(out, 2);
  PutU16(out, 16);
  out.insert(out.end(), {'d', 'a', 't', 'a'});
  PutU32(out, data_bytes);
  for (double s : audio.samples) {
    double c = std::clamp(s, -1.0, 1.0);
    auto v = static_cast<std::int16_t>(std::lround(std::clamp(c * 32768.0, -32768.0, 32767.0)));
    PutU16(out, static_cast<std::uint16_t>(v));
  }
  return out;
}

void WriteWavPcm16(const std::string &path, const AudioBuffer &audio) {
  std::vector<unsigned char> bytes = EncodeWavPcm16(audio);
  std::ofstream out(path, std::ios::binary);
  if (!out) Fail(ErrorCode::kIo, "cannot write " + path);
  out.write(reinterpret_cast<const char *>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) Fail(ErrorCode::kIo, "short write to " + path);
}

}  // namespace msfser
