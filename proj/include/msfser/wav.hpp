// msfser/wav.hpp

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

#ifndef MSFSER_WAV_HPP_
#define MSFSER_WAV_HPP_

#include <string>
#include <vector>

namespace msfser {

/// Mono PCM audio with samples in [-1, 1].
struct AudioBuffer {
  std::vector<double> samples;
  int sample_rate = 16000;
};

/// Reads a mono RIFF/WAVE file (PCM 16-bit or IEEE float 32-bit).
/// Multichannel and other encodings fail with kUnsupportedAudio.
AudioBuffer ReadWav(const std::string &path);
AudioBuffer DecodeWav(const std::vector<unsigned char> &bytes);

/// Encodes as mono PCM16; samples are clipped to [-1, 1].
std::vector<unsigned char> EncodeWavPcm16(const AudioBuffer &audio);
void WriteWavPcm16(const std::string &path, const AudioBuffer &audio);

/// Checks sample_rate > 0 and that every sample is finite.
void ValidateAudio(const AudioBuffer &audio);

}  // namespace msfser

#endif  // MSFSER_WAV_HPP_
