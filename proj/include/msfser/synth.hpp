// msfser/synth.hpp

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

#ifndef MSFSER_SYNTH_HPP_
#define MSFSER_SYNTH_HPP_

// Synthetic corpus with a known generative law. Each "word" is a harmonic
// tone burst; bursts are separated by 50 ms of silence and a TextGrid with
// word and phone tiers is written alongside. One word per utterance is
// planted louder, higher and longer.
//
// Latents v, a, d are drawn from U(-1, 1):
//   a sets the loudness and base pitch of the audio,
//   v is added along a fixed direction to the gs and les vectors,
//   d is added along a fixed direction to the es vector only.
// Targets are the latents plus Gaussian noise.

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "msfser/embeddings.hpp"
#include "msfser/lemf.hpp"
#include "msfser/textgrid.hpp"
#include "msfser/wav.hpp"

namespace msfser {

struct SyntheticSpec {
  std::size_t n_utterances = 300;
  std::size_t min_words = 4;
  std::size_t max_words = 7;
  int sample_rate = 16000;

  double planted_gain_db = 6.0;
  double planted_semitones = 4.0;
  double planted_duration = 1.5;

  double arousal_gain_db = 6.0;     // loudness swing at |a| = 1
  double arousal_semitones = 4.0;   // base-pitch swing at |a| = 1
  double base_f0_hz = 140.0;

  /// Which latent ('v', 'a' or 'd') each channel carries.
  char audio_latent = 'a';
  char text_latent = 'v';  // gs and les
  char ext_latent = 'd';   // es

  double content_weight = 0.5;  // scale of the text-derived part of each vector
  double embed_noise = 0.02;    // per-component Gaussian noise on vectors
  double target_noise = 0.05;
  double test_fraction = 0.2;

  std::size_t embed_dim = 32;
  std::uint64_t embed_seed = 17;
  std::uint64_t seed = 0;

  void Validate() const;
};

std::string SyntheticSpecJson(const SyntheticSpec &spec);

struct SyntheticUtterance {
  std::string id;
  AudioBuffer audio;
  TextGrid textgrid;
  std::vector<std::string> words;
  std::size_t planted_word = 0;
  std::array<double, 3> latents{};  // v, a, d
  std::array<double, 3> targets{};
  std::string transcript;
  std::string es_description;
};

/// Audio, alignment, latents and text for utterance `index`; depends only on
/// (spec, index).
SyntheticUtterance SynthesizeUtterance(const SyntheticSpec &spec, std::size_t index);

/// The three semantic vectors for an utterance whose LEMF segment text is
/// `segment_text`; returned in channel order les, gs, es.
std::array<SemanticVec, 3> SyntheticSemantics(const SyntheticSpec &spec,
                                              const SyntheticUtterance &utt,
                                              const std::string &segment_text);

/// Number of leading utterances in the train split.
std::size_t TrainCount(const SyntheticSpec &spec);

/// Writes wav/, textgrid/, embeddings.jsonl, targets.csv, transcripts.tsv,
/// es_descriptions.tsv and synth_spec.json under `out_dir`. `threads` > 1
/// spreads utterances over worker threads; output bytes do not depend on it.
void GenerateSynthetic(const SyntheticSpec &spec, const std::string &out_dir,
                       const LemfConfig &lemf = {}, std::size_t threads = 1);

}  // namespace msfser

#endif  // MSFSER_SYNTH_HPP_
