// msfser/lemf.hpp

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

#ifndef MSFSER_LEMF_HPP_
#define MSFSER_LEMF_HPP_

// Word-level emphasis detection from prosody: pitch, energy and duration
// are aggregated per word, z-scored within the sentence and fused into one
// emphasis score per word.

#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "msfser/dsp.hpp"
#include "msfser/textgrid.hpp"

namespace msfser {

struct EmphasisWeights {
  double alpha = 1.0;  // pitch
  double beta = 1.2;   // energy
  double gamma = 0.8;  // duration
};

struct RawWordProsody {
  std::optional<double> f_pitch;  // empty when the word has no voiced frame
  double f_energy = 0.0;
  double f_duration = 0.0;
};

struct WordProsody {
  std::string word;
  Interval interval;
  double f_pitch = 0.0;
  double f_energy = 0.0;
  double f_duration = 0.0;
  double z_pitch = 0.0;
  double z_energy = 0.0;
  double z_duration = 0.0;
  double score = 0.0;
};

enum class SegmentMode { kAdjacent, kTopK };

const char *SegmentModeName(SegmentMode mode);
SegmentMode ParseSegmentMode(const std::string &name);

struct EmphasisSegment {
  SegmentMode mode = SegmentMode::kAdjacent;
  std::vector<std::size_t> word_indices;  // strictly increasing
  std::vector<std::string> words;
  double start = 0.0;
  double end = 0.0;

  std::string Text() const;
};

/// One field per extended-semantics category.
struct ExtendedInfo {
  std::string free_label;
  std::string constrained_label;
  std::string explanation;
  std::string scenario;
  std::string paralinguistics;
  std::string gender;
};

/// Word pitch is the max log-F0 over voiced frames centred in
/// [word.xmin, word.xmax); energy is the mean energy over all those frames
/// (the nearest frame when none is centred inside); duration is the mean
/// phone length, or the word length when `phones` is empty.
RawWordProsody AggregateWordProsody(const ProsodyTrack &track, const Interval &word,
                                    std::span<const Interval> phones);

/// Population z-scores. Returns zeros when the standard deviation is below
/// 1e-12. Throws kEmptyInput on an empty sequence.
std::vector<double> ZScoreNormalize(std::span<const double> values);

double EmphasisScore(double z_pitch, double z_energy, double z_duration,
                     const EmphasisWeights &w);

/// Fills `score` on every word from its z fields and returns the scores.
std::vector<double> EmphasisScores(std::vector<WordProsody> &words, const EmphasisWeights &w);

/// Adjacent mode: the best word (earliest on ties) and its neighbours,
/// shifted inward at sentence edges so the segment keeps min(3, N) words.
/// Top-k mode: the k best words, earliest first on ties, sorted by index.
EmphasisSegment SelectEmphasisSegment(std::span<const double> scores, SegmentMode mode,
                                      std::size_t k = 3);

/// Renders the six categories as one description; empty fields drop their
/// clause.
std::string AssembleExtendedDescription(const ExtendedInfo &info);

struct LemfConfig {
  FrameConfig frame;
  F0Options f0;
  EmphasisWeights weights;
  SegmentMode mode = SegmentMode::kAdjacent;
  std::size_t top_k = 3;
  std::string word_tier = "words";
  std::string phone_tier = "phones";
  std::set<std::string> silence_labels = DefaultSilenceLabels();
};

struct LemfResult {
  ProsodyTrack track;
  std::vector<WordProsody> words;
  EmphasisSegment segment;
};

/// Runs the full pipeline. A missing phone tier is tolerated (durations fall
/// back to word lengths); a missing word tier throws kUnknownTier. A
/// sentence without words throws kEmptyInput.
LemfResult RunLemf(const AudioBuffer &audio, const TextGrid &tg, const LemfConfig &cfg);

/// Same, reusing a precomputed prosody track.
LemfResult RunLemf(const ProsodyTrack &track, const TextGrid &tg, const LemfConfig &cfg);

/// {utt_id, words:[...], segment:{mode, indices, words}}
std::string LemfToJson(const std::string &utt_id, const LemfResult &result);

/// word,xmin,xmax,f_pitch,f_energy,f_duration,z_pitch,z_energy,z_duration,score,in_segment
std::string WordProsodyCsv(const LemfResult &result);

}  // namespace msfser

#endif  // MSFSER_LEMF_HPP_
