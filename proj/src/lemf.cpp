// src/lemf.cpp

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

#include "msfser/lemf.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "json.hpp"
#include "msfser/error.hpp"

namespace msfser {

const char *SegmentModeName(SegmentMode mode) {
  return mode == SegmentMode::kAdjacent ? "adjacent" : "topk";
}

SegmentMode ParseSegmentMode(const std::string &name) {
  if (name == "adjacent") return SegmentMode::kAdjacent;
  if (name == "topk") return SegmentMode::kTopK;
  Fail(ErrorCode::kInvalidArgument, "segment mode must be adjacent or topk, got " + name);
}

std::string EmphasisSegment::Text() const {
  std::string out;
  for (const std::string &w : words) {
    if (!out.empty()) out += ' ';
    out += w;
  }
  return out;
}

RawWordProsody AggregateWordProsody(const ProsodyTrack &track, const Interval &word,
                                    std::span<const Interval> phones) {
  if (track.size() == 0) Fail(ErrorCode::kEmptyInput, "empty prosody track");
  RawWordProsody raw;
  double energy_sum = 0.0;
  std::size_t frames = 0;
  for (std::size_t i = 0; i < track.size(); ++i) {
    const double t = track.frame_times[i];
    if (t < word.xmin || t >= word.xmax) continue;
    energy_sum += track.energy[i];
    ++frames;
    if (track.voiced[i] && (!raw.f_pitch || track.log_f0[i] > *raw.f_pitch))
      raw.f_pitch = track.log_f0[i];
  }
  if (frames > 0) {
    raw.f_energy = energy_sum / static_cast<double>(frames);
  } else {
    // Word shorter than the hop: use the frame nearest to its centre.
    const double centre = 0.5 * (word.xmin + word.xmax);
    std::size_t nearest = 0;
    for (std::size_t i = 1; i < track.size(); ++i)
      if (std::abs(track.frame_times[i] - centre) < std::abs(track.frame_times[nearest] - centre))
        nearest = i;
    raw.f_energy = track.energy[nearest];
  }
  if (phones.empty()) {
    raw.f_duration = word.xmax - word.xmin;
  } else {
    double total = 0.0;
    for (const Interval &p : phones) total += p.xmax - p.xmin;
    raw.f_duration = total / static_cast<double>(phones.size());
  }
  return raw;
}

std::vector<double> ZScoreNormalize(std::span<const double> values) {
  if (values.empty()) Fail(ErrorCode::kEmptyInput, "z-score of an empty sequence");
  const double n = static_cast<double>(values.size());
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= n;
  double var = 0.0;
  for (double v : values) var += (v - mean) * (v - mean);
  const double sd = std::sqrt(var / n);
  std::vector<double> out(values.size(), 0.0);
  if (sd < 1e-12) return out;
  for (std::size_t i = 0; i < values.size(); ++i) out[i] = (values[i] - mean) / sd;
  return out;
}

double EmphasisScore(double z_pitch, double z_energy, double z_duration, const EmphasisWeights &w) {
  return w.alpha * z_pitch + w.beta * z_energy + w.gamma * z_duration;
}

std::vector<double> EmphasisScores(std::vector<WordProsody> &words, const EmphasisWeights &w) {
  std::vector<double> scores;
  scores.reserve(words.size());
  for (WordProsody &wp : words) {
    wp.score = EmphasisScore(wp.z_pitch, wp.z_energy, wp.z_duration, w);
    scores.push_back(wp.score);
  }
  return scores;
}

EmphasisSegment SelectEmphasisSegment(std::span<const double> scores, SegmentMode mode,
                                      std::size_t k) {
  if (scores.empty()) Fail(ErrorCode::kEmptyInput, "no words to select from");
  const std::size_t n = scores.size();
  EmphasisSegment seg;
  seg.mode = mode;
  if (mode == SegmentMode::kAdjacent) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < n; ++i)
      if (scores[i] > scores[best]) best = i;
    const std::size_t width = std::min<std::size_t>(3, n);
    std::size_t first = best == 0 ? 0 : best - 1;
    if (first + width > n) first = n - width;
    for (std::size_t i = first; i < first + width; ++i) seg.word_indices.push_back(i);
  } else {
    if (k == 0) Fail(ErrorCode::kInvalidArgument, "top-k needs k >= 1");
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
    order.resize(std::min(k, n));
    std::sort(order.begin(), order.end());
    seg.word_indices = std::move(order);
  }
  return seg;
}

namespace {

std::string TrimSentence(std::string s) {
  auto space = [](char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r'; };
  while (!s.empty() && space(s.back())) s.pop_back();
  while (!s.empty() && s.back() == '.') s.pop_back();
  std::size_t start = 0;
  while (start < s.size() && space(s[start])) ++start;
  return s.substr(start);
}

}  // namespace

std::string AssembleExtendedDescription(const ExtendedInfo &info) {
  const std::string gender = TrimSentence(info.gender);
  const std::string free_label = TrimSentence(info.free_label);
  const std::string constrained = TrimSentence(info.constrained_label);
  const std::string scenario = TrimSentence(info.scenario);
  const std::string explanation = TrimSentence(info.explanation);
  const std::string para = TrimSentence(info.paralinguistics);

  std::vector<std::string> sentences;
  if (!gender.empty() || !free_label.empty() || !constrained.empty() || !scenario.empty()) {
    std::string s = gender.empty() ? "This is a speaker" : "This is a " + gender + " speaker";
    if (!free_label.empty() && !constrained.empty())
      s += ", expressing " + free_label + " (categorized as " + constrained + ")";
    else if (!free_label.empty())
      s += ", expressing " + free_label;
    else if (!constrained.empty())
      s += ", expressing an emotion categorized as " + constrained;
    if (!scenario.empty()) s += ", in " + scenario;
    sentences.push_back(s + ".");
  }
  if (!explanation.empty()) sentences.push_back(explanation + ".");
  if (!para.empty()) sentences.push_back("The speech is characterized by " + para + ".");

  std::string out;
  for (const std::string &s : sentences) {
    if (!out.empty()) out += ' ';
    out += s;
  }
  return out;
}

LemfResult RunLemf(const ProsodyTrack &track, const TextGrid &tg, const LemfConfig &cfg) {
  LemfResult result;
  result.track = track;
  std::vector<Interval> words = WordIntervals(tg, cfg.word_tier, cfg.silence_labels);
  if (words.empty()) Fail(ErrorCode::kEmptyInput, "word tier \"" + cfg.word_tier + "\" has no words");
  const bool have_phones = tg.FindTier(cfg.phone_tier) != nullptr;

  std::vector<RawWordProsody> raw;
  raw.reserve(words.size());
  for (const Interval &w : words) {
    std::vector<Interval> phones;
    if (have_phones) phones = PhonesForWord(tg, cfg.phone_tier, w, cfg.silence_labels);
    raw.push_back(AggregateWordProsody(track, w, phones));
  }

  // Unvoiced words take the sentence mean pitch so their pitch z-score is 0.
  double pitch_sum = 0.0;
  std::size_t pitch_count = 0;
  for (const RawWordProsody &r : raw)
    if (r.f_pitch) {
      pitch_sum += *r.f_pitch;
      ++pitch_count;
    }
  const double pitch_fill = pitch_count > 0 ? pitch_sum / static_cast<double>(pitch_count) : 0.0;

  std::vector<double> pitch, energy, duration;
  for (const RawWordProsody &r : raw) {
    pitch.push_back(r.f_pitch.value_or(pitch_fill));
    energy.push_back(r.f_energy);
    duration.push_back(r.f_duration);
  }
  const std::vector<double> zp = ZScoreNormalize(pitch);
  const std::vector<double> ze = ZScoreNormalize(energy);
  const std::vector<double> zd = ZScoreNormalize(duration);

  for (std::size_t i = 0; i < words.size(); ++i) {
    WordProsody wp;
    wp.word = words[i].label;
    wp.interval = words[i];
    wp.f_pitch = pitch[i];
    wp.f_energy = energy[i];
    wp.f_duration = duration[i];
    wp.z_pitch = zp[i];
    wp.z_energy = ze[i];
    wp.z_duration = zd[i];
    result.words.push_back(std::move(wp));
  }
  std::vector<double> scores = EmphasisScores(result.words, cfg.weights);
  result.segment = SelectEmphasisSegment(scores, cfg.mode, cfg.top_k);
  for (std::size_t idx : result.segment.word_indices)
    result.segment.words.push_back(result.words[idx].word);
  result.segment.start = result.words[result.segment.word_indices.front()].interval.xmin;
  result.segment.end = result.words[result.segment.word_indices.back()].interval.xmax;
  return result;
}

LemfResult RunLemf(const AudioBuffer &audio, const TextGrid &tg, const LemfConfig &cfg) {
  // Check the tier before the comparatively slow pitch tracking.
  WordIntervals(tg, cfg.word_tier, cfg.silence_labels);
  return RunLemf(EstimateF0(audio, cfg.frame, cfg.f0), tg, cfg);
}

std::string LemfToJson(const std::string &utt_id, const LemfResult &result) {
  nlohmann::ordered_json doc;
  doc["utt_id"] = utt_id;
  doc["words"] = nlohmann::ordered_json::array();
  for (const WordProsody &w : result.words) {
    nlohmann::ordered_json j;
    j["word"] = w.word;
    j["xmin"] = w.interval.xmin;
    j["xmax"] = w.interval.xmax;
    j["f_pitch"] = w.f_pitch;
    j["f_energy"] = w.f_energy;
    j["f_duration"] = w.f_duration;
    j["z_pitch"] = w.z_pitch;
    j["z_energy"] = w.z_energy;
    j["z_duration"] = w.z_duration;
    j["score"] = w.score;
    doc["words"].push_back(std::move(j));
  }
  doc["segment"]["mode"] = SegmentModeName(result.segment.mode);
  doc["segment"]["indices"] = result.segment.word_indices;
  doc["segment"]["words"] = result.segment.words;
  doc["segment"]["xmin"] = result.segment.start;
  doc["segment"]["xmax"] = result.segment.end;
  return doc.dump(2) + "\n";
}

std::string WordProsodyCsv(const LemfResult &result) {
  std::ostringstream os;
  os.precision(17);
  os << "word,xmin,xmax,f_pitch,f_energy,f_duration,z_pitch,z_energy,z_duration,score,in_segment\n";
  for (std::size_t i = 0; i < result.words.size(); ++i) {
    const WordProsody &w = result.words[i];
    const bool in_segment = std::find(result.segment.word_indices.begin(),
                                      result.segment.word_indices.end(),
                                      i) != result.segment.word_indices.end();
    // Labels are quoted so commas inside a word survive.
    std::string label = "\"";
    for (char c : w.word) label += c == '"' ? std::string("\"\"") : std::string(1, c);
    label += "\"";
    os << label << ',' << w.interval.xmin << ',' << w.interval.xmax << ',' << w.f_pitch << ','
       << w.f_energy << ',' << w.f_duration << ',' << w.z_pitch << ',' << w.z_energy << ','
       << w.z_duration << ',' << w.score << ',' << (in_segment ? 1 : 0) << '\n';
  }
  return os.str();
}

}  // namespace msfser
