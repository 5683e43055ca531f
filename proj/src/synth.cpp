// src/synth.cpp

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

#include "msfser/synth.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cmath>
#include <exception>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <numbers>
#include <sstream>
#include <thread>

#include "json.hpp"
#include "msfser/error.hpp"
#include "msfser/numcore.hpp"

namespace msfser {

namespace {

const char *const kVocabulary[] = {
    "river",  "stone",   "window", "garden", "paper",  "silver", "morning", "engine",
    "yellow", "harbor",  "candle", "forest", "ticket", "mirror", "pocket",  "thunder",
    "basket", "village", "copper", "lemon",  "winter", "bridge", "signal",  "meadow",
    "orange", "planet",  "castle", "feather", "button", "market", "velvet", "anchor",
};

const char *const kFreeLabels[] = {"mild curiosity", "quiet surprise", "restless doubt",
                                   "calm interest", "light amusement", "steady focus"};
const char *const kConstrained[] = {"neutral", "happy", "sad", "angry", "surprised", "contempt"};
const char *const kScenarios[] = {"a phone call", "a podcast interview", "a classroom",
                                  "a radio show", "a meeting", "a street conversation"};
const char *const kParalinguistics[] = {"a steady pace", "a slow rhythm", "a clear voice",
                                        "short pauses", "an even tone", "crisp articulation"};
const char *const kGenders[] = {"male", "female"};

template <std::size_t N>
const char *Pick(const char *const (&list)[N], RngState &rng) {
  return list[rng.Below(N)];
}

constexpr double kLeadSilence = 0.10;
constexpr double kGap = 0.05;
constexpr double kRamp = 0.010;
constexpr double kBaseAmplitude = 0.08;

std::size_t LatentIndex(char c) {
  switch (c) {
    case 'v': return 0;
    case 'a': return 1;
    case 'd': return 2;
    default: return 3;  // none
  }
}

double Latent(const std::array<double, 3> &lat, char which) {
  const std::size_t i = LatentIndex(which);
  return i < 3 ? lat[i] : 0.0;
}

double Quantize(double x) {
  return static_cast<double>(std::lround(std::clamp(x * 32768.0, -32768.0, 32767.0))) / 32768.0;
}

std::vector<double> UnitDirection(RngState &rng, std::size_t dim) {
  std::vector<double> u(dim);
  double norm = 0.0;
  for (double &x : u) {
    x = rng.Normal();
    norm += x * x;
  }
  norm = std::sqrt(norm);
  for (double &x : u) x /= norm;
  return u;
}

void WriteFile(const std::filesystem::path &path, const std::string &bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) Fail(ErrorCode::kIo, "cannot write " + path.string());
  out << bytes;
  if (!out) Fail(ErrorCode::kIo, "write failed: " + path.string());
}

std::string UttId(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "utt%04zu", index);
  return buf;
}

}  // namespace

void SyntheticSpec::Validate() const {
  if (n_utterances < 4) Fail(ErrorCode::kInvalidArgument, "n_utterances must be >= 4");
  if (min_words < 1 || max_words < min_words)
    Fail(ErrorCode::kInvalidArgument, "need 1 <= min_words <= max_words");
  if (sample_rate < 8000) Fail(ErrorCode::kInvalidArgument, "sample_rate must be >= 8000");
  if (!(planted_duration > 0.0) || !(content_weight >= 0.0) || !(embed_noise >= 0.0) ||
      !(target_noise >= 0.0) || !std::isfinite(planted_gain_db) || !std::isfinite(planted_semitones))
    Fail(ErrorCode::kInvalidArgument, "synthetic factors must be finite and non-negative");
  if (!(test_fraction >= 0.0 && test_fraction < 1.0))
    Fail(ErrorCode::kInvalidArgument, "test_fraction must be in [0, 1)");
  for (char c : {audio_latent, text_latent, ext_latent})
    if (c != 'v' && c != 'a' && c != 'd' && c != 'n')
      Fail(ErrorCode::kInvalidArgument, "latent map entries must be v, a, d or n");
  if (embed_dim == 0) Fail(ErrorCode::kInvalidArgument, "embed_dim must be >= 1");
}

std::string SyntheticSpecJson(const SyntheticSpec &s) {
  nlohmann::ordered_json j;
  j["n_utterances"] = s.n_utterances;
  j["min_words"] = s.min_words;
  j["max_words"] = s.max_words;
  j["sample_rate"] = s.sample_rate;
  j["planted_gain_db"] = s.planted_gain_db;
  j["planted_semitones"] = s.planted_semitones;
  j["planted_duration"] = s.planted_duration;
  j["arousal_gain_db"] = s.arousal_gain_db;
  j["arousal_semitones"] = s.arousal_semitones;
  j["base_f0_hz"] = s.base_f0_hz;
  j["audio_latent"] = std::string(1, s.audio_latent);
  j["text_latent"] = std::string(1, s.text_latent);
  j["ext_latent"] = std::string(1, s.ext_latent);
  j["content_weight"] = s.content_weight;
  j["embed_noise"] = s.embed_noise;
  j["target_noise"] = s.target_noise;
  j["test_fraction"] = s.test_fraction;
  j["embed_dim"] = s.embed_dim;
  j["embed_seed"] = s.embed_seed;
  j["seed"] = s.seed;
  return j.dump(2) + "\n";
}

std::size_t TrainCount(const SyntheticSpec &spec) {
  const auto test = static_cast<std::size_t>(
      std::lround(static_cast<double>(spec.n_utterances) * spec.test_fraction));
  return spec.n_utterances - std::min(test, spec.n_utterances);
}

SyntheticUtterance SynthesizeUtterance(const SyntheticSpec &spec, std::size_t index) {
  spec.Validate();
  RngState rng(StableHash("utt" + std::to_string(index), spec.seed));
  SyntheticUtterance u;
  u.id = UttId(index);
  for (double &l : u.latents) l = rng.Uniform(-1.0, 1.0);

  const double drive = Latent(u.latents, spec.audio_latent);
  const double utt_gain_db = spec.arousal_gain_db * drive;
  const double base_f0 = spec.base_f0_hz * std::exp2(spec.arousal_semitones * drive / 12.0);

  const std::size_t n_words = spec.min_words + rng.Below(spec.max_words - spec.min_words + 1);
  u.planted_word = rng.Below(n_words);

  const double sr = spec.sample_rate;
  auto samples = [&](double seconds) { return static_cast<std::size_t>(std::lround(seconds * sr)); };

  Tier words_tier{TierKind::kInterval, "words", 0.0, 0.0, {}, {}};
  Tier phones_tier{TierKind::kInterval, "phones", 0.0, 0.0, {}, {}};
  std::vector<double> &x = u.audio.samples;
  u.audio.sample_rate = spec.sample_rate;
  auto time_of = [&](std::size_t n) { return static_cast<double>(n) / sr; };
  auto silence = [&](std::size_t n) {
    const double t0 = time_of(x.size());
    x.resize(x.size() + n, 0.0);
    words_tier.intervals.push_back({t0, time_of(x.size()), ""});
    phones_tier.intervals.push_back({t0, time_of(x.size()), "sil"});
  };

  silence(samples(kLeadSilence));
  for (std::size_t w = 0; w < n_words; ++w) {
    const bool planted = w == u.planted_word;
    const std::string word = Pick(kVocabulary, rng);
    u.words.push_back(word);
    const double dur = rng.Uniform(0.18, 0.30) * (planted ? spec.planted_duration : 1.0);
    const double semis = rng.Uniform(-1.0, 1.0) + (planted ? spec.planted_semitones : 0.0);
    const double f0 = base_f0 * std::exp2(semis / 12.0);
    const double gain_db = utt_gain_db + rng.Uniform(-1.5, 1.5) + (planted ? spec.planted_gain_db : 0.0);
    const double amp = kBaseAmplitude * std::pow(10.0, gain_db / 20.0);
    const std::size_t n = samples(dur);
    const std::size_t ramp = samples(kRamp);
    const std::size_t start = x.size();
    for (std::size_t i = 0; i < n; ++i) {
      const double t = static_cast<double>(i) / sr;
      double env = 1.0;
      if (i < ramp) env = 0.5 - 0.5 * std::cos(std::numbers::pi * static_cast<double>(i) / ramp);
      else if (n - 1 - i < ramp)
        env = 0.5 - 0.5 * std::cos(std::numbers::pi * static_cast<double>(n - 1 - i) / ramp);
      double s = 0.0;
      double weight = 1.0;
      for (int h = 1; h <= 3; ++h, weight *= 0.5)
        s += weight * std::sin(2.0 * std::numbers::pi * h * f0 * t);
      x.push_back(Quantize(amp * env * s));
    }
    words_tier.intervals.push_back({time_of(start), time_of(x.size()), word});

    const std::size_t n_phones = 2 + rng.Below(3);
    for (std::size_t p = 0; p < n_phones; ++p) {
      const std::size_t a = start + n * p / n_phones, b = start + n * (p + 1) / n_phones;
      const char c = static_cast<char>(std::toupper(static_cast<unsigned char>(word[p % word.size()])));
      phones_tier.intervals.push_back({time_of(a), time_of(b), std::string(1, c)});
    }
    silence(samples(w + 1 < n_words ? kGap : kLeadSilence));
  }

  const double total = time_of(x.size());
  for (Tier *t : {&words_tier, &phones_tier}) t->xmax = total;
  u.textgrid.xmin = 0.0;
  u.textgrid.xmax = total;
  u.textgrid.tiers = {words_tier, phones_tier};

  for (const std::string &w : u.words) u.transcript += (u.transcript.empty() ? "" : " ") + w;

  ExtendedInfo info;
  info.gender = Pick(kGenders, rng);
  info.free_label = Pick(kFreeLabels, rng);
  info.constrained_label = Pick(kConstrained, rng);
  info.scenario = Pick(kScenarios, rng);
  info.paralinguistics = Pick(kParalinguistics, rng);
  u.es_description = AssembleExtendedDescription(info);

  for (std::size_t d = 0; d < 3; ++d) u.targets[d] = u.latents[d] + spec.target_noise * rng.Normal();
  return u;
}

std::array<SemanticVec, 3> SyntheticSemantics(const SyntheticSpec &spec,
                                              const SyntheticUtterance &utt,
                                              const std::string &segment_text) {
  RngState dirs(StableHash("directions", spec.seed));
  const std::vector<double> u_local = UnitDirection(dirs, spec.embed_dim);
  const std::vector<double> u_global = UnitDirection(dirs, spec.embed_dim);
  const std::vector<double> u_ext = UnitDirection(dirs, spec.embed_dim);
  RngState noise(StableHash("semantics:" + utt.id, spec.seed));

  auto build = [&](const std::string &text, const std::vector<double> &dir, char latent) {
    SemanticVec v = ToyEmbedText(text, spec.embed_dim, spec.embed_seed);
    v.source = EmbeddingSource::kExternal;
    const double z = Latent(utt.latents, latent);
    for (std::size_t i = 0; i < spec.embed_dim; ++i)
      v.values[i] = spec.content_weight * v.values[i] + z * dir[i] + spec.embed_noise * noise.Normal();
    return v;
  };
  return {build(segment_text, u_local, spec.text_latent),
          build(utt.transcript, u_global, spec.text_latent),
          build(utt.es_description, u_ext, spec.ext_latent)};
}

void GenerateSynthetic(const SyntheticSpec &spec, const std::string &out_dir,
                       const LemfConfig &lemf, std::size_t threads) {
  spec.Validate();
  namespace fs = std::filesystem;
  const fs::path root(out_dir);
  std::error_code ec;
  fs::create_directories(root / "wav", ec);
  if (!ec) fs::create_directories(root / "textgrid", ec);
  if (ec) Fail(ErrorCode::kIo, "cannot create " + out_dir + ": " + ec.message());

  struct Row {
    std::string id, transcript, es, embeddings;
    std::array<double, 3> targets{};
  };
  std::vector<Row> rows(spec.n_utterances);

  auto work = [&](std::size_t i) {
    SyntheticUtterance u = SynthesizeUtterance(spec, i);
    WriteFile(root / "wav" / (u.id + ".wav"), [&] {
      std::vector<unsigned char> bytes = EncodeWavPcm16(u.audio);
      return std::string(bytes.begin(), bytes.end());
    }());
    WriteFile(root / "textgrid" / (u.id + ".TextGrid"), SerializeTextGrid(u.textgrid));
    const LemfResult lr = RunLemf(u.audio, u.textgrid, lemf);
    std::array<SemanticVec, 3> sem = SyntheticSemantics(spec, u, lr.segment.Text());
    Row &r = rows[i];
    r.id = u.id;
    r.transcript = u.transcript;
    r.es = u.es_description;
    r.targets = u.targets;
    r.embeddings = EmbeddingRecord(u.id, Channel::kLes, sem[0]) +
                   EmbeddingRecord(u.id, Channel::kGs, sem[1]) +
                   EmbeddingRecord(u.id, Channel::kEs, sem[2]);
  };

  const std::size_t n_threads = std::max<std::size_t>(1, std::min(threads, spec.n_utterances));
  if (n_threads == 1) {
    for (std::size_t i = 0; i < spec.n_utterances; ++i) work(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mu;
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < n_threads; ++t)
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < spec.n_utterances; i = next++) {
          try {
            work(i);
          } catch (...) {
            std::lock_guard<std::mutex> lock(failure_mu);
            if (!failure) failure = std::current_exception();
          }
        }
      });
    for (std::thread &t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
  }

  const std::size_t n_train = TrainCount(spec);
  std::ostringstream targets, transcripts, es, emb;
  targets.precision(17);
  targets << "utt_id,valence,arousal,dominance,split\n";
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const Row &r = rows[i];
    targets << r.id << ',' << r.targets[0] << ',' << r.targets[1] << ',' << r.targets[2] << ','
            << (i < n_train ? "train" : "test") << '\n';
    transcripts << r.id << '\t' << r.transcript << '\n';
    es << r.id << '\t' << r.es << '\n';
    emb << r.embeddings;
  }
  WriteFile(root / "targets.csv", targets.str());
  WriteFile(root / "transcripts.tsv", transcripts.str());
  WriteFile(root / "es_descriptions.tsv", es.str());
  WriteFile(root / "embeddings.jsonl", emb.str());
  WriteFile(root / "synth_spec.json", SyntheticSpecJson(spec));
}

}  // namespace msfser
