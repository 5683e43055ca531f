// src/config.cpp

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

#include "msfser/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <variant>

#include "json.hpp"
#include "msfser/error.hpp"

namespace msfser {

namespace {

using Member = std::variant<std::uint64_t RunConfig::*, double RunConfig::*, bool RunConfig::*,
                            std::string RunConfig::*>;

struct Field {
  const char *key;
  Member member;
};

const std::vector<Field> &Fields() {
  static const std::vector<Field> fields = {
      {"seed", &RunConfig::seed},
      {"deterministic", &RunConfig::deterministic},
      {"threads", &RunConfig::threads},
      {"win_ms", &RunConfig::win_ms},
      {"hop_ms", &RunConfig::hop_ms},
      {"f0_min", &RunConfig::f0_min},
      {"f0_max", &RunConfig::f0_max},
      {"voicing_threshold", &RunConfig::voicing_threshold},
      {"n_mels", &RunConfig::n_mels},
      {"weight_pitch", &RunConfig::weight_pitch},
      {"weight_energy", &RunConfig::weight_energy},
      {"weight_duration", &RunConfig::weight_duration},
      {"segment_mode", &RunConfig::segment_mode},
      {"top_k", &RunConfig::top_k},
      {"embed_dim", &RunConfig::embed_dim},
      {"embed_seed", &RunConfig::embed_seed},
      {"attention_dim", &RunConfig::attention_dim},
      {"film_hidden", &RunConfig::film_hidden},
      {"head_hidden", &RunConfig::head_hidden},
      {"dropout", &RunConfig::dropout},
      {"vector_gate", &RunConfig::vector_gate},
      {"experts", &RunConfig::experts},
      {"intra_fusion", &RunConfig::intra_fusion},
      {"inter_fusion", &RunConfig::inter_fusion},
      {"lr", &RunConfig::lr},
      {"weight_decay", &RunConfig::weight_decay},
      {"batch", &RunConfig::batch},
      {"grad_accum", &RunConfig::grad_accum},
      {"epochs", &RunConfig::epochs},
      {"loss", &RunConfig::loss},
      {"n_utterances", &RunConfig::n_utterances},
      {"min_words", &RunConfig::min_words},
      {"max_words", &RunConfig::max_words},
      {"planted_gain_db", &RunConfig::planted_gain_db},
      {"planted_semitones", &RunConfig::planted_semitones},
      {"planted_duration", &RunConfig::planted_duration},
      {"embed_noise", &RunConfig::embed_noise},
      {"target_noise", &RunConfig::target_noise},
      {"test_fraction", &RunConfig::test_fraction},
      {"data_dir", &RunConfig::data_dir},
      {"checkpoint", &RunConfig::checkpoint},
      {"out_dir", &RunConfig::out_dir},
  };
  return fields;
}

const Field &Find(const std::string &key) {
  for (const Field &f : Fields())
    if (key == f.key) return f;
  Fail(ErrorCode::kInvalidArgument, "unknown config key \"" + key + "\"");
}

[[noreturn]] void BadValue(const std::string &key, const std::string &value, const char *want) {
  Fail(ErrorCode::kInvalidArgument,
       "config key \"" + key + "\" wants " + want + ", got \"" + value + "\"");
}

}  // namespace

void RunConfig::Set(const std::string &key, const std::string &value) {
  const Field &f = Find(key);
  const char *first = value.data();
  const char *last = value.data() + value.size();
  if (auto *m = std::get_if<std::uint64_t RunConfig::*>(&f.member)) {
    std::uint64_t v = 0;
    auto [p, ec] = std::from_chars(first, last, v);
    if (ec != std::errc() || p != last || value.empty()) BadValue(key, value, "an unsigned integer");
    this->**m = v;
  } else if (auto *m = std::get_if<double RunConfig::*>(&f.member)) {
    double v = 0.0;
    auto [p, ec] = std::from_chars(first, last, v);
    if (ec != std::errc() || p != last || value.empty() || !std::isfinite(v))
      BadValue(key, value, "a finite number");
    this->**m = v;
  } else if (auto *m = std::get_if<bool RunConfig::*>(&f.member)) {
    if (value == "true" || value == "1") this->**m = true;
    else if (value == "false" || value == "0") this->**m = false;
    else BadValue(key, value, "true or false");
  } else {
    this->*std::get<std::string RunConfig::*>(f.member) = value;
  }
}

void RunConfig::MergeJson(std::string_view json_text) {
  nlohmann::json j = nlohmann::json::parse(json_text.begin(), json_text.end(), nullptr, false);
  if (j.is_discarded()) Fail(ErrorCode::kInvalidArgument, "config is not valid JSON");
  if (!j.is_object()) Fail(ErrorCode::kInvalidArgument, "config must be a flat JSON object");
  // Apply to a copy so a bad key leaves *this untouched.
  RunConfig next = *this;
  for (auto it = j.begin(); it != j.end(); ++it) {
    const Field &f = Find(it.key());
    const nlohmann::json &v = it.value();
    if (auto *m = std::get_if<std::uint64_t RunConfig::*>(&f.member)) {
      if (!v.is_number_unsigned()) BadValue(it.key(), v.dump(), "an unsigned integer");
      next.**m = v.get<std::uint64_t>();
    } else if (auto *m = std::get_if<double RunConfig::*>(&f.member)) {
      if (!v.is_number()) BadValue(it.key(), v.dump(), "a number");
      next.**m = v.get<double>();
    } else if (auto *m = std::get_if<bool RunConfig::*>(&f.member)) {
      if (!v.is_boolean()) BadValue(it.key(), v.dump(), "a boolean");
      next.**m = v.get<bool>();
    } else {
      if (!v.is_string()) BadValue(it.key(), v.dump(), "a string");
      next.*std::get<std::string RunConfig::*>(f.member) = v.get<std::string>();
    }
  }
  *this = std::move(next);
}

void RunConfig::MergeFile(const std::string &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) Fail(ErrorCode::kIo, "cannot read config " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  MergeJson(ss.str());
}

std::string RunConfig::ToJson() const {
  nlohmann::ordered_json j;
  for (const Field &f : Fields())
    std::visit([&](auto m) { j[f.key] = this->*m; }, f.member);
  return j.dump();
}

std::vector<std::string> RunConfig::Keys() {
  std::vector<std::string> keys;
  for (const Field &f : Fields()) keys.emplace_back(f.key);
  return keys;
}

void RunConfig::Validate() const {
  ToLemfConfig(*this).frame.Validate();
  ToModelConfig(*this).Validate();
  ToSyntheticSpec(*this).Validate();
  if (loss != "ccc" && loss != "mse")
    Fail(ErrorCode::kInvalidArgument, "loss must be ccc or mse, got " + loss);
  if (batch < 2) Fail(ErrorCode::kInvalidArgument, "batch must be >= 2");
  if (grad_accum < 1) Fail(ErrorCode::kInvalidArgument, "grad_accum must be >= 1");
  if (!(lr >= 0.0) || !(weight_decay >= 0.0))
    Fail(ErrorCode::kInvalidArgument, "lr and weight_decay must be non-negative");
  if (top_k < 1) Fail(ErrorCode::kInvalidArgument, "top_k must be >= 1");
  if (n_mels < 1) Fail(ErrorCode::kInvalidArgument, "n_mels must be >= 1");
}

LemfConfig ToLemfConfig(const RunConfig &c) {
  LemfConfig l;
  l.frame.win_ms = c.win_ms;
  l.frame.hop_ms = c.hop_ms;
  l.f0.f0_min = c.f0_min;
  l.f0.f0_max = c.f0_max;
  l.f0.voicing_threshold = c.voicing_threshold;
  l.weights = {c.weight_pitch, c.weight_energy, c.weight_duration};
  l.mode = ParseSegmentMode(c.segment_mode);
  l.top_k = c.top_k;
  return l;
}

ModelConfig ToModelConfig(const RunConfig &c) {
  ModelConfig m;
  m.frame_dim = 3 + c.n_mels;
  m.sem_dim = c.embed_dim;
  m.attention_dim = c.attention_dim;
  m.film_hidden = c.film_hidden;
  m.head_hidden = c.head_hidden;
  m.dropout = c.dropout;
  m.vector_gate = c.vector_gate;
  m.experts = ParseExpertSet(c.experts);
  m.intra = ParseIntraFusion(c.intra_fusion);
  m.inter = ParseInterFusion(c.inter_fusion);
  m.init_seed = c.seed;
  return m;
}

TrainOptions ToTrainOptions(const RunConfig &c) {
  TrainOptions t;
  t.adam.lr = c.lr;
  t.adam.weight_decay = c.weight_decay;
  t.batch = c.batch;
  t.grad_accum = c.grad_accum;
  t.epochs = c.epochs;
  t.loss = c.loss == "mse" ? LossKind::kMse : LossKind::kCcc;
  return t;
}

SyntheticSpec ToSyntheticSpec(const RunConfig &c) {
  SyntheticSpec s;
  s.n_utterances = c.n_utterances;
  s.min_words = c.min_words;
  s.max_words = c.max_words;
  s.planted_gain_db = c.planted_gain_db;
  s.planted_semitones = c.planted_semitones;
  s.planted_duration = c.planted_duration;
  s.embed_noise = c.embed_noise;
  s.target_noise = c.target_noise;
  s.test_fraction = c.test_fraction;
  s.embed_dim = c.embed_dim;
  s.embed_seed = c.embed_seed;
  s.seed = c.seed;
  return s;
}

DatasetOptions ToDatasetOptions(const RunConfig &c, const std::string &split) {
  DatasetOptions d;
  const LemfConfig l = ToLemfConfig(c);
  d.split = split;
  d.frame = l.frame;
  d.f0 = l.f0;
  d.n_mels = c.n_mels;
  d.threads = EffectiveThreads(c);
  return d;
}

std::size_t EffectiveThreads(const RunConfig &c) {
  return c.deterministic ? 1 : std::max<std::uint64_t>(1, c.threads);
}

}  // namespace msfser
