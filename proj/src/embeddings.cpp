// src/embeddings.cpp

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

#include "msfser/embeddings.hpp"

#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "msfser/error.hpp"

namespace msfser {

namespace {

std::uint64_t SplitMix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

}  // namespace

const char *ChannelName(Channel c) {
  switch (c) {
    case Channel::kLes: return "les";
    case Channel::kGs: return "gs";
    case Channel::kEs: return "es";
  }
  return "?";
}

Channel ParseChannel(std::string_view name) {
  if (name == "les") return Channel::kLes;
  if (name == "gs") return Channel::kGs;
  if (name == "es") return Channel::kEs;
  Fail(ErrorCode::kInvalidArgument, "channel must be les, gs or es, got \"" + std::string(name) + "\"");
}

std::uint64_t StableHash(std::string_view text, std::uint64_t seed) {
  std::uint64_t h = 0xCBF29CE484222325ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001B3ull;
  }
  return SplitMix64(h ^ SplitMix64(seed));
}

SemanticVec ToyEmbedText(std::string_view text, std::size_t dim, std::uint64_t seed) {
  if (dim == 0) Fail(ErrorCode::kInvalidArgument, "embedding dim must be >= 1");
  SemanticVec vec;
  vec.source = EmbeddingSource::kToy;
  vec.values.assign(dim, 0.0);

  std::string token;
  auto flush = [&]() {
    if (token.empty()) return;
    const std::uint64_t h = StableHash(token, seed);
    for (std::size_t j = 0; j < dim; ++j)
      vec.values[j] += (SplitMix64(h + j) & 1u) ? 1.0 : -1.0;
    token.clear();
  };
  for (char ch : text) {
    if (std::isspace(static_cast<unsigned char>(ch))) flush();
    else token.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
  }
  flush();

  double norm = 0.0;
  for (double v : vec.values) norm += v * v;
  norm = std::sqrt(norm);
  if (norm > 0.0)
    for (double &v : vec.values) v /= norm;
  return vec;
}

void EmbeddingStore::Insert(const std::string &id, Channel channel, SemanticVec vec) {
  if (vec.dim() == 0) Fail(ErrorCode::kMalformedRecord, "empty vector for " + id);
  for (double v : vec.values)
    if (!std::isfinite(v)) Fail(ErrorCode::kMalformedRecord, "non-finite entry for " + id);
  if (!entries_.empty() && vec.dim() != dim_)
    Fail(ErrorCode::kDimMismatch, id + "/" + ChannelName(channel) + " has dim " +
                                      std::to_string(vec.dim()) + ", store has " +
                                      std::to_string(dim_));
  auto [it, inserted] = entries_.emplace(std::make_pair(id, channel), std::move(vec));
  if (!inserted) Fail(ErrorCode::kDuplicateKey, "(" + id + ", " + ChannelName(channel) + ")");
  dim_ = it->second.dim();
}

const SemanticVec &EmbeddingStore::Get(const std::string &id, Channel channel) const {
  auto it = entries_.find({id, channel});
  if (it == entries_.end())
    Fail(ErrorCode::kMissingKey, "no " + std::string(ChannelName(channel)) + " vector for " + id);
  return it->second;
}

bool EmbeddingStore::Contains(const std::string &id, Channel channel) const {
  return entries_.contains({id, channel});
}

std::string EmbeddingRecord(const std::string &id, Channel channel, const SemanticVec &vec) {
  nlohmann::ordered_json j;
  j["id"] = id;
  j["channel"] = ChannelName(channel);
  j["vector"] = vec.values;
  return j.dump() + "\n";
}

std::string EmbeddingStore::ToJsonLines() const {
  std::string out;
  for (const auto &[key, vec] : entries_) out += EmbeddingRecord(key.first, key.second, vec);
  return out;
}

EmbeddingStore ParseEmbeddings(std::string_view text) {
  EmbeddingStore store;
  std::size_t line_no = 0, pos = 0;
  while (pos < text.size()) {
    std::size_t nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    std::string_view line = text.substr(pos, nl - pos);
    pos = nl + 1;
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;

    const std::string where = "line " + std::to_string(line_no);
    nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object())
      Fail(ErrorCode::kMalformedRecord, where + ": not a JSON object");
    if (!j.contains("id") || !j["id"].is_string() || !j.contains("channel") ||
        !j["channel"].is_string() || !j.contains("vector") || !j["vector"].is_array())
      Fail(ErrorCode::kMalformedRecord, where + ": needs string id, string channel, array vector");
    Channel channel;
    try {
      channel = ParseChannel(j["channel"].get<std::string>());
    } catch (const Error &e) {
      Fail(ErrorCode::kMalformedRecord, where + ": " + e.what());
    }
    SemanticVec vec;
    vec.source = EmbeddingSource::kExternal;
    for (const auto &v : j["vector"]) {
      if (!v.is_number()) Fail(ErrorCode::kMalformedRecord, where + ": vector entries must be numbers");
      vec.values.push_back(v.get<double>());
    }
    store.Insert(j["id"].get<std::string>(), channel, std::move(vec));
  }
  return store;
}

EmbeddingStore LoadEmbeddings(const std::string &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) Fail(ErrorCode::kIo, "cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ParseEmbeddings(ss.str());
}

}  // namespace msfser
