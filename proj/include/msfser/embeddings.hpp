// msfser/embeddings.hpp

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

#ifndef MSFSER_EMBEDDINGS_HPP_
#define MSFSER_EMBEDDINGS_HPP_

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace msfser {

enum class Channel { kLes, kGs, kEs };

const char *ChannelName(Channel c);
Channel ParseChannel(std::string_view name);

enum class EmbeddingSource { kToy, kExternal };

struct SemanticVec {
  std::vector<double> values;
  EmbeddingSource source = EmbeddingSource::kExternal;

  std::size_t dim() const { return values.size(); }
};

/// Stable seeded 64-bit hash (FNV-1a over the bytes, then a splitmix64
/// finaliser mixed with the seed).
std::uint64_t StableHash(std::string_view text, std::uint64_t seed);

/// Bag-of-words hashing embedder. Tokens are lower-cased whitespace splits;
/// each maps to a seeded +-1 vector, the sum is L2-normalised. Empty text
/// gives the zero vector.
SemanticVec ToyEmbedText(std::string_view text, std::size_t dim, std::uint64_t seed);

/// Vectors keyed by (utterance id, channel), all of one dimension.
class EmbeddingStore {
 public:
  /// Throws kDimMismatch or kDuplicateKey.
  void Insert(const std::string &id, Channel channel, SemanticVec vec);

  /// Throws kMissingKey when absent.
  const SemanticVec &Get(const std::string &id, Channel channel) const;
  bool Contains(const std::string &id, Channel channel) const;

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return entries_.size(); }

  /// One {"id","channel","vector"} object per line, ordered by key.
  std::string ToJsonLines() const;

 private:
  std::map<std::pair<std::string, Channel>, SemanticVec> entries_;
  std::size_t dim_ = 0;
};

/// Parses the JSON-lines exchange format. Blank lines are skipped. Throws
/// kMalformedRecord, kDimMismatch or kDuplicateKey.
EmbeddingStore ParseEmbeddings(std::string_view text);
EmbeddingStore LoadEmbeddings(const std::string &path);

/// One JSON-lines record; used by writers that stream records.
std::string EmbeddingRecord(const std::string &id, Channel channel, const SemanticVec &vec);

}  // namespace msfser

#endif  // MSFSER_EMBEDDINGS_HPP_
