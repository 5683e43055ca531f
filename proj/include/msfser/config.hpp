// msfser/config.hpp

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

#ifndef MSFSER_CONFIG_HPP_
#define MSFSER_CONFIG_HPP_

// Flat run configuration shared by every command. A JSON file supplies any
// subset of keys; command-line flags use the same names and win.

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "msfser/dataset.hpp"
#include "msfser/lemf.hpp"
#include "msfser/model.hpp"
#include "msfser/synth.hpp"

namespace msfser {

struct RunConfig {
  std::uint64_t seed = 0;
  bool deterministic = false;
  std::uint64_t threads = 1;

  // Framing and pitch.
  double win_ms = 20.0;
  double hop_ms = 5.0;
  double f0_min = 40.0;
  double f0_max = 500.0;
  double voicing_threshold = 0.3;
  std::uint64_t n_mels = 16;

  // Emphasis.
  double weight_pitch = 1.0;
  double weight_energy = 1.2;
  double weight_duration = 0.8;
  std::string segment_mode = "adjacent";
  std::uint64_t top_k = 3;

  // Embeddings.
  std::uint64_t embed_dim = 32;
  std::uint64_t embed_seed = 17;

  // Model.
  std::uint64_t attention_dim = 16;
  std::uint64_t film_hidden = 32;
  std::uint64_t head_hidden = 32;
  double dropout = 0.5;
  bool vector_gate = false;
  std::string experts = "ABC";
  std::string intra_fusion = "gated";
  std::string inter_fusion = "film";

  // Training.
  double lr = 1e-5;
  double weight_decay = 0.01;
  std::uint64_t batch = 32;
  std::uint64_t grad_accum = 4;
  std::uint64_t epochs = 10;
  std::string loss = "ccc";

  // Synthetic corpus.
  std::uint64_t n_utterances = 300;
  std::uint64_t min_words = 4;
  std::uint64_t max_words = 7;
  double planted_gain_db = 6.0;
  double planted_semitones = 4.0;
  double planted_duration = 1.5;
  double embed_noise = 0.02;
  double target_noise = 0.05;
  double test_fraction = 0.2;

  // Paths.
  std::string data_dir;
  std::string checkpoint;
  std::string out_dir;

  /// Sets one key from its textual form. Throws kInvalidArgument for an
  /// unknown key or an unparsable value.
  void Set(const std::string &key, const std::string &value);
  /// Applies every key of a flat JSON object. Nested values, unknown keys and
  /// wrong JSON types throw kInvalidArgument.
  void MergeJson(std::string_view json_text);
  void MergeFile(const std::string &path);

  /// Full key set, one line of JSON.
  std::string ToJson() const;
  void Validate() const;

  static std::vector<std::string> Keys();
};

LemfConfig ToLemfConfig(const RunConfig &c);
ModelConfig ToModelConfig(const RunConfig &c);
TrainOptions ToTrainOptions(const RunConfig &c);
SyntheticSpec ToSyntheticSpec(const RunConfig &c);
DatasetOptions ToDatasetOptions(const RunConfig &c, const std::string &split);

/// Workers to use: 1 in deterministic mode, else `threads`.
std::size_t EffectiveThreads(const RunConfig &c);

}  // namespace msfser

#endif  // MSFSER_CONFIG_HPP_
