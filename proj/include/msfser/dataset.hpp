// msfser/dataset.hpp

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

#ifndef MSFSER_DATASET_HPP_
#define MSFSER_DATASET_HPP_

#include <string>
#include <vector>

#include "msfser/dsp.hpp"
#include "msfser/model.hpp"

namespace msfser {

/// Directory layout written by GenerateSynthetic (or by hand):
///   targets.csv        utt_id,valence,arousal,dominance[,split]
///   wav/<utt_id>.wav
///   embeddings.jsonl   optional; channels les, gs, es
struct DatasetOptions {
  std::string split = "all";  // "train", "test" or "all"
  FrameConfig frame;
  F0Options f0;
  std::size_t n_mels = 16;
  std::size_t threads = 1;  // feature extraction workers; results do not depend on it
};

struct TargetRow {
  std::string id;
  Vad targets{};
  std::string split;  // "train" when the column is absent
};

/// Throws kMalformedRecord with the line number.
std::vector<TargetRow> ParseTargetsCsv(const std::string &text);

/// Loads the selected split in file order. Missing embedding channels leave
/// the vector empty. Throws kIo, kMalformedRecord or kInvalidArgument.
std::vector<Utterance> LoadDataset(const std::string &dir, const DatasetOptions &opts);

/// FrameFeatureSeq as a T x dim matrix.
Tensor2 FramesToTensor(const FrameFeatureSeq &seq);

}  // namespace msfser

#endif  // MSFSER_DATASET_HPP_
