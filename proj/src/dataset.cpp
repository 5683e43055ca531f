// src/dataset.cpp

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

#include "msfser/dataset.hpp"

#include <atomic>
#include <charconv>
#include <cmath>
#include <exception>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include "msfser/embeddings.hpp"
#include "msfser/error.hpp"
#include "msfser/wav.hpp"

namespace msfser {

namespace {

std::string ReadAll(const std::string &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) Fail(ErrorCode::kIo, "cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string> SplitCommas(const std::string &line) {
  std::vector<std::string> out(1);
  for (char c : line) {
    if (c == ',') out.emplace_back();
    else out.back() += c;
  }
  return out;
}

double ParseDouble(const std::string &s, std::size_t line_no) {
  double v = 0.0;
  const char *end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || ptr != end || !std::isfinite(v))
    Fail(ErrorCode::kMalformedRecord,
         "targets.csv line " + std::to_string(line_no) + ": bad number \"" + s + "\"");
  return v;
}

}  // namespace

std::vector<TargetRow> ParseTargetsCsv(const std::string &text) {
  std::vector<TargetRow> rows;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line_no == 1 && line.rfind("utt_id", 0) == 0) continue;
    std::vector<std::string> f = SplitCommas(line);
    if (f.size() != 4 && f.size() != 5)
      Fail(ErrorCode::kMalformedRecord, "targets.csv line " + std::to_string(line_no) +
                                            ": expected 4 or 5 fields");
    if (f[0].empty())
      Fail(ErrorCode::kMalformedRecord, "targets.csv line " + std::to_string(line_no) + ": empty id");
    TargetRow r;
    r.id = f[0];
    for (std::size_t d = 0; d < kNumDims; ++d) r.targets[d] = ParseDouble(f[d + 1], line_no);
    r.split = f.size() == 5 ? f[4] : "train";
    rows.push_back(std::move(r));
  }
  return rows;
}

Tensor2 FramesToTensor(const FrameFeatureSeq &seq) {
  return Tensor2(seq.size(), seq.dim, seq.values);
}

std::vector<Utterance> LoadDataset(const std::string &dir, const DatasetOptions &opts) {
  if (opts.split != "train" && opts.split != "test" && opts.split != "all")
    Fail(ErrorCode::kInvalidArgument, "split must be train, test or all, got " + opts.split);
  namespace fs = std::filesystem;
  const fs::path root(dir);
  if (!fs::is_directory(root)) Fail(ErrorCode::kIo, "dataset directory not found: " + dir);

  std::vector<TargetRow> rows = ParseTargetsCsv(ReadAll((root / "targets.csv").string()));
  std::vector<TargetRow> selected;
  for (TargetRow &r : rows)
    if (opts.split == "all" || r.split == opts.split) selected.push_back(std::move(r));

  EmbeddingStore store;
  const fs::path emb = root / "embeddings.jsonl";
  if (fs::exists(emb)) store = LoadEmbeddings(emb.string());

  std::vector<Utterance> out(selected.size());
  auto work = [&](std::size_t i) {
    const TargetRow &r = selected[i];
    Utterance &u = out[i];
    u.id = r.id;
    u.targets = r.targets;
    AudioBuffer audio = ReadWav((root / "wav" / (r.id + ".wav")).string());
    u.frames = FramesToTensor(AcousticFrames(audio, opts.frame, opts.n_mels, opts.f0));
    auto take = [&](Channel c) {
      return store.Contains(r.id, c) ? store.Get(r.id, c).values : std::vector<double>{};
    };
    u.h_local = take(Channel::kLes);
    u.h_global = take(Channel::kGs);
    u.h_ext = take(Channel::kEs);
  };

  const std::size_t n_threads = std::max<std::size_t>(1, std::min(opts.threads, out.size()));
  if (n_threads <= 1) {
    for (std::size_t i = 0; i < out.size(); ++i) work(i);
    return out;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex mu;
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < n_threads; ++t)
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < out.size(); i = next++) {
        try {
          work(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(mu);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  for (std::thread &t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
  return out;
}

}  // namespace msfser
