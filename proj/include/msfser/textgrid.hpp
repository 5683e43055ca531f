// msfser/textgrid.hpp

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

#ifndef MSFSER_TEXTGRID_HPP_
#define MSFSER_TEXTGRID_HPP_

#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace msfser {

struct Interval {
  double xmin = 0.0;
  double xmax = 0.0;
  std::string label;

  bool operator==(const Interval &) const = default;
};

struct Point {
  double time = 0.0;
  std::string mark;

  bool operator==(const Point &) const = default;
};

enum class TierKind { kInterval, kPoint };

/// One tier of a TextGrid. Point tiers are kept so that a file round-trips,
/// but none of the alignment helpers look at them.
struct Tier {
  TierKind kind = TierKind::kInterval;
  std::string name;
  double xmin = 0.0;
  double xmax = 0.0;
  std::vector<Interval> intervals;
  std::vector<Point> points;

  bool operator==(const Tier &) const = default;
};

struct TextGrid {
  double xmin = 0.0;
  double xmax = 0.0;
  std::vector<Tier> tiers;

  bool operator==(const TextGrid &) const = default;

  /// Returns nullptr when no tier has this name.
  const Tier *FindTier(std::string_view name) const;
};

/// Labels treated as silence by the MFA-style aligners.
const std::set<std::string> &DefaultSilenceLabels();

/// Parses Praat long ("ooTextFile") TextGrid text. Short and binary formats
/// are rejected with kMalformedHeader. Throws Error with kMalformedHeader,
/// kMalformedBody, kTruncatedFile or kNonMonotoneIntervals; never returns a
/// partially filled grid.
TextGrid ParseTextGrid(std::string_view text);

/// Reads and parses a TextGrid file; kIo when it cannot be read.
TextGrid ReadTextGridFile(const std::string &path);

/// Writes long-format text. Times carry at least six decimals and enough
/// digits to round-trip exactly; quotes in labels are doubled.
std::string SerializeTextGrid(const TextGrid &tg);

/// Checks the tier ordering / containment / uniqueness invariants and throws
/// the same typed errors the parser would.
void ValidateTextGrid(const TextGrid &tg);

/// Non-silence intervals of `tier_name`, in order. Throws kUnknownTier.
std::vector<Interval> WordIntervals(
    const TextGrid &tg, std::string_view tier_name,
    const std::set<std::string> &silence = DefaultSilenceLabels());

/// Phones whose centre lies in [word.xmin, word.xmax), silence excluded.
std::vector<Interval> PhonesForWord(
    const TextGrid &tg, std::string_view phone_tier, const Interval &word,
    const std::set<std::string> &silence = DefaultSilenceLabels());

}  // namespace msfser

#endif  // MSFSER_TEXTGRID_HPP_
