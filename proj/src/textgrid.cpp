// src/textgrid.cpp

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

#include "msfser/textgrid.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "msfser/error.hpp"

namespace msfser {

namespace {

constexpr double kTimeTolerance = 1e-9;

// Cursor over the body of a long-format file. Running out of input while a
// token is still expected means the declared sizes promised more than the
// file holds, so every expectation reports kTruncatedFile at end of input.
class Scanner {
 public:
  explicit Scanner(std::string_view text) : text_(text) {}

  bool AtEnd() {
    SkipSpace();
    return pos_ >= text_.size();
  }

  bool Peek(std::string_view lit) {
    SkipSpace();
    return text_.substr(pos_, lit.size()) == lit;
  }

  void Expect(std::string_view lit) {
    if (AtEnd())
      Fail(ErrorCode::kTruncatedFile,
           "unexpected end of file, expected '" + std::string(lit) + "'");
    if (text_.substr(pos_, lit.size()) != lit)
      Malformed("expected '" + std::string(lit) + "' at body line " + std::to_string(Line()));
    pos_ += lit.size();
  }

  double Number() {
    if (AtEnd()) Fail(ErrorCode::kTruncatedFile, "unexpected end of file, expected a number");
    const char *begin = text_.data() + pos_;
    const char *end = text_.data() + text_.size();
    double value = 0.0;
    auto [ptr, ec] = std::from_chars(begin, end, value);
    if (ec != std::errc() || !std::isfinite(value))
      Malformed("bad number at body line " + std::to_string(Line()));
    pos_ += static_cast<std::size_t>(ptr - begin);
    return value;
  }

  std::size_t Count() {
    double v = Number();
    if (v < 0 || v != std::floor(v) || v > 1e9)
      Malformed("bad count at body line " + std::to_string(Line()));
    return static_cast<std::size_t>(v);
  }

  // Praat strings are double-quoted; an embedded quote is written as "".
  std::string QuotedString() {
    Expect("\"");
    std::string out;
    while (true) {
      if (pos_ >= text_.size()) Fail(ErrorCode::kTruncatedFile, "unterminated string");
      char c = text_[pos_++];
      if (c != '"') {
        out.push_back(c);
      } else if (pos_ < text_.size() && text_[pos_] == '"') {
        out.push_back('"');
        ++pos_;
      } else {
        return out;
      }
    }
  }

  double KeyNumber(std::string_view key) {
    Expect(key);
    Expect("=");
    return Number();
  }

  std::size_t KeyCount(std::string_view key) {
    Expect(key);
    Expect("=");
    return Count();
  }

  std::string KeyString(std::string_view key) {
    Expect(key);
    Expect("=");
    return QuotedString();
  }

  void IndexHeader(std::string_view word, std::size_t index) {
    Expect(word);
    Expect("[");
    if (Count() != index)
      Fail(ErrorCode::kMalformedBody,
           std::string(word) + " index out of order at body line " + std::to_string(Line()));
    Expect("]");
    Expect(":");
  }

 private:
  // A file cut part way through its last line is truncated, not malformed.
  [[noreturn]] void Malformed(const std::string &what) const {
    if (text_.find('\n', pos_) == std::string_view::npos && !text_.empty() && text_.back() != '\n')
      Fail(ErrorCode::kTruncatedFile, "file ends mid-line: " + what);
    Fail(ErrorCode::kMalformedBody, what);
  }

  void SkipSpace() {
    while (pos_ < text_.size() && (text_[pos_] == ' ' || text_[pos_] == '\t' ||
                                   text_[pos_] == '\r' || text_[pos_] == '\n'))
      ++pos_;
  }

  std::size_t Line() const {
    std::size_t n = 1;
    for (std::size_t i = 0; i < pos_ && i < text_.size(); ++i)
      if (text_[i] == '\n') ++n;
    return n;
  }

  std::string_view text_;
  std::size_t pos_ = 0;
};

std::string_view StripLine(std::string_view line) {
  while (!line.empty() && (line.back() == '\r' || line.back() == ' ' || line.back() == '\t'))
    line.remove_suffix(1);
  while (!line.empty() && (line.front() == ' ' || line.front() == '\t'))
    line.remove_prefix(1);
  return line;
}

// Consumes the two header lines and returns the offset of the body.
std::size_t CheckHeader(std::string_view text) {
  if (text.size() >= 2 && ((static_cast<unsigned char>(text[0]) == 0xFF &&
                            static_cast<unsigned char>(text[1]) == 0xFE) ||
                           (static_cast<unsigned char>(text[0]) == 0xFE &&
                            static_cast<unsigned char>(text[1]) == 0xFF)))
    Fail(ErrorCode::kMalformedHeader, "UTF-16 input must be transcoded to UTF-8 first");
  std::size_t pos = 0;
  if (text.substr(0, 3) == "\xEF\xBB\xBF") pos = 3;

  auto next_line = [&]() -> std::string_view {
    while (pos < text.size()) {
      std::size_t nl = text.find('\n', pos);
      if (nl == std::string_view::npos) nl = text.size();
      std::string_view line = StripLine(text.substr(pos, nl - pos));
      pos = std::min(nl + 1, text.size());
      if (!line.empty()) return line;
    }
    return {};
  };
  if (next_line() != "File type = \"ooTextFile\"")
    Fail(ErrorCode::kMalformedHeader, "first line must be File type = \"ooTextFile\"");
  if (next_line() != "Object class = \"TextGrid\"")
    Fail(ErrorCode::kMalformedHeader, "second line must be Object class = \"TextGrid\"");
  return pos;
}

Tier ParseTier(Scanner &sc) {
  Tier tier;
  std::string cls = sc.KeyString("class");
  if (cls == "IntervalTier") {
    tier.kind = TierKind::kInterval;
  } else if (cls == "TextTier") {
    tier.kind = TierKind::kPoint;
  } else {
    Fail(ErrorCode::kMalformedBody, "unknown tier class \"" + cls + "\"");
  }
  tier.name = sc.KeyString("name");
  tier.xmin = sc.KeyNumber("xmin");
  tier.xmax = sc.KeyNumber("xmax");
  if (tier.kind == TierKind::kInterval) {
    sc.Expect("intervals:");
    std::size_t n = sc.KeyCount("size");
    for (std::size_t j = 1; j <= n; ++j) {
      sc.IndexHeader("intervals", j);
      Interval iv;
      iv.xmin = sc.KeyNumber("xmin");
      iv.xmax = sc.KeyNumber("xmax");
      iv.label = sc.KeyString("text");
      tier.intervals.push_back(std::move(iv));
    }
  } else {
    sc.Expect("points:");
    std::size_t n = sc.KeyCount("size");
    for (std::size_t j = 1; j <= n; ++j) {
      sc.IndexHeader("points", j);
      Point p;
      // Praat writes "number" here; some exporters write "time".
      p.time = sc.Peek("time") ? sc.KeyNumber("time") : sc.KeyNumber("number");
      p.mark = sc.KeyString("mark");
      tier.points.push_back(std::move(p));
    }
  }
  return tier;
}

bool IsBadTime(double t) { return !std::isfinite(t) || t < 0.0; }

std::string FormatTime(double t) {
  char buf[512];
  auto res = std::to_chars(buf, buf + sizeof(buf), t, std::chars_format::fixed);
  std::string s(buf, res.ptr);
  std::size_t dot = s.find('.');
  if (dot == std::string::npos) {
    s += ".000000";
  } else if (std::size_t decimals = s.size() - dot - 1; decimals < 6) {
    s.append(6 - decimals, '0');
  }
  return s;
}

std::string Quote(const std::string &label) {
  std::string out = "\"";
  for (char c : label) {
    if (c == '"') out += "\"\"";
    else out.push_back(c);
  }
  out += "\"";
  return out;
}

}  // namespace

const Tier *TextGrid::FindTier(std::string_view name) const {
  for (const Tier &t : tiers)
    if (t.name == name) return &t;
  return nullptr;
}

const std::set<std::string> &DefaultSilenceLabels() {
  static const std::set<std::string> labels = {"", "sil", "sp", "spn"};
  return labels;
}

void ValidateTextGrid(const TextGrid &tg) {
  if (IsBadTime(tg.xmin) || IsBadTime(tg.xmax) || tg.xmin > tg.xmax)
    Fail(ErrorCode::kNonMonotoneIntervals, "file bounds are not a valid time range");
  std::set<std::string> names;
  for (const Tier &tier : tg.tiers) {
    const std::string where = "tier \"" + tier.name + "\"";
    if (!names.insert(tier.name).second) Fail(ErrorCode::kMalformedBody, "duplicate " + where);
    if (IsBadTime(tier.xmin) || IsBadTime(tier.xmax) || tier.xmin > tier.xmax ||
        tier.xmin < tg.xmin - kTimeTolerance || tier.xmax > tg.xmax + kTimeTolerance)
      Fail(ErrorCode::kNonMonotoneIntervals, where + " lies outside the file range");
    for (std::size_t i = 0; i < tier.intervals.size(); ++i) {
      const Interval &iv = tier.intervals[i];
      const std::string which = where + " interval " + std::to_string(i + 1);
      if (IsBadTime(iv.xmin) || IsBadTime(iv.xmax) || iv.xmin > iv.xmax)
        Fail(ErrorCode::kNonMonotoneIntervals, which + " has xmin > xmax");
      if (iv.xmin < tier.xmin - kTimeTolerance || iv.xmax > tier.xmax + kTimeTolerance)
        Fail(ErrorCode::kNonMonotoneIntervals, which + " lies outside the tier");
      if (i > 0 && tier.intervals[i - 1].xmax > iv.xmin + kTimeTolerance)
        Fail(ErrorCode::kNonMonotoneIntervals, which + " overlaps its predecessor");
    }
    for (std::size_t i = 0; i < tier.points.size(); ++i) {
      const Point &p = tier.points[i];
      if (IsBadTime(p.time) || p.time < tier.xmin - kTimeTolerance ||
          p.time > tier.xmax + kTimeTolerance || (i > 0 && tier.points[i - 1].time > p.time))
        Fail(ErrorCode::kNonMonotoneIntervals,
             where + " point " + std::to_string(i + 1) + " is out of order");
    }
  }
}

TextGrid ParseTextGrid(std::string_view text) {
  std::size_t body = CheckHeader(text);
  Scanner sc(text.substr(body));
  // The short text format has bare values where the long one has "xmin = ".
  if (!sc.Peek("xmin")) Fail(ErrorCode::kMalformedHeader, "only the long text format is supported");

  TextGrid tg;
  tg.xmin = sc.KeyNumber("xmin");
  tg.xmax = sc.KeyNumber("xmax");
  sc.Expect("tiers?");
  if (sc.Peek("<absent>")) {
    sc.Expect("<absent>");
  } else {
    sc.Expect("<exists>");
    std::size_t n = sc.KeyCount("size");
    sc.Expect("item");
    sc.Expect("[");
    sc.Expect("]");
    sc.Expect(":");
    for (std::size_t i = 1; i <= n; ++i) {
      sc.IndexHeader("item", i);
      tg.tiers.push_back(ParseTier(sc));
    }
  }
  if (!sc.AtEnd()) Fail(ErrorCode::kMalformedBody, "trailing content after the last tier");
  ValidateTextGrid(tg);
  return tg;
}

TextGrid ReadTextGridFile(const std::string &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) Fail(ErrorCode::kIo, "cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ParseTextGrid(ss.str());
}

std::string SerializeTextGrid(const TextGrid &tg) {
  std::ostringstream os;
  os << "File type = \"ooTextFile\"\n"
     << "Object class = \"TextGrid\"\n\n"
     << "xmin = " << FormatTime(tg.xmin) << " \n"
     << "xmax = " << FormatTime(tg.xmax) << " \n";
  if (tg.tiers.empty()) {
    os << "tiers? <absent> \n";
    return os.str();
  }
  os << "tiers? <exists> \n"
     << "size = " << tg.tiers.size() << " \n"
     << "item []: \n";
  for (std::size_t i = 0; i < tg.tiers.size(); ++i) {
    const Tier &tier = tg.tiers[i];
    const bool intervals = tier.kind == TierKind::kInterval;
    os << "    item [" << i + 1 << "]:\n"
       << "        class = \"" << (intervals ? "IntervalTier" : "TextTier") << "\" \n"
       << "        name = " << Quote(tier.name) << " \n"
       << "        xmin = " << FormatTime(tier.xmin) << " \n"
       << "        xmax = " << FormatTime(tier.xmax) << " \n";
    if (intervals) {
      os << "        intervals: size = " << tier.intervals.size() << " \n";
      for (std::size_t j = 0; j < tier.intervals.size(); ++j) {
        const Interval &iv = tier.intervals[j];
        os << "        intervals [" << j + 1 << "]:\n"
           << "            xmin = " << FormatTime(iv.xmin) << " \n"
           << "            xmax = " << FormatTime(iv.xmax) << " \n"
           << "            text = " << Quote(iv.label) << " \n";
      }
    } else {
      os << "        points: size = " << tier.points.size() << " \n";
      for (std::size_t j = 0; j < tier.points.size(); ++j) {
        os << "        points [" << j + 1 << "]:\n"
           << "            number = " << FormatTime(tier.points[j].time) << " \n"
           << "            mark = " << Quote(tier.points[j].mark) << " \n";
      }
    }
  }
  return os.str();
}

namespace {

const Tier &RequireIntervalTier(const TextGrid &tg, std::string_view name) {
  const Tier *tier = tg.FindTier(name);
  if (tier == nullptr || tier->kind != TierKind::kInterval)
    Fail(ErrorCode::kUnknownTier, "no interval tier named \"" + std::string(name) + "\"");
  return *tier;
}

}  // namespace

std::vector<Interval> WordIntervals(const TextGrid &tg, std::string_view tier_name,
                                    const std::set<std::string> &silence) {
  const Tier &tier = RequireIntervalTier(tg, tier_name);
  std::vector<Interval> out;
  for (const Interval &iv : tier.intervals)
    if (!silence.contains(iv.label)) out.push_back(iv);
  return out;
}

std::vector<Interval> PhonesForWord(const TextGrid &tg, std::string_view phone_tier,
                                    const Interval &word, const std::set<std::string> &silence) {
  const Tier &tier = RequireIntervalTier(tg, phone_tier);
  std::vector<Interval> out;
  for (const Interval &iv : tier.intervals) {
    double centre = 0.5 * (iv.xmin + iv.xmax);
    if (centre >= word.xmin && centre < word.xmax && !silence.contains(iv.label))
      out.push_back(iv);
  }
  return out;
}

}  // namespace msfser
