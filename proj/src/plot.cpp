// src/plot.cpp

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

#include "msfser/plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace msfser {

namespace {

constexpr double kWidth = 900.0;
constexpr double kPanelHeight = 220.0;
constexpr double kLeft = 60.0;
constexpr double kRight = 20.0;
constexpr double kTop = 40.0;
constexpr double kGapBetween = 50.0;

std::string Num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string Escape(const std::string &s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

struct Panel {
  double top;
  double lo, hi;
  double t0, t1;

  double X(double t) const {
    return kLeft + (t - t0) / std::max(t1 - t0, 1e-9) * (kWidth - kLeft - kRight);
  }
  double Y(double v) const {
    return top + kPanelHeight - (v - lo) / std::max(hi - lo, 1e-12) * kPanelHeight;
  }
};

// Polyline segments; a gap in `keep` starts a new segment.
void Curve(std::ostringstream &os, const Panel &p, const ProsodyTrack &track,
           const std::vector<double> &values, const std::vector<bool> &keep, const char *colour) {
  std::string points;
  auto flush = [&] {
    if (!points.empty())
      os << "<polyline fill=\"none\" stroke=\"" << colour << "\" stroke-width=\"1.5\" points=\""
         << points << "\"/>\n";
    points.clear();
  };
  for (std::size_t i = 0; i < track.size(); ++i) {
    if (!keep[i]) {
      flush();
      continue;
    }
    points += Num(p.X(track.frame_times[i])) + "," + Num(p.Y(values[i])) + " ";
  }
  flush();
}

void Frame(std::ostringstream &os, const Panel &p, const LemfResult &r, const std::string &label) {
  const double bottom = p.top + kPanelHeight;
  // Emphasis segment first so the curve draws on top of it.
  if (!r.segment.word_indices.empty())
    os << "<rect x=\"" << Num(p.X(r.segment.start)) << "\" y=\"" << Num(p.top) << "\" width=\""
       << Num(p.X(r.segment.end) - p.X(r.segment.start)) << "\" height=\"" << Num(kPanelHeight)
       << "\" fill=\"#ffe9a8\"/>\n";
  os << "<rect x=\"" << Num(kLeft) << "\" y=\"" << Num(p.top) << "\" width=\""
     << Num(kWidth - kLeft - kRight) << "\" height=\"" << Num(kPanelHeight)
     << "\" fill=\"none\" stroke=\"#333\"/>\n";
  for (const WordProsody &w : r.words) {
    for (double t : {w.interval.xmin, w.interval.xmax})
      os << "<line x1=\"" << Num(p.X(t)) << "\" y1=\"" << Num(p.top) << "\" x2=\"" << Num(p.X(t))
         << "\" y2=\"" << Num(bottom) << "\" stroke=\"#999\" stroke-dasharray=\"3,3\"/>\n";
    os << "<text x=\"" << Num(p.X(0.5 * (w.interval.xmin + w.interval.xmax))) << "\" y=\""
       << Num(p.top + 14) << "\" font-size=\"11\" text-anchor=\"middle\">" << Escape(w.word)
       << "</text>\n";
  }
  os << "<text x=\"" << Num(kLeft - 8) << "\" y=\"" << Num(p.top + 4)
     << "\" font-size=\"10\" text-anchor=\"end\">" << Num(p.hi) << "</text>\n";
  os << "<text x=\"" << Num(kLeft - 8) << "\" y=\"" << Num(bottom)
     << "\" font-size=\"10\" text-anchor=\"end\">" << Num(p.lo) << "</text>\n";
  os << "<text x=\"" << Num(kLeft) << "\" y=\"" << Num(p.top - 6) << "\" font-size=\"12\">"
     << Escape(label) << "</text>\n";
}

}  // namespace

std::string F0PlotCsv(const ProsodyTrack &track) {
  std::ostringstream os;
  os.precision(17);
  os << "time_s,log_f0\n";
  for (std::size_t i = 0; i < track.size(); ++i)
    if (track.voiced[i]) os << track.frame_times[i] << ',' << track.log_f0[i] << '\n';
  return os.str();
}

std::string EnergyPlotCsv(const ProsodyTrack &track) {
  std::ostringstream os;
  os.precision(17);
  os << "time_s,energy\n";
  for (std::size_t i = 0; i < track.size(); ++i)
    os << track.frame_times[i] << ',' << track.energy[i] << '\n';
  return os.str();
}

std::string RenderEmphasisSvg(const LemfResult &r, const std::string &title) {
  const ProsodyTrack &track = r.track;
  double t0 = 0.0, t1 = 1.0;
  if (track.size() > 0) {
    t0 = std::min(track.frame_times.front(), r.words.empty() ? 1e300 : r.words.front().interval.xmin);
    t1 = std::max(track.frame_times.back(), r.words.empty() ? -1e300 : r.words.back().interval.xmax);
  }

  double f_lo = 1e300, f_hi = -1e300, e_hi = 0.0;
  for (std::size_t i = 0; i < track.size(); ++i) {
    if (track.voiced[i]) {
      f_lo = std::min(f_lo, track.log_f0[i]);
      f_hi = std::max(f_hi, track.log_f0[i]);
    }
    e_hi = std::max(e_hi, track.energy[i]);
  }
  if (f_lo > f_hi) f_lo = 4.0, f_hi = 6.0;
  const double pad = std::max(0.05, 0.1 * (f_hi - f_lo));
  Panel pitch{kTop, f_lo - pad, f_hi + pad, t0, t1};
  Panel energy{kTop + kPanelHeight + kGapBetween, 0.0, e_hi > 0.0 ? 1.05 * e_hi : 1.0, t0, t1};
  const double height = energy.top + kPanelHeight + 40.0;

  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << Num(kWidth) << "\" height=\""
     << Num(height) << "\" viewBox=\"0 0 " << Num(kWidth) << " " << Num(height)
     << "\" font-family=\"sans-serif\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << Num(kWidth / 2) << "\" y=\"20\" font-size=\"14\" text-anchor=\"middle\">"
     << Escape(title) << "</text>\n";

  Frame(os, pitch, r, "log F0");
  Curve(os, pitch, track, track.log_f0, track.voiced, "#1f5fbf");
  Frame(os, energy, r, "energy");
  Curve(os, energy, track, track.energy, std::vector<bool>(track.size(), true), "#c0392b");

  os << "<text x=\"" << Num(kWidth / 2) << "\" y=\"" << Num(height - 10)
     << "\" font-size=\"11\" text-anchor=\"middle\">time (s) " << Num(t0) << " to " << Num(t1)
     << "</text>\n";
  os << "</svg>\n";
  return os.str();
}

}  // namespace msfser
