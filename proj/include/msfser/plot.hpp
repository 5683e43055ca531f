// msfser/plot.hpp

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

#ifndef MSFSER_PLOT_HPP_
#define MSFSER_PLOT_HPP_

// Plot data for the emphasis view: a log-F0 panel and an energy panel over
// time, with word boundaries and the emphasis segment marked.

#include <string>

#include "msfser/lemf.hpp"

namespace msfser {

/// time_s,log_f0 for voiced frames only.
std::string F0PlotCsv(const ProsodyTrack &track);
/// time_s,energy for every frame.
std::string EnergyPlotCsv(const ProsodyTrack &track);

/// Self-contained SVG with both panels stacked.
std::string RenderEmphasisSvg(const LemfResult &result, const std::string &title);

}  // namespace msfser

#endif  // MSFSER_PLOT_HPP_
