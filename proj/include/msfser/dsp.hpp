// msfser/dsp.hpp

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

#ifndef MSFSER_DSP_HPP_
#define MSFSER_DSP_HPP_

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "msfser/wav.hpp"

namespace msfser {

enum class WindowKind { kRectangular, kHann };

struct FrameConfig {
  double win_ms = 20.0;
  double hop_ms = 5.0;
  WindowKind window = WindowKind::kHann;

  std::size_t WindowSamples(int sample_rate) const;
  std::size_t HopSamples(int sample_rate) const;
  void Validate() const;
};

struct Frames {
  std::vector<std::vector<double>> windows;
  std::vector<double> times;  // frame centres, seconds
  std::size_t window_samples = 0;
  std::size_t hop_samples = 0;
};

/// Splits audio into frames [i*H, i*H + W). Throws kSignalTooShort if the
/// signal holds fewer than W samples.
Frames FrameSignal(const AudioBuffer &audio, const FrameConfig &cfg);

std::vector<double> TaperWindow(WindowKind kind, std::size_t n);

/// L2 norm of the one-sided magnitude spectrum (bins 0..N/2) of the tapered
/// frame.
double StftEnergy(std::span<const double> frame, WindowKind window);

struct F0Options {
  double f0_min = 40.0;
  double f0_max = 500.0;
  double voicing_threshold = 0.3;
  double silence_rms = 1e-4;
};

struct ProsodyTrack {
  std::vector<double> frame_times;
  std::vector<double> log_f0;  // natural log of Hz; 0 where unvoiced
  std::vector<bool> voiced;
  std::vector<double> energy;

  std::size_t size() const { return frame_times.size(); }
  /// CSV with header time_s,voiced,f0_hz,log_f0,energy; f0_hz and log_f0
  /// are empty on unvoiced rows.
  std::string ToCsv() const;
};

/// Pitch by normalised cross-correlation over lags [sr/f0_max, sr/f0_min],
/// refined by parabolic interpolation; energy per frame via StftEnergy.
ProsodyTrack EstimateF0(const AudioBuffer &audio, const FrameConfig &cfg,
                        const F0Options &opts = {});

/// log(1 + energy) in each band of a triangular mel filterbank spanning
/// 0..sr/2, computed on the tapered frame's power spectrum.
std::vector<double> MelBandEnergies(std::span<const double> frame, int sample_rate,
                                    std::size_t n_bands,
                                    WindowKind window = WindowKind::kHann);

/// Centre frequency in Hz of mel band `band` (0-based) for the filterbank
/// MelBandEnergies builds.
double MelBandCenterHz(std::size_t band, std::size_t n_bands, int sample_rate);

/// Row-major per-frame feature matrix.
struct FrameFeatureSeq {
  std::size_t dim = 0;
  std::vector<double> values;

  std::size_t size() const { return dim == 0 ? 0 : values.size() / dim; }
  std::span<const double> frame(std::size_t t) const {
    return {values.data() + t * dim, dim};
  }
};

/// Frame layout: [log(1 + energy), log-F0 or 0, voiced flag, mel bands...].
FrameFeatureSeq AcousticFrames(const AudioBuffer &audio, const FrameConfig &cfg,
                               std::size_t n_bands = 16, const F0Options &opts = {});

/// Same as AcousticFrames but reuses an already computed track.
FrameFeatureSeq AcousticFrames(const AudioBuffer &audio, const FrameConfig &cfg,
                               const ProsodyTrack &track, std::size_t n_bands);

}  // namespace msfser

#endif  // MSFSER_DSP_HPP_
