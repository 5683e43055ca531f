// src/dsp.cpp

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

#include "msfser/dsp.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "msfser/error.hpp"
#include "msfser/fft.hpp"

namespace msfser {

std::size_t FrameConfig::WindowSamples(int sample_rate) const {
  return static_cast<std::size_t>(std::lround(win_ms * sample_rate / 1000.0));
}

std::size_t FrameConfig::HopSamples(int sample_rate) const {
  return static_cast<std::size_t>(std::lround(hop_ms * sample_rate / 1000.0));
}

void FrameConfig::Validate() const {
  if (!(hop_ms > 0.0) || !(hop_ms <= win_ms) || !std::isfinite(win_ms))
    Fail(ErrorCode::kInvalidArgument, "frame config needs 0 < hop_ms <= win_ms");
}

Frames FrameSignal(const AudioBuffer &audio, const FrameConfig &cfg) {
  cfg.Validate();
  ValidateAudio(audio);
  Frames out;
  out.window_samples = cfg.WindowSamples(audio.sample_rate);
  out.hop_samples = std::max<std::size_t>(1, cfg.HopSamples(audio.sample_rate));
  const std::size_t w = out.window_samples, h = out.hop_samples;
  const std::size_t len = audio.samples.size();
  if (w == 0) Fail(ErrorCode::kInvalidArgument, "window shorter than one sample");
  if (len < w)
    Fail(ErrorCode::kSignalTooShort, std::to_string(len) + " samples < window of " +
                                         std::to_string(w));
  const std::size_t count = (len - w) / h + 1;
  out.windows.reserve(count);
  out.times.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    auto begin = audio.samples.begin() + static_cast<std::ptrdiff_t>(i * h);
    out.windows.emplace_back(begin, begin + static_cast<std::ptrdiff_t>(w));
    out.times.push_back((static_cast<double>(i * h) + static_cast<double>(w) / 2.0) /
                        audio.sample_rate);
  }
  return out;
}

std::vector<double> TaperWindow(WindowKind kind, std::size_t n) {
  std::vector<double> w(n, 1.0);
  if (kind == WindowKind::kHann) {
    // Periodic Hann, the usual STFT choice.
    for (std::size_t i = 0; i < n; ++i)
      w[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) /
                                  static_cast<double>(n));
  }
  return w;
}

namespace {

std::vector<double> Tapered(std::span<const double> frame, WindowKind window) {
  std::vector<double> taper = TaperWindow(window, frame.size());
  std::vector<double> x(frame.size());
  for (std::size_t i = 0; i < frame.size(); ++i) x[i] = frame[i] * taper[i];
  return x;
}

double HzToMel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double MelToHz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

double MelEdgeHz(std::size_t edge, std::size_t n_bands, int sample_rate) {
  const double top = HzToMel(sample_rate / 2.0);
  return MelToHz(top * static_cast<double>(edge) / static_cast<double>(n_bands + 1));
}

}  // namespace

double StftEnergy(std::span<const double> frame, WindowKind window) {
  std::vector<double> mag = OneSidedMagnitude(Tapered(frame, window));
  double sum = 0.0;
  for (double m : mag) sum += m * m;
  return std::sqrt(sum);
}

double MelBandCenterHz(std::size_t band, std::size_t n_bands, int sample_rate) {
  return MelEdgeHz(band + 1, n_bands, sample_rate);
}

std::vector<double> MelBandEnergies(std::span<const double> frame, int sample_rate,
                                    std::size_t n_bands, WindowKind window) {
  if (n_bands == 0) Fail(ErrorCode::kInvalidArgument, "n_bands must be >= 1");
  if (sample_rate <= 0) Fail(ErrorCode::kInvalidArgument, "sample rate must be positive");
  std::vector<double> out(n_bands, 0.0);
  if (frame.empty()) return out;
  std::vector<double> mag = OneSidedMagnitude(Tapered(frame, window));
  const double bin_hz = static_cast<double>(sample_rate) / static_cast<double>(frame.size());
  for (std::size_t b = 0; b < n_bands; ++b) {
    const double lo = MelEdgeHz(b, n_bands, sample_rate);
    const double mid = MelEdgeHz(b + 1, n_bands, sample_rate);
    const double hi = MelEdgeHz(b + 2, n_bands, sample_rate);
    double e = 0.0;
    for (std::size_t k = 0; k < mag.size(); ++k) {
      const double f = static_cast<double>(k) * bin_hz;
      double weight = 0.0;
      if (f > lo && f <= mid) weight = (f - lo) / (mid - lo);
      else if (f > mid && f < hi) weight = (hi - f) / (hi - mid);
      e += weight * mag[k] * mag[k];
    }
    out[b] = std::log1p(e);
  }
  return out;
}

ProsodyTrack EstimateF0(const AudioBuffer &audio, const FrameConfig &cfg, const F0Options &opts) {
  if (!(opts.f0_min > 0.0) || !(opts.f0_min < opts.f0_max))
    Fail(ErrorCode::kInvalidArgument, "need 0 < f0_min < f0_max");
  if (audio.sample_rate < 4.0 * opts.f0_max)
    Fail(ErrorCode::kInvalidArgument, "sample rate must be at least 4 * f0_max");
  Frames frames = FrameSignal(audio, cfg);
  const std::vector<double> &x = audio.samples;
  const std::size_t len = x.size();
  const double sr = audio.sample_rate;
  const std::size_t w = frames.window_samples;
  const std::size_t lag_min = std::max<std::size_t>(2, static_cast<std::size_t>(std::floor(sr / opts.f0_max)));
  const std::size_t lag_max = static_cast<std::size_t>(std::ceil(sr / opts.f0_min));

  ProsodyTrack track;
  track.frame_times = frames.times;
  const std::size_t count = frames.times.size();
  track.log_f0.assign(count, 0.0);
  track.voiced.assign(count, false);
  track.energy.resize(count);

  auto sample = [&](std::size_t i) { return i < len ? x[i] : 0.0; };
  std::vector<double> nccf(lag_max + 2, 0.0);
  for (std::size_t f = 0; f < count; ++f) {
    const std::vector<double> &frame = frames.windows[f];
    track.energy[f] = StftEnergy(frame, cfg.window);

    double e0 = 0.0;
    for (double s : frame) e0 += s * s;
    if (std::sqrt(e0 / static_cast<double>(w)) <= opts.silence_rms) continue;

    // Normalised cross-correlation of the frame with the signal shifted by
    // each lag; samples past the end of the signal count as zero.
    const std::size_t start = f * frames.hop_samples;
    double best = -1.0;
    for (std::size_t lag = lag_min - 1; lag <= lag_max + 1; ++lag) {
      double cross = 0.0, el = 0.0;
      for (std::size_t n = 0; n < w; ++n) {
        double shifted = sample(start + n + lag);
        cross += frame[n] * shifted;
        el += shifted * shifted;
      }
      nccf[lag] = el > 0.0 ? cross / std::sqrt(e0 * el) : 0.0;
      if (lag >= lag_min && lag <= lag_max) best = std::max(best, nccf[lag]);
    }
    if (best < opts.voicing_threshold) continue;

    // Take the shortest-lag local peak that comes close to the global one;
    // multiples of the true period score almost as high and would otherwise
    // produce sub-octave errors.
    std::size_t chosen = 0;
    for (std::size_t lag = lag_min; lag <= lag_max; ++lag) {
      if (nccf[lag] >= nccf[lag - 1] && nccf[lag] >= nccf[lag + 1] &&
          nccf[lag] >= 0.85 * best && nccf[lag] >= opts.voicing_threshold) {
        chosen = lag;
        break;
      }
    }
    if (chosen == 0) continue;

    const double a = nccf[chosen - 1], b = nccf[chosen], c = nccf[chosen + 1];
    const double denom = a - 2.0 * b + c;
    double offset = denom < 0.0 ? 0.5 * (a - c) / denom : 0.0;
    offset = std::clamp(offset, -0.5, 0.5);
    const double f0 = sr / (static_cast<double>(chosen) + offset);
    if (f0 < opts.f0_min * 0.99 || f0 > opts.f0_max * 1.01) continue;
    track.voiced[f] = true;
    track.log_f0[f] = std::log(f0);
  }
  return track;
}

std::string ProsodyTrack::ToCsv() const {
  std::ostringstream os;
  os.precision(17);
  os << "time_s,voiced,f0_hz,log_f0,energy\n";
  for (std::size_t i = 0; i < size(); ++i) {
    os << frame_times[i] << ',' << (voiced[i] ? 1 : 0) << ',';
    if (voiced[i]) os << std::exp(log_f0[i]) << ',' << log_f0[i];
    else os << ',';
    os << ',' << energy[i] << '\n';
  }
  return os.str();
}

FrameFeatureSeq AcousticFrames(const AudioBuffer &audio, const FrameConfig &cfg,
                               const ProsodyTrack &track, std::size_t n_bands) {
  Frames frames = FrameSignal(audio, cfg);
  if (frames.times.size() != track.size())
    Fail(ErrorCode::kLengthMismatch, "prosody track does not match the framing");
  FrameFeatureSeq seq;
  seq.dim = 3 + n_bands;
  seq.values.reserve(seq.dim * frames.times.size());
  for (std::size_t f = 0; f < frames.times.size(); ++f) {
    // log1p keeps silent frames at 0 instead of a large negative outlier.
    seq.values.push_back(std::log1p(track.energy[f]));
    seq.values.push_back(track.voiced[f] ? track.log_f0[f] : 0.0);
    seq.values.push_back(track.voiced[f] ? 1.0 : 0.0);
    std::vector<double> mel = MelBandEnergies(frames.windows[f], audio.sample_rate, n_bands, cfg.window);
    seq.values.insert(seq.values.end(), mel.begin(), mel.end());
  }
  return seq;
}

FrameFeatureSeq AcousticFrames(const AudioBuffer &audio, const FrameConfig &cfg,
                               std::size_t n_bands, const F0Options &opts) {
  return AcousticFrames(audio, cfg, EstimateF0(audio, cfg, opts), n_bands);
}

}  // namespace msfser
