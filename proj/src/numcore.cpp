// src/numcore.cpp

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

#include "msfser/numcore.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "msfser/error.hpp"

namespace msfser {

Tensor2::Tensor2(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows * cols)
    Fail(ErrorCode::kShapeMismatch, "tensor data length " + std::to_string(data_.size()) +
                                        " != " + std::to_string(rows) + "x" + std::to_string(cols));
}

Tensor2 Tensor2::Row(std::span<const double> values) {
  return Tensor2(1, values.size(), std::vector<double>(values.begin(), values.end()));
}

// --- RngState ---------------------------------------------------------------

std::uint64_t RngState::NextU64() {
  std::uint64_t z = seed_ + 0x9E3779B97F4A7C15ull * (++position_);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

double RngState::Uniform() { return static_cast<double>(NextU64() >> 11) * 0x1.0p-53; }

double RngState::Uniform(double lo, double hi) { return lo + (hi - lo) * Uniform(); }

double RngState::Normal() {
  // Box-Muller; 1 - U keeps the log argument in (0, 1].
  const double u1 = 1.0 - Uniform();
  const double u2 = Uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::size_t RngState::Below(std::size_t n) {
  if (n == 0) Fail(ErrorCode::kInvalidArgument, "Below(0)");
  // Rejection sampling removes modulo bias.
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  std::uint64_t r;
  do {
    r = NextU64();
  } while (r >= limit);
  return static_cast<std::size_t>(r % n);
}

// --- Dense layer ------------------------------------------------------------

Tensor2 Linear(const Tensor2 &x, const Tensor2 &w, std::span<const double> b) {
  if (x.cols() != w.rows() || b.size() != w.cols())
    Fail(ErrorCode::kShapeMismatch, "linear: x is " + std::to_string(x.rows()) + "x" +
                                        std::to_string(x.cols()) + ", W is " +
                                        std::to_string(w.rows()) + "x" + std::to_string(w.cols()) +
                                        ", b has " + std::to_string(b.size()));
  Tensor2 y(x.rows(), w.cols());
  for (std::size_t r = 0; r < x.rows(); ++r) {
    for (std::size_t o = 0; o < w.cols(); ++o) y(r, o) = b[o];
    for (std::size_t i = 0; i < x.cols(); ++i) {
      const double xi = x(r, i);
      if (xi == 0.0) continue;
      for (std::size_t o = 0; o < w.cols(); ++o) y(r, o) += xi * w(i, o);
    }
  }
  return y;
}

LinearGrads LinearBackward(const Tensor2 &x, const Tensor2 &w, const Tensor2 &dy) {
  if (dy.rows() != x.rows() || dy.cols() != w.cols() || x.cols() != w.rows())
    Fail(ErrorCode::kShapeMismatch, "linear backward: shapes disagree");
  LinearGrads g{Tensor2(x.rows(), x.cols()), Tensor2(w.rows(), w.cols()),
                std::vector<double>(w.cols(), 0.0)};
  for (std::size_t r = 0; r < x.rows(); ++r) {
    for (std::size_t o = 0; o < w.cols(); ++o) g.db[o] += dy(r, o);
    for (std::size_t i = 0; i < x.cols(); ++i) {
      double acc = 0.0;
      const double xi = x(r, i);
      for (std::size_t o = 0; o < w.cols(); ++o) {
        acc += dy(r, o) * w(i, o);
        g.dw(i, o) += xi * dy(r, o);
      }
      g.dx(r, i) = acc;
    }
  }
  return g;
}

// --- Activations ------------------------------------------------------------

double Sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

Tensor2 Activate(const Tensor2 &x, Activation kind) {
  Tensor2 y(x.rows(), x.cols());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double v = x.data()[i];
    switch (kind) {
      case Activation::kSigmoid: y.data()[i] = Sigmoid(v); break;
      case Activation::kTanh: y.data()[i] = std::tanh(v); break;
      case Activation::kRelu: y.data()[i] = v > 0.0 ? v : 0.0; break;
    }
  }
  return y;
}

Tensor2 ActivateBackward(const Tensor2 &x, const Tensor2 &y, const Tensor2 &dy, Activation kind) {
  if (!x.SameShape(dy) || !y.SameShape(dy))
    Fail(ErrorCode::kShapeMismatch, "activation backward: shapes disagree");
  Tensor2 dx(x.rows(), x.cols());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double yi = y.data()[i];
    double d = 0.0;
    switch (kind) {
      case Activation::kSigmoid: d = yi * (1.0 - yi); break;
      case Activation::kTanh: d = 1.0 - yi * yi; break;
      case Activation::kRelu: d = x.data()[i] > 0.0 ? 1.0 : 0.0; break;
    }
    dx.data()[i] = d * dy.data()[i];
  }
  return dx;
}

std::vector<double> Softmax(std::span<const double> x) {
  std::vector<double> y(x.size());
  if (x.empty()) return y;
  const double top = *std::max_element(x.begin(), x.end());
  double sum = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    y[i] = std::exp(x[i] - top);
    sum += y[i];
  }
  for (double &v : y) v /= sum;
  return y;
}

std::vector<double> SoftmaxBackward(std::span<const double> y, std::span<const double> dy) {
  if (y.size() != dy.size()) Fail(ErrorCode::kShapeMismatch, "softmax backward: lengths differ");
  double dot = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) dot += y[i] * dy[i];
  std::vector<double> dx(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) dx[i] = y[i] * (dy[i] - dot);
  return dx;
}

// --- Layer norm -------------------------------------------------------------

Tensor2 LayerNorm(const Tensor2 &x, std::span<const double> gain, std::span<const double> bias,
                  LayerNormCache *cache) {
  const std::size_t n = x.cols();
  if (n == 0 || gain.size() != n || bias.size() != n)
    Fail(ErrorCode::kShapeMismatch, "layer norm: gain/bias must match the row width");
  Tensor2 xhat(x.rows(), n);
  std::vector<double> inv_std(x.rows());
  Tensor2 y(x.rows(), n);
  for (std::size_t r = 0; r < x.rows(); ++r) {
    double mean = 0.0;
    for (std::size_t c = 0; c < n; ++c) mean += x(r, c);
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t c = 0; c < n; ++c) var += (x(r, c) - mean) * (x(r, c) - mean);
    var /= static_cast<double>(n);
    inv_std[r] = 1.0 / std::sqrt(var + kLayerNormEps);
    for (std::size_t c = 0; c < n; ++c) {
      xhat(r, c) = (x(r, c) - mean) * inv_std[r];
      y(r, c) = gain[c] * xhat(r, c) + bias[c];
    }
  }
  if (cache != nullptr) {
    cache->normalized = std::move(xhat);
    cache->inv_std = std::move(inv_std);
  }
  return y;
}

LayerNormGrads LayerNormBackward(const LayerNormCache &cache, std::span<const double> gain,
                                 const Tensor2 &dy) {
  const Tensor2 &xhat = cache.normalized;
  if (!xhat.SameShape(dy) || gain.size() != dy.cols())
    Fail(ErrorCode::kShapeMismatch, "layer norm backward: shapes disagree");
  const std::size_t n = dy.cols();
  LayerNormGrads g{Tensor2(dy.rows(), n), std::vector<double>(n, 0.0), std::vector<double>(n, 0.0)};
  std::vector<double> dxhat(n);
  for (std::size_t r = 0; r < dy.rows(); ++r) {
    double sum = 0.0, dot = 0.0;
    for (std::size_t c = 0; c < n; ++c) {
      g.dgain[c] += dy(r, c) * xhat(r, c);
      g.dbias[c] += dy(r, c);
      dxhat[c] = dy(r, c) * gain[c];
      sum += dxhat[c];
      dot += dxhat[c] * xhat(r, c);
    }
    const double inv_n = 1.0 / static_cast<double>(n);
    for (std::size_t c = 0; c < n; ++c)
      g.dx(r, c) = cache.inv_std[r] * (dxhat[c] - inv_n * sum - xhat(r, c) * inv_n * dot);
  }
  return g;
}

Tensor2 Dropout(const Tensor2 &x, double p, RngState &rng, bool training, Tensor2 *mask) {
  if (!(p >= 0.0 && p < 1.0)) Fail(ErrorCode::kInvalidArgument, "dropout p must be in [0, 1)");
  Tensor2 m(x.rows(), x.cols(), 1.0);
  if (training && p > 0.0) {
    const double keep_scale = 1.0 / (1.0 - p);
    for (double &v : m.data()) v = rng.Uniform() < p ? 0.0 : keep_scale;
  }
  Tensor2 y(x.rows(), x.cols());
  for (std::size_t i = 0; i < x.size(); ++i) y.data()[i] = x.data()[i] * m.data()[i];
  if (mask != nullptr) *mask = std::move(m);
  return y;
}

// --- Concordance ------------------------------------------------------------

namespace {

struct Moments {
  double mean_p = 0.0, mean_t = 0.0, var_p = 0.0, var_t = 0.0, cov = 0.0;
};

Moments ComputeMoments(std::span<const double> p, std::span<const double> t) {
  Moments m;
  const double n = static_cast<double>(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) {
    m.mean_p += p[i];
    m.mean_t += t[i];
  }
  m.mean_p /= n;
  m.mean_t /= n;
  // One correction pass; makes the mean of a constant input exact.
  double fix_p = 0.0, fix_t = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    fix_p += p[i] - m.mean_p;
    fix_t += t[i] - m.mean_t;
  }
  m.mean_p += fix_p / n;
  m.mean_t += fix_t / n;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double dp = p[i] - m.mean_p, dt = t[i] - m.mean_t;
    m.var_p += dp * dp;
    m.var_t += dt * dt;
    m.cov += dp * dt;
  }
  m.var_p /= n;
  m.var_t /= n;
  m.cov /= n;
  return m;
}

void CheckPair(std::size_t a, std::size_t b) {
  if (a != b) Fail(ErrorCode::kLengthMismatch, std::to_string(a) + " vs " + std::to_string(b));
  if (a < 2) Fail(ErrorCode::kTooShort, "CCC needs at least two values");
}

}  // namespace

double Ccc(std::span<const double> pred, std::span<const double> target) {
  CheckPair(pred.size(), target.size());
  const Moments m = ComputeMoments(pred, target);
  const double gap = m.mean_p - m.mean_t;
  const double denom = m.var_p + m.var_t + gap * gap;
  if (denom <= 0.0) return 1.0;
  return 2.0 * m.cov / denom;
}

LossWithGrad CccLoss(const Tensor2 &pred, const Tensor2 &target) {
  if (!pred.SameShape(target)) Fail(ErrorCode::kLengthMismatch, "pred and target shapes differ");
  if (pred.rows() < 2) Fail(ErrorCode::kTooShort, "CCC loss needs a batch of at least 2");
  const std::size_t n = pred.rows();
  const double inv_n = 1.0 / static_cast<double>(n);
  LossWithGrad out{0.0, Tensor2(n, pred.cols())};
  std::vector<double> p(n), t(n);
  for (std::size_t d = 0; d < pred.cols(); ++d) {
    for (std::size_t i = 0; i < n; ++i) {
      p[i] = pred(i, d);
      t[i] = target(i, d);
    }
    const Moments m = ComputeMoments(p, t);
    const double gap = m.mean_p - m.mean_t;
    const double denom = m.var_p + m.var_t + gap * gap;
    if (denom <= 0.0) continue;  // CCC defined as 1, flat there
    const double ccc = 2.0 * m.cov / denom;
    out.loss += 1.0 - ccc;
    // d ccc / d p_i = 2 (t_i - mt)/(n D) - ccc * 2 ((p_i - mp) + (mp - mt)) / (n D)
    for (std::size_t i = 0; i < n; ++i) {
      const double dccc = 2.0 * inv_n / denom *
                          ((t[i] - m.mean_t) - ccc * ((p[i] - m.mean_p) + gap));
      out.grad(i, d) = -dccc;
    }
  }
  return out;
}

LossWithGrad MseLoss(const Tensor2 &pred, const Tensor2 &target) {
  if (!pred.SameShape(target)) Fail(ErrorCode::kLengthMismatch, "pred and target shapes differ");
  if (pred.rows() == 0) Fail(ErrorCode::kTooShort, "empty batch");
  const double inv_n = 1.0 / static_cast<double>(pred.rows());
  LossWithGrad out{0.0, Tensor2(pred.rows(), pred.cols())};
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double diff = pred.data()[i] - target.data()[i];
    out.loss += diff * diff * inv_n;
    out.grad.data()[i] = 2.0 * diff * inv_n;
  }
  return out;
}

// --- Parameters and optimiser ----------------------------------------------

std::size_t ParamTape::Add(const std::string &name, Tensor2 value) {
  if (Contains(name)) Fail(ErrorCode::kDuplicateKey, "parameter " + name);
  Param p;
  p.name = name;
  p.grad = Tensor2(value.rows(), value.cols());
  p.m = Tensor2(value.rows(), value.cols());
  p.v = Tensor2(value.rows(), value.cols());
  p.value = std::move(value);
  params_.push_back(std::move(p));
  return params_.size() - 1;
}

std::size_t ParamTape::Index(const std::string &name) const {
  for (std::size_t i = 0; i < params_.size(); ++i)
    if (params_[i].name == name) return i;
  Fail(ErrorCode::kMissingKey, "parameter " + name);
}

bool ParamTape::Contains(const std::string &name) const {
  return std::any_of(params_.begin(), params_.end(),
                     [&](const Param &p) { return p.name == name; });
}

void ParamTape::ZeroGrad() {
  for (Param &p : params_) p.grad.Fill(0.0);
}

void ParamTape::ScaleGrad(double factor) {
  for (Param &p : params_)
    for (double &g : p.grad.data()) g *= factor;
}

std::size_t ParamTape::ParameterCount() const {
  std::size_t n = 0;
  for (const Param &p : params_) n += p.value.size();
  return n;
}

void AdamWStep(ParamTape &tape, const AdamWOptions &opts) {
  ++tape.step;
  const double t = static_cast<double>(tape.step);
  const double c1 = 1.0 - std::pow(opts.beta1, t);
  const double c2 = 1.0 - std::pow(opts.beta2, t);
  for (Param &p : tape) {
    std::vector<double> &w = p.value.data();
    const std::vector<double> &g = p.grad.data();
    std::vector<double> &m = p.m.data();
    std::vector<double> &v = p.v.data();
    for (std::size_t i = 0; i < w.size(); ++i) {
      w[i] -= opts.lr * opts.weight_decay * w[i];
      m[i] = opts.beta1 * m[i] + (1.0 - opts.beta1) * g[i];
      v[i] = opts.beta2 * v[i] + (1.0 - opts.beta2) * g[i] * g[i];
      const double mhat = m[i] / c1;
      const double vhat = v[i] / c2;
      w[i] -= opts.lr * mhat / (std::sqrt(vhat) + opts.eps);
    }
  }
}

std::vector<double> FiniteDiffGrad(const std::function<double(std::span<const double>)> &f,
                                   std::span<const double> x, double eps) {
  std::vector<double> probe(x.begin(), x.end());
  std::vector<double> grad(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double orig = probe[i];
    probe[i] = orig + eps;
    const double up = f(probe);
    probe[i] = orig - eps;
    const double down = f(probe);
    probe[i] = orig;
    grad[i] = (up - down) / (2.0 * eps);
  }
  return grad;
}

double RelativeError(std::span<const double> a, std::span<const double> b, double floor) {
  if (a.size() != b.size()) Fail(ErrorCode::kLengthMismatch, "relative error of unequal lengths");
  double diff = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff += (a[i] - b[i]) * (a[i] - b[i]);
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  return std::sqrt(diff) / std::max({std::sqrt(na), std::sqrt(nb), floor});
}

}  // namespace msfser
