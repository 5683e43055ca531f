// msfser/numcore.hpp

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

#ifndef MSFSER_NUMCORE_HPP_
#define MSFSER_NUMCORE_HPP_

// Small double-precision building blocks with hand-written backward passes.
// Every backward here is checked against central finite differences in the
// tests.

#include <algorithm>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace msfser {

/// Dense row-major matrix.
class Tensor2 {
 public:
  Tensor2() = default;
  Tensor2(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Tensor2(std::size_t rows, std::size_t cols, std::vector<double> data);

  static Tensor2 Row(std::span<const double> values);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }

  double &operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::vector<double> &data() { return data_; }
  const std::vector<double> &data() const { return data_; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  void Fill(double v) { std::fill(data_.begin(), data_.end(), v); }
  bool SameShape(const Tensor2 &o) const { return rows_ == o.rows_ && cols_ == o.cols_; }
  bool operator==(const Tensor2 &) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// Seeded splitmix64 stream. Identical seed and call sequence give identical
/// draws on every platform.
class RngState {
 public:
  explicit RngState(std::uint64_t seed = 0) : seed_(seed) {}

  std::uint64_t NextU64();
  double Uniform();                      // [0, 1)
  double Uniform(double lo, double hi);  // [lo, hi)
  double Normal();                       // standard normal
  std::size_t Below(std::size_t n);      // [0, n)

  std::uint64_t seed() const { return seed_; }
  std::uint64_t position() const { return position_; }

 private:
  std::uint64_t seed_;
  std::uint64_t position_ = 0;
};

// y = x W + b; x is B x I, W is I x O, b has O entries.
Tensor2 Linear(const Tensor2 &x, const Tensor2 &w, std::span<const double> b);

struct LinearGrads {
  Tensor2 dx;
  Tensor2 dw;
  std::vector<double> db;
};
LinearGrads LinearBackward(const Tensor2 &x, const Tensor2 &w, const Tensor2 &dy);

enum class Activation { kSigmoid, kTanh, kRelu };

double Sigmoid(double x);
Tensor2 Activate(const Tensor2 &x, Activation kind);
/// Uses the forward output `y` where the derivative is cheaper in terms of it.
Tensor2 ActivateBackward(const Tensor2 &x, const Tensor2 &y, const Tensor2 &dy, Activation kind);

/// Max-subtracted softmax.
std::vector<double> Softmax(std::span<const double> x);
std::vector<double> SoftmaxBackward(std::span<const double> y, std::span<const double> dy);

struct LayerNormCache {
  Tensor2 normalized;
  std::vector<double> inv_std;
};

constexpr double kLayerNormEps = 1e-5;

/// Per-row normalisation to zero mean and unit variance, then gain and bias.
Tensor2 LayerNorm(const Tensor2 &x, std::span<const double> gain, std::span<const double> bias,
                  LayerNormCache *cache = nullptr);

struct LayerNormGrads {
  Tensor2 dx;
  std::vector<double> dgain;
  std::vector<double> dbias;
};
LayerNormGrads LayerNormBackward(const LayerNormCache &cache, std::span<const double> gain,
                                 const Tensor2 &dy);

/// Inverted dropout. `mask`, when given, receives the per-entry multiplier
/// (0 or 1/(1-p)) so the backward pass is dy * mask.
Tensor2 Dropout(const Tensor2 &x, double p, RngState &rng, bool training, Tensor2 *mask = nullptr);

/// Lin's concordance correlation coefficient with population moments.
/// Both inputs constant with equal means is defined as 1.
double Ccc(std::span<const double> pred, std::span<const double> target);

struct LossWithGrad {
  double loss = 0.0;
  Tensor2 grad;  // dLoss/dpred, same shape as pred
};

/// Sum over columns of (1 - CCC of that column). pred and target are B x D.
LossWithGrad CccLoss(const Tensor2 &pred, const Tensor2 &target);
/// Mean over rows of the summed squared error.
LossWithGrad MseLoss(const Tensor2 &pred, const Tensor2 &target);

struct Param {
  std::string name;
  Tensor2 value;
  Tensor2 grad;
  Tensor2 m;  // first moment
  Tensor2 v;  // second moment
};

/// Named parameters with gradients and AdamW state, in insertion order.
class ParamTape {
 public:
  std::size_t Add(const std::string &name, Tensor2 value);
  /// Throws kMissingKey.
  std::size_t Index(const std::string &name) const;
  bool Contains(const std::string &name) const;

  Param &operator[](std::size_t i) { return params_[i]; }
  const Param &operator[](std::size_t i) const { return params_[i]; }
  std::size_t size() const { return params_.size(); }
  std::vector<Param>::iterator begin() { return params_.begin(); }
  std::vector<Param>::iterator end() { return params_.end(); }
  std::vector<Param>::const_iterator begin() const { return params_.begin(); }
  std::vector<Param>::const_iterator end() const { return params_.end(); }

  void ZeroGrad();
  void ScaleGrad(double factor);
  std::size_t ParameterCount() const;

  std::uint64_t step = 0;

 private:
  std::vector<Param> params_;
};

struct AdamWOptions {
  double lr = 1e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
};

/// Decoupled weight decay w -= lr*wd*w, then the bias-corrected Adam update.
void AdamWStep(ParamTape &tape, const AdamWOptions &opts);

/// Central differences (f(x + eps e_i) - f(x - eps e_i)) / (2 eps).
std::vector<double> FiniteDiffGrad(const std::function<double(std::span<const double>)> &f,
                                   std::span<const double> x, double eps = 1e-5);

/// ||a - b|| / max(||a||, ||b||, floor).
double RelativeError(std::span<const double> a, std::span<const double> b, double floor = 1e-8);

}  // namespace msfser

#endif  // MSFSER_NUMCORE_HPP_
