// tests/numcore_test.cpp

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


#include <random>
#include <vector>

#include "msfser/numcore.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

namespace msfser {
namespace {

using oracle::Mat;
using oracle::Vec;

Tensor2 Random(std::mt19937_64 &gen, std::size_t r, std::size_t c, double scale = 1.0) {
  return oracle::ToTensor(oracle::RandomMat(gen, r, c, scale));
}

// Checks an analytic gradient of sum(upstream * f(x)) against central
// differences.
void ExpectGradMatches(const std::function<Tensor2(const Tensor2 &)> &f, const Tensor2 &x,
                       const Tensor2 &upstream, const Tensor2 &analytic, double tol) {
  auto scalar = [&](std::span<const double> v) {
    Tensor2 y = f(Tensor2(x.rows(), x.cols(), std::vector<double>(v.begin(), v.end())));
    double s = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) s += y.data()[i] * upstream.data()[i];
    return s;
  };
  std::vector<double> fd = FiniteDiffGrad(scalar, x.data());
  EXPECT_LT(RelativeError(analytic.data(), fd), tol);
}

TEST(Linear, Examples) {
  Tensor2 x(1, 2, {1, 2});
  Tensor2 eye(2, 2, {1, 0, 0, 1});
  EXPECT_EQ(Linear(x, eye, std::vector<double>{0, 0}), x);
  EXPECT_EQ(Linear(x, eye, std::vector<double>{3, 4}), Tensor2(1, 2, {4, 6}));
}

TEST(Linear, MatchesTripleLoop) {
  std::mt19937_64 gen(1);
  for (int trial = 0; trial < 20; ++trial) {
    Mat x = oracle::RandomMat(gen, 3, 4), w = oracle::RandomMat(gen, 4, 2);
    Vec b = oracle::RandomVec(gen, 2);
    Tensor2 y = Linear(oracle::ToTensor(x), oracle::ToTensor(w), b);
    for (std::size_t r = 0; r < 3; ++r) {
      Vec want = oracle::Affine(x[r], w, b);
      for (std::size_t c = 0; c < 2; ++c) EXPECT_NEAR(y(r, c), want[c], 1e-12);
    }
  }
}

TEST(Linear, ShapeMismatch) {
  EXPECT_MSFSER_ERROR(Linear(Tensor2(1, 3), Tensor2(2, 2), std::vector<double>{0, 0}),
                      ErrorCode::kShapeMismatch);
  EXPECT_MSFSER_ERROR(Linear(Tensor2(1, 2), Tensor2(2, 2), std::vector<double>{0}),
                      ErrorCode::kShapeMismatch);
  EXPECT_MSFSER_ERROR(Tensor2(2, 2, std::vector<double>{1, 2, 3}), ErrorCode::kShapeMismatch);
}

TEST(Linear, BackwardMatchesFiniteDifferences) {
  std::mt19937_64 gen(2);
  Tensor2 x = Random(gen, 3, 4), w = Random(gen, 4, 5), dy = Random(gen, 3, 5);
  std::vector<double> b = oracle::RandomVec(gen, 5);
  LinearGrads g = LinearBackward(x, w, dy);
  ExpectGradMatches([&](const Tensor2 &v) { return Linear(v, w, b); }, x, dy, g.dx, 1e-8);
  ExpectGradMatches([&](const Tensor2 &v) { return Linear(x, v, b); }, w, dy, g.dw, 1e-8);
  ExpectGradMatches(
      [&](const Tensor2 &v) { return Linear(x, w, v.data()); }, Tensor2::Row(b), dy,
      Tensor2::Row(g.db), 1e-8);
}

TEST(Activation, Values) {
  EXPECT_EQ(Sigmoid(0.0), 0.5);
  EXPECT_EQ(Activate(Tensor2(1, 1, 0.0), Activation::kTanh)(0, 0), 0.0);
  EXPECT_EQ(Activate(Tensor2(1, 2, {-1.0, 2.0}), Activation::kRelu), Tensor2(1, 2, {0.0, 2.0}));
  EXPECT_NEAR(Sigmoid(-800.0), 0.0, 1e-300);
  EXPECT_EQ(Sigmoid(800.0), 1.0);
}

TEST(Activation, BackwardMatchesFiniteDifferences) {
  std::mt19937_64 gen(3);
  for (Activation kind : {Activation::kSigmoid, Activation::kTanh, Activation::kRelu}) {
    Tensor2 x = Random(gen, 4, 6, 2.0), dy = Random(gen, 4, 6);
    Tensor2 y = Activate(x, kind);
    Tensor2 dx = ActivateBackward(x, y, dy, kind);
    ExpectGradMatches([&](const Tensor2 &v) { return Activate(v, kind); }, x, dy, dx, 1e-6);
  }
}

TEST(Softmax, Examples) {
  std::vector<double> u = Softmax(std::vector<double>{0, 0, 0});
  for (double v : u) EXPECT_NEAR(v, 1.0 / 3.0, 1e-15);
  std::vector<double> big = Softmax(std::vector<double>{1000, 0});
  EXPECT_TRUE(std::isfinite(big[0]));
  EXPECT_NEAR(big[0], 1.0, 1e-15);
  EXPECT_NEAR(big[1], 0.0, 1e-15);
}

TEST(Softmax, PropertiesAndOracle) {
  std::mt19937_64 gen(4);
  std::uniform_real_distribution<double> shift(-500.0, 500.0);
  for (int trial = 0; trial < 200; ++trial) {
    Vec x = oracle::RandomVec(gen, 1 + gen() % 8, 3.0);
    std::vector<double> p = Softmax(x);
    double sum = 0.0;
    for (double v : p) {
      EXPECT_GT(v, 0.0);
      sum += v;
    }
    EXPECT_NEAR(sum, 1.0, 1e-12);
    EXPECT_LT(oracle::MaxScaledError(p, oracle::SoftmaxLong(x)), 1e-12);
    Vec shifted = x;
    const double c = shift(gen);
    for (double &v : shifted) v += c;
    EXPECT_LT(oracle::MaxScaledError(Softmax(shifted), p), 1e-12);
  }
}

TEST(Softmax, BackwardMatchesFiniteDifferences) {
  std::mt19937_64 gen(5);
  Tensor2 x = Random(gen, 1, 5), dy = Random(gen, 1, 5);
  std::vector<double> y = Softmax(x.data());
  Tensor2 dx = Tensor2::Row(SoftmaxBackward(y, dy.data()));
  ExpectGradMatches([](const Tensor2 &v) { return Tensor2::Row(Softmax(v.data())); }, x, dy, dx, 1e-8);
}

TEST(LayerNorm, Examples) {
  std::vector<double> one(3, 1.0), zero(3, 0.0);
  Tensor2 c = LayerNorm(Tensor2(1, 3, 4.0), one, zero);
  for (double v : c.data()) EXPECT_EQ(v, 0.0);
  Tensor2 y = LayerNorm(Tensor2(1, 3, {1, 2, 3}), one, zero);
  const double inv = 1.0 / std::sqrt(2.0 / 3.0 + 1e-5);
  EXPECT_NEAR(y(0, 0), -inv, 1e-12);
  EXPECT_NEAR(y(0, 0), -1.2247, 1e-4);
  EXPECT_EQ(y(0, 1), 0.0);
  EXPECT_NEAR(y(0, 2), inv, 1e-12);
}

TEST(LayerNorm, BackwardMatchesFiniteDifferences) {
  std::mt19937_64 gen(6);
  Tensor2 x = Random(gen, 3, 7), dy = Random(gen, 3, 7);
  std::vector<double> gain = oracle::RandomVec(gen, 7), bias = oracle::RandomVec(gen, 7);
  LayerNormCache cache;
  LayerNorm(x, gain, bias, &cache);
  LayerNormGrads g = LayerNormBackward(cache, gain, dy);
  ExpectGradMatches([&](const Tensor2 &v) { return LayerNorm(v, gain, bias); }, x, dy, g.dx, 1e-5);
  ExpectGradMatches([&](const Tensor2 &v) { return LayerNorm(x, v.data(), bias); },
                    Tensor2::Row(gain), dy, Tensor2::Row(g.dgain), 1e-5);
  ExpectGradMatches([&](const Tensor2 &v) { return LayerNorm(x, gain, v.data()); },
                    Tensor2::Row(bias), dy, Tensor2::Row(g.dbias), 1e-5);
}

TEST(Dropout, IdentityCases) {
  std::mt19937_64 gen(7);
  Tensor2 x = Random(gen, 10, 10);
  RngState rng(1);
  EXPECT_EQ(Dropout(x, 0.0, rng, true), x);
  EXPECT_EQ(Dropout(x, 0.9, rng, false), x);
  EXPECT_MSFSER_ERROR(Dropout(x, 1.0, rng, true), ErrorCode::kInvalidArgument);
}

TEST(Dropout, KeepsHalfAndMean) {
  RngState rng(8);
  Tensor2 x(1, 100000, 1.0);
  Tensor2 y = Dropout(x, 0.5, rng, true);
  std::size_t kept = 0;
  double sum = 0.0;
  for (double v : y.data()) {
    kept += v != 0.0;
    sum += v;
    EXPECT_TRUE(v == 0.0 || v == 2.0);
  }
  EXPECT_NEAR(static_cast<double>(kept) / 1e5, 0.5, 0.01);
  EXPECT_NEAR(sum / 1e5, 1.0, 0.02);
}

TEST(Ccc, Examples) {
  EXPECT_DOUBLE_EQ(Ccc(std::vector<double>{1, 2, 3}, std::vector<double>{1, 2, 3}), 1.0);
  EXPECT_EQ(Ccc(std::vector<double>{2, 2, 2}, std::vector<double>{1, 2, 3}), 0.0);
  EXPECT_NEAR(Ccc(std::vector<double>{1, 2, 3}, std::vector<double>{2, 4, 6}), 8.0 / 22.0, 1e-15);
  EXPECT_NEAR(oracle::Ccc({1, 2, 3}, {2, 4, 6}), 0.363636, 1e-6);
  EXPECT_EQ(Ccc(std::vector<double>{5, 5}, std::vector<double>{5, 5}), 1.0);
}

TEST(Ccc, Errors) {
  EXPECT_MSFSER_ERROR(Ccc(std::vector<double>{1, 2}, std::vector<double>{1, 2, 3}),
                      ErrorCode::kLengthMismatch);
  EXPECT_MSFSER_ERROR(Ccc(std::vector<double>{1}, std::vector<double>{1}), ErrorCode::kTooShort);
}

TEST(Ccc, PropertiesAndOracle) {
  std::mt19937_64 gen(9);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 2 + gen() % 40;
    Vec p = oracle::RandomVec(gen, n, 2.0), t = oracle::RandomVec(gen, n);
    const double c = Ccc(p, t);
    EXPECT_NEAR(c, oracle::Ccc(p, t), 1e-12);
    EXPECT_EQ(c, Ccc(t, p));
    EXPECT_GE(c, -1.0);
    EXPECT_LE(c, 1.0);
    EXPECT_NEAR(Ccc(p, p), 1.0, 1e-12);
  }
}

TEST(CccLoss, PerfectAndRange) {
  std::mt19937_64 gen(10);
  Tensor2 t = Random(gen, 6, 3);
  EXPECT_NEAR(CccLoss(t, t).loss, 0.0, 1e-12);
  for (int trial = 0; trial < 50; ++trial) {
    const double loss = CccLoss(Random(gen, 5, 3), t.rows() == 5 ? t : Random(gen, 5, 3)).loss;
    EXPECT_GE(loss, 0.0);
    EXPECT_LE(loss, 6.0);
  }
  EXPECT_MSFSER_ERROR(CccLoss(Tensor2(1, 3), Tensor2(1, 3)), ErrorCode::kTooShort);
}

TEST(CccLoss, GradientMatchesFiniteDifferences) {
  std::mt19937_64 gen(11);
  for (int trial = 0; trial < 10; ++trial) {
    Tensor2 p = Random(gen, 2 + trial, 3), t = Random(gen, 2 + trial, 3);
    LossWithGrad lg = CccLoss(p, t);
    std::vector<double> fd = FiniteDiffGrad(
        [&](std::span<const double> v) {
          return CccLoss(Tensor2(p.rows(), 3, std::vector<double>(v.begin(), v.end())), t).loss;
        },
        p.data());
    EXPECT_LT(RelativeError(lg.grad.data(), fd), 1e-6);
  }
}

TEST(MseLoss, GradientMatchesFiniteDifferences) {
  std::mt19937_64 gen(12);
  Tensor2 p = Random(gen, 4, 3), t = Random(gen, 4, 3);
  LossWithGrad lg = MseLoss(p, t);
  std::vector<double> fd = FiniteDiffGrad(
      [&](std::span<const double> v) {
        return MseLoss(Tensor2(4, 3, std::vector<double>(v.begin(), v.end())), t).loss;
      },
      p.data());
  EXPECT_LT(RelativeError(lg.grad.data(), fd), 1e-8);
  EXPECT_EQ(MseLoss(t, t).loss, 0.0);
}

TEST(AdamW, ZeroGradNoDecayIsIdentity) {
  std::mt19937_64 gen(13);
  ParamTape tape;
  tape.Add("w", Random(gen, 3, 4));
  const Tensor2 before = tape[0].value;
  AdamWOptions opts;
  opts.lr = 0.1;
  opts.weight_decay = 0.0;
  for (int i = 0; i < 5; ++i) AdamWStep(tape, opts);
  EXPECT_EQ(tape[0].value, before);
  EXPECT_EQ(tape.step, 5u);
}

TEST(AdamW, ZeroGradDecays) {
  ParamTape tape;
  tape.Add("w", Tensor2(1, 1, 2.0));
  AdamWOptions opts;
  opts.lr = 0.1;
  opts.weight_decay = 0.5;
  AdamWStep(tape, opts);
  EXPECT_DOUBLE_EQ(tape[0].value(0, 0), 2.0 * (1.0 - 0.1 * 0.5));
}

TEST(AdamW, HandTracedFirstStep) {
  ParamTape tape;
  tape.Add("w", Tensor2(1, 1, 1.0));
  tape[0].grad(0, 0) = 1.0;
  AdamWOptions opts;
  opts.lr = 0.1;
  opts.weight_decay = 0.0;
  AdamWStep(tape, opts);
  // m_hat = v_hat = 1, so the update is lr / (1 + eps).
  EXPECT_NEAR(tape[0].value(0, 0), 0.9, 1e-8);
  EXPECT_DOUBLE_EQ(tape[0].value(0, 0), 1.0 - 0.1 / (1.0 + 1e-8));
}

TEST(FiniteDiff, Analytic) {
  auto square = [](std::span<const double> x) { return x[0] * x[0]; };
  EXPECT_NEAR(FiniteDiffGrad(square, std::vector<double>{3.0})[0], 6.0, 1e-6);
  auto sine = [](std::span<const double> x) { return std::sin(x[0]); };
  EXPECT_NEAR(FiniteDiffGrad(sine, std::vector<double>{0.0})[0], 1.0, 1e-6);
}

TEST(RngState, Reproducible) {
  RngState a(42), b(42), c(43);
  for (int i = 0; i < 100; ++i) {
    const std::uint64_t x = a.NextU64();
    EXPECT_EQ(x, b.NextU64());
    EXPECT_NE(x, c.NextU64());
  }
  EXPECT_EQ(a.position(), 100u);
}

TEST(RngState, Distributions) {
  RngState r(7);
  double sum = 0.0, sq = 0.0;
  for (int i = 0; i < 100000; ++i) {
    const double n = r.Normal();
    sum += n;
    sq += n * n;
    const double u = r.Uniform(-2.0, 3.0);
    EXPECT_GE(u, -2.0);
    EXPECT_LT(u, 3.0);
    EXPECT_LT(r.Below(7), 7u);
  }
  EXPECT_NEAR(sum / 1e5, 0.0, 0.02);
  EXPECT_NEAR(sq / 1e5, 1.0, 0.02);
  EXPECT_MSFSER_ERROR(r.Below(0), ErrorCode::kInvalidArgument);
}

TEST(ParamTape, Bookkeeping) {
  ParamTape tape;
  tape.Add("a", Tensor2(2, 3, 1.0));
  tape.Add("b", Tensor2(1, 4, 1.0));
  EXPECT_EQ(tape.ParameterCount(), 10u);
  EXPECT_EQ(tape.Index("b"), 1u);
  EXPECT_MSFSER_ERROR(tape.Add("a", Tensor2(1, 1)), ErrorCode::kDuplicateKey);
  EXPECT_MSFSER_ERROR(tape.Index("c"), ErrorCode::kMissingKey);
  for (Param &p : tape) {
    EXPECT_TRUE(p.grad.SameShape(p.value));
    p.grad.Fill(3.0);
  }
  tape.ScaleGrad(0.5);
  EXPECT_EQ(tape[0].grad(1, 2), 1.5);
  tape.ZeroGrad();
  EXPECT_EQ(tape[1].grad(0, 3), 0.0);
}

TEST(RelativeError, Basics) {
  EXPECT_EQ(RelativeError(std::vector<double>{1, 2}, std::vector<double>{1, 2}), 0.0);
  EXPECT_NEAR(RelativeError(std::vector<double>{1, 0}, std::vector<double>{0, 0}), 1.0, 1e-15);
  EXPECT_MSFSER_ERROR(RelativeError(std::vector<double>{1}, std::vector<double>{}),
                      ErrorCode::kLengthMismatch);
}

}  // namespace
}  // namespace msfser
