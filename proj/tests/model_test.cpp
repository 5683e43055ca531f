// tests/model_test.cpp

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
#include <regex>
#include <vector>

#include "json.hpp"
#include "msfser/model.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

namespace msfser {
namespace {

using oracle::Mat;
using oracle::Vec;

ModelConfig SmallConfig() {
  ModelConfig cfg;
  cfg.frame_dim = 5;
  cfg.sem_dim = 4;
  cfg.attention_dim = 3;
  cfg.film_hidden = 4;
  cfg.head_hidden = 5;
  cfg.init_seed = 9;
  return cfg;
}

Utterance RandomUtterance(std::mt19937_64 &gen, const ModelConfig &cfg, std::size_t frames) {
  Utterance u;
  u.id = "u" + std::to_string(gen() % 1000);
  u.frames = oracle::ToTensor(oracle::RandomMat(gen, frames, cfg.frame_dim));
  u.h_local = oracle::RandomVec(gen, cfg.sem_dim, 0.5);
  u.h_global = oracle::RandomVec(gen, cfg.sem_dim, 0.5);
  u.h_ext = oracle::RandomVec(gen, cfg.sem_dim, 0.5);
  std::uniform_real_distribution<double> t(-1.0, 1.0);
  for (double &v : u.targets) v = t(gen);
  return u;
}

// Moves every parameter off its initial value so no gradient is special.
void Perturb(FusionModel &m, std::mt19937_64 &gen, double scale = 0.1) {
  std::normal_distribution<double> n(0.0, scale);
  for (Param &p : m.params())
    for (double &v : p.value.data()) v += n(gen);
}

double WorstGradientError(FusionModel &m, const std::vector<Utterance> &data, LossKind loss) {
  std::vector<const Utterance *> batch;
  for (const Utterance &u : data) batch.push_back(&u);
  RngState rng(0);
  m.params().ZeroGrad();
  BatchLoss(m, batch, loss, rng, false, true);
  double worst = 0.0;
  for (std::size_t i = 0; i < m.params().size(); ++i) {
    Param &p = m.params()[i];
    std::vector<double> fd(p.value.size());
    for (std::size_t j = 0; j < p.value.size(); ++j) {
      const double orig = p.value.data()[j], eps = 1e-5;
      p.value.data()[j] = orig + eps;
      const double up = BatchLoss(m, batch, loss, rng, false, false);
      p.value.data()[j] = orig - eps;
      const double down = BatchLoss(m, batch, loss, rng, false, false);
      p.value.data()[j] = orig;
      fd[j] = (up - down) / (2 * eps);
    }
    const double e = RelativeError(p.grad.data(), fd);
    EXPECT_LT(e, 1e-4) << p.name;
    worst = std::max(worst, e);
  }
  return worst;
}

// --- Attentive pooling ------------------------------------------------------

TEST(AttentivePool, UniformAttention) {
  std::mt19937_64 gen(1);
  Mat frames = oracle::RandomMat(gen, 6, 3);
  Tensor2 w = oracle::ToTensor(oracle::RandomMat(gen, 3, 4));
  std::vector<double> pooled = AttentivePool(oracle::ToTensor(frames), w, Tensor2(4, 1, 0.0));
  for (std::size_t i = 0; i < 3; ++i) {
    double mean = 0.0, var = 0.0;
    for (const Vec &f : frames) mean += f[i] / 6.0;
    for (const Vec &f : frames) var += (f[i] - mean) * (f[i] - mean) / 6.0;
    EXPECT_NEAR(pooled[i], mean, 1e-12);
    EXPECT_NEAR(pooled[3 + i], std::sqrt(var + 1e-9), 1e-12);
  }
}

TEST(AttentivePool, SingleFrame) {
  Tensor2 frame(1, 2, {0.7, -3.0});
  std::vector<double> pooled = AttentivePool(frame, Tensor2(2, 2, 0.3), Tensor2(2, 1, 1.0));
  EXPECT_DOUBLE_EQ(pooled[0], 0.7);
  EXPECT_DOUBLE_EQ(pooled[1], -3.0);
  EXPECT_NEAR(pooled[2], std::sqrt(1e-9), 1e-12);
  EXPECT_NEAR(pooled[3], std::sqrt(1e-9), 1e-12);
}

TEST(AttentivePool, TwoFrames) {
  std::vector<double> pooled =
      AttentivePool(Tensor2(2, 1, {0.0, 2.0}), Tensor2(1, 1, 0.5), Tensor2(1, 1, 0.0));
  EXPECT_DOUBLE_EQ(pooled[0], 1.0);
  EXPECT_DOUBLE_EQ(pooled[1], std::sqrt(1.0 + 1e-9));
}

TEST(AttentivePool, Errors) {
  EXPECT_MSFSER_ERROR(AttentivePool(Tensor2(0, 2), Tensor2(2, 2), Tensor2(2, 1)),
                      ErrorCode::kEmptyInput);
  EXPECT_MSFSER_ERROR(AttentivePool(Tensor2(3, 2), Tensor2(3, 2), Tensor2(2, 1)),
                      ErrorCode::kShapeMismatch);
}

TEST(AttentivePool, MatchesOracle) {
  std::mt19937_64 gen(2);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t t = 1 + gen() % 30, f = 1 + gen() % 8, a = 1 + gen() % 6;
    Mat frames = oracle::RandomMat(gen, t, f), w = oracle::RandomMat(gen, f, a);
    Vec v = oracle::RandomVec(gen, a);
    std::vector<double> got =
        AttentivePool(oracle::ToTensor(frames), oracle::ToTensor(w), Tensor2(a, 1, v));
    EXPECT_LT(oracle::MaxScaledError(got, oracle::Pool(frames, w, v)), 1e-10);
  }
}

TEST(AttentivePool, BackwardMatchesFiniteDifferences) {
  std::mt19937_64 gen(3);
  Tensor2 frames = oracle::ToTensor(oracle::RandomMat(gen, 7, 4));
  Tensor2 w = oracle::ToTensor(oracle::RandomMat(gen, 4, 3)), v(3, 1, oracle::RandomVec(gen, 3));
  Vec up = oracle::RandomVec(gen, 8);
  PoolCache cache;
  AttentivePool(frames, w, v, &cache);
  PoolGrads g = AttentivePoolBackward(cache, w, v, up);
  auto dot = [&](const std::vector<double> &y) {
    double s = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) s += y[i] * up[i];
    return s;
  };
  std::vector<double> fd_w = FiniteDiffGrad(
      [&](std::span<const double> x) {
        return dot(AttentivePool(frames, Tensor2(4, 3, {x.begin(), x.end()}), v));
      },
      w.data());
  std::vector<double> fd_v = FiniteDiffGrad(
      [&](std::span<const double> x) {
        return dot(AttentivePool(frames, w, Tensor2(3, 1, {x.begin(), x.end()})));
      },
      v.data());
  EXPECT_LT(RelativeError(g.dw_a.data(), fd_w), 1e-6);
  EXPECT_LT(RelativeError(g.dv_a.data(), fd_v), 1e-6);
}

// --- Gated fusion -----------------------------------------------------------

TEST(GatedFuse, ZeroParamsAverage) {
  Vec l = {1.0, -2.0, 4.0}, g = {3.0, 0.0, 0.0};
  FuseResult r = GatedFuse(l, g, Tensor2(6, 1, 0.0), Tensor2(1, 1, 0.0));
  ASSERT_EQ(r.gate.size(), 1u);
  EXPECT_EQ(r.gate[0], 0.5);
  EXPECT_EQ(r.h_sem, (Vec{2.0, -1.0, 2.0}));
}

TEST(GatedFuse, Saturation) {
  Vec l = {1.0, -2.0}, g = {3.0, 5.0};
  FuseResult r = GatedFuse(l, g, Tensor2(4, 1, 0.0), Tensor2(1, 1, 20.0));
  EXPECT_GT(r.gate[0], 1.0 - 1e-8);
  for (std::size_t i = 0; i < 2; ++i) EXPECT_NEAR(r.h_sem[i], l[i], 1e-7);
}

TEST(GatedFuse, MatchesOracleAndIsConvex) {
  std::mt19937_64 gen(4);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t d = 1 + gen() % 10;
    const bool vector_gate = trial % 2 == 1;
    const std::size_t width = vector_gate ? d : 1;
    Vec l = oracle::RandomVec(gen, d), g = oracle::RandomVec(gen, d);
    Mat w = oracle::RandomMat(gen, 2 * d, width);
    Vec b = oracle::RandomVec(gen, width);
    FuseResult r = GatedFuse(l, g, oracle::ToTensor(w), Tensor2::Row(b));
    oracle::Fused want = oracle::Fuse(l, g, w, b);
    EXPECT_LT(oracle::MaxScaledError(r.h_sem, want.h_sem), 1e-12);
    EXPECT_LT(oracle::MaxScaledError(r.gate, want.gate), 1e-12);
    for (double gate : r.gate) {
      EXPECT_GT(gate, 0.0);
      EXPECT_LT(gate, 1.0);
    }
    for (std::size_t i = 0; i < d; ++i) {
      EXPECT_GE(r.h_sem[i], std::min(l[i], g[i]) - 1e-12);
      EXPECT_LE(r.h_sem[i], std::max(l[i], g[i]) + 1e-12);
    }
  }
}

TEST(GatedFuse, DimMismatch) {
  EXPECT_MSFSER_ERROR(GatedFuse(Vec(3), Vec(4), Tensor2(6, 1), Tensor2(1, 1)), ErrorCode::kDimMismatch);
  EXPECT_MSFSER_ERROR(GatedFuse(Vec(3), Vec(3), Tensor2(5, 1), Tensor2(1, 1)), ErrorCode::kDimMismatch);
}

TEST(GatedFuse, BackwardMatchesFiniteDifferences) {
  std::mt19937_64 gen(5);
  for (std::size_t width : {1u, 4u}) {
    Vec l = oracle::RandomVec(gen, 4), g = oracle::RandomVec(gen, 4), up = oracle::RandomVec(gen, 4);
    Tensor2 w = oracle::ToTensor(oracle::RandomMat(gen, 8, width));
    Tensor2 b = Tensor2::Row(oracle::RandomVec(gen, width));
    FuseResult r = GatedFuse(l, g, w, b);
    FuseGrads grads = GatedFuseBackward(l, g, r, up);
    auto dot = [&](const FuseResult &x) {
      double s = 0.0;
      for (std::size_t i = 0; i < 4; ++i) s += x.h_sem[i] * up[i];
      return s;
    };
    std::vector<double> fd_w = FiniteDiffGrad(
        [&](std::span<const double> x) {
          return dot(GatedFuse(l, g, Tensor2(8, width, {x.begin(), x.end()}), b));
        },
        w.data());
    std::vector<double> fd_b = FiniteDiffGrad(
        [&](std::span<const double> x) { return dot(GatedFuse(l, g, w, Tensor2::Row(x))); }, b.data());
    EXPECT_LT(RelativeError(grads.dw_g.data(), fd_w), 1e-6);
    EXPECT_LT(RelativeError(grads.db_g.data(), fd_b), 1e-6);
  }
}

// --- FiLM -------------------------------------------------------------------

TEST(Film, ZeroParamsIdentity) {
  std::mt19937_64 gen(6);
  Vec audio = oracle::RandomVec(gen, 6), sem = oracle::RandomVec(gen, 4);
  Tensor2 w1(4, 5), b1(1, 5), w2(5, 12), b2(1, 12);
  EXPECT_EQ(FilmModulate(audio, sem, {w1, b1, w2, b2}), audio);
}

TEST(Film, ForcedGammaBeta) {
  Tensor2 w1(3, 2), b1(1, 2), w2(2, 4), b2(1, 4, {-0.5, 1.0, 1.0, -1.0});
  EXPECT_EQ(FilmModulate(Vec{2.0, 3.0}, Vec{0.1, 0.2, 0.3}, {w1, b1, w2, b2}), (Vec{2.0, 5.0}));
}

TEST(Film, MatchesOracle) {
  std::mt19937_64 gen(7);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 1 + gen() % 10, d = 1 + gen() % 8, h = 1 + gen() % 8;
    Vec audio = oracle::RandomVec(gen, n), sem = oracle::RandomVec(gen, d);
    Mat w1 = oracle::RandomMat(gen, d, h), w2 = oracle::RandomMat(gen, h, 2 * n, 0.3);
    Vec b1 = oracle::RandomVec(gen, h), b2 = oracle::RandomVec(gen, 2 * n, 0.3);
    Tensor2 tw1 = oracle::ToTensor(w1), tb1 = Tensor2::Row(b1), tw2 = oracle::ToTensor(w2),
            tb2 = Tensor2::Row(b2);
    std::vector<double> got = FilmModulate(audio, sem, {tw1, tb1, tw2, tb2});
    EXPECT_LT(oracle::MaxScaledError(got, oracle::Film(audio, sem, w1, b1, w2, b2)), 1e-12);
  }
}

TEST(Film, DimMismatch) {
  Tensor2 w1(3, 2), b1(1, 2), w2(2, 5), b2(1, 5);
  EXPECT_MSFSER_ERROR(FilmModulate(Vec(2), Vec(3), {w1, b1, w2, b2}), ErrorCode::kDimMismatch);
  Tensor2 w2ok(2, 4), b2ok(1, 4);
  EXPECT_MSFSER_ERROR(FilmModulate(Vec(2), Vec(4), {w1, b1, w2ok, b2ok}), ErrorCode::kDimMismatch);
}

TEST(Film, BackwardMatchesFiniteDifferences) {
  std::mt19937_64 gen(8);
  Vec audio = oracle::RandomVec(gen, 3), sem = oracle::RandomVec(gen, 4), up = oracle::RandomVec(gen, 3);
  Tensor2 w1 = oracle::ToTensor(oracle::RandomMat(gen, 4, 5)), b1 = Tensor2::Row(oracle::RandomVec(gen, 5));
  Tensor2 w2 = oracle::ToTensor(oracle::RandomMat(gen, 5, 6)), b2 = Tensor2::Row(oracle::RandomVec(gen, 6));
  FilmCache cache;
  FilmModulate(audio, sem, {w1, b1, w2, b2}, &cache);
  FilmGrads g = FilmModulateBackward(cache, {w1, b1, w2, b2}, up);
  auto dot = [&](const std::vector<double> &y) {
    double s = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) s += y[i] * up[i];
    return s;
  };
  auto check = [&](const Tensor2 &target, const std::vector<double> &analytic, auto rebuild) {
    std::vector<double> fd = FiniteDiffGrad(
        [&](std::span<const double> x) {
          return dot(rebuild(Tensor2(target.rows(), target.cols(), {x.begin(), x.end()})));
        },
        target.data());
    EXPECT_LT(RelativeError(analytic, fd), 1e-6);
  };
  check(w1, g.dw1.data(), [&](const Tensor2 &x) { return FilmModulate(audio, sem, {x, b1, w2, b2}); });
  check(b1, g.db1.data(), [&](const Tensor2 &x) { return FilmModulate(audio, sem, {w1, x, w2, b2}); });
  check(w2, g.dw2.data(), [&](const Tensor2 &x) { return FilmModulate(audio, sem, {w1, b1, x, b2}); });
  check(b2, g.db2.data(), [&](const Tensor2 &x) { return FilmModulate(audio, sem, {w1, b1, w2, x}); });
  check(Tensor2::Row(audio), g.dh_audio,
        [&](const Tensor2 &x) { return FilmModulate(x.data(), sem, {w1, b1, w2, b2}); });
  check(Tensor2::Row(sem), g.dh_sem,
        [&](const Tensor2 &x) { return FilmModulate(audio, x.data(), {w1, b1, w2, b2}); });
}

// --- Head -------------------------------------------------------------------

struct HeadParams {
  Tensor2 w1, b1, gain, bias, w2, b2;
  HeadView View() const { return {w1, b1, gain, bias, w2, b2}; }
};

HeadParams RandomHead(std::mt19937_64 &gen, std::size_t in, std::size_t hidden) {
  return {oracle::ToTensor(oracle::RandomMat(gen, in, hidden)), Tensor2::Row(oracle::RandomVec(gen, hidden)),
          Tensor2::Row(oracle::RandomVec(gen, hidden)), Tensor2::Row(oracle::RandomVec(gen, hidden)),
          oracle::ToTensor(oracle::RandomMat(gen, hidden, 3)), Tensor2::Row(oracle::RandomVec(gen, 3))};
}

TEST(Head, MatchesOracleInInference) {
  std::mt19937_64 gen(9);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t in = 1 + gen() % 10, hidden = 2 + gen() % 8;
    HeadParams p = RandomHead(gen, in, hidden);
    Vec x = oracle::RandomVec(gen, in);
    RngState rng(1);
    Vad got = RegressionHead(x, p.View(), 0.5, rng, false);
    Vad want = oracle::Head(x, oracle::ToMat(p.w1), p.b1.data(), p.gain.data(), p.bias.data(),
                            oracle::ToMat(p.w2), p.b2.data());
    for (std::size_t d = 0; d < 3; ++d) EXPECT_LT(oracle::ScaledError(got[d], want[d]), 1e-12);
    EXPECT_EQ(RegressionHead(x, p.View(), 0.5, rng, false), got);
    EXPECT_EQ(rng.position(), 0u);
  }
}

TEST(Head, BackwardMatchesFiniteDifferencesWithDropout) {
  std::mt19937_64 gen(10);
  HeadParams p = RandomHead(gen, 6, 7);
  Vec x = oracle::RandomVec(gen, 6);
  Vad up = {0.3, -1.1, 0.7};
  HeadCache cache;
  RngState rng(77);
  RegressionHead(x, p.View(), 0.5, rng, true, &cache);
  HeadGrads g = RegressionHeadBackward(cache, p.View(), up);
  // Replays the same dropout mask on every probe.
  auto eval = [&](const HeadParams &q, const Vec &in) {
    RngState replay(77);
    Vad y = RegressionHead(in, q.View(), 0.5, replay, true);
    return y[0] * up[0] + y[1] * up[1] + y[2] * up[2];
  };
  auto check = [&](Tensor2 HeadParams::*member, const Tensor2 &analytic) {
    std::vector<double> fd = FiniteDiffGrad(
        [&](std::span<const double> v) {
          HeadParams q = p;
          (q.*member).data().assign(v.begin(), v.end());
          return eval(q, x);
        },
        (p.*member).data());
    EXPECT_LT(RelativeError(analytic.data(), fd), 1e-6);
  };
  check(&HeadParams::w1, g.dw1);
  check(&HeadParams::b1, g.db1);
  check(&HeadParams::gain, g.dgain);
  check(&HeadParams::bias, g.dbias);
  check(&HeadParams::w2, g.dw2);
  check(&HeadParams::b2, g.db2);
  std::vector<double> fd_in = FiniteDiffGrad(
      [&](std::span<const double> v) { return eval(p, Vec(v.begin(), v.end())); }, x);
  EXPECT_LT(RelativeError(g.din, fd_in), 1e-6);
}

// --- Routing ----------------------------------------------------------------

ExpertOutputs RandomOutputs(std::mt19937_64 &gen) {
  ExpertOutputs o{};
  std::normal_distribution<double> n(0.0, 1.0);
  for (auto &row : o)
    for (double &v : row) v = n(gen);
  return o;
}

TEST(Moe, OneHotSelectsExpert) {
  std::mt19937_64 gen(11);
  ExpertOutputs o = RandomOutputs(gen);
  for (std::size_t k = 0; k < 3; ++k) {
    Tensor2 logits(3, 3, -1000.0);
    for (std::size_t d = 0; d < 3; ++d) logits(d, k) = 0.0;
    MoeResult r = MoeCombine(o, logits);
    for (std::size_t d = 0; d < 3; ++d) {
      EXPECT_EQ(r.y[d], o[k][d]);
      EXPECT_EQ(r.pi[d][k], 1.0);
    }
  }
}

TEST(Moe, ZeroLogitsAverage) {
  std::mt19937_64 gen(12);
  ExpertOutputs o = RandomOutputs(gen);
  MoeResult r = MoeCombine(o, Tensor2(3, 3, 0.0));
  for (std::size_t d = 0; d < 3; ++d) EXPECT_NEAR(r.y[d], (o[0][d] + o[1][d] + o[2][d]) / 3.0, 1e-15);
}

TEST(Moe, MatchesOracle) {
  std::mt19937_64 gen(13);
  const std::array<std::array<bool, 3>, 4> sets = {{{true, true, true}, {true, true, false},
                                                    {true, false, false}, {false, true, true}}};
  for (int trial = 0; trial < 100; ++trial) {
    ExpertOutputs o = RandomOutputs(gen);
    Mat logits = oracle::RandomMat(gen, 3, 3, 2.0);
    const auto &active = sets[trial % 4];
    MoeResult r = MoeCombine(o, oracle::ToTensor(logits), active);
    oracle::Mixed want = oracle::Moe(o, logits, active);
    for (std::size_t d = 0; d < 3; ++d) {
      EXPECT_LT(oracle::ScaledError(r.y[d], want.y[d]), 1e-12);
      double sum = 0.0;
      for (std::size_t k = 0; k < 3; ++k) {
        EXPECT_NEAR(r.pi[d][k], want.pi[d][k], 1e-12);
        EXPECT_EQ(r.pi[d][k] > 0.0, active[k]);
        sum += r.pi[d][k];
      }
      EXPECT_NEAR(sum, 1.0, 1e-12);
    }
  }
}

TEST(Moe, BackwardMatchesFiniteDifferences) {
  std::mt19937_64 gen(14);
  ExpertOutputs o = RandomOutputs(gen);
  Tensor2 logits = oracle::ToTensor(oracle::RandomMat(gen, 3, 3));
  Vad up = {0.5, -0.2, 1.3};
  MoeResult r = MoeCombine(o, logits);
  MoeGrads g = MoeCombineBackward(o, r, up);
  auto dot = [&](const MoeResult &x) { return x.y[0] * up[0] + x.y[1] * up[1] + x.y[2] * up[2]; };
  std::vector<double> fd = FiniteDiffGrad(
      [&](std::span<const double> v) { return dot(MoeCombine(o, Tensor2(3, 3, {v.begin(), v.end()}))); },
      logits.data());
  EXPECT_LT(RelativeError(g.dlogits.data(), fd), 1e-6);
  std::vector<double> flat, analytic;
  for (std::size_t k = 0; k < 3; ++k)
    for (std::size_t d = 0; d < 3; ++d) {
      flat.push_back(o[k][d]);
      analytic.push_back(g.doutputs[k][d]);
    }
  std::vector<double> fd_o = FiniteDiffGrad(
      [&](std::span<const double> v) {
        ExpertOutputs x{};
        for (std::size_t i = 0; i < 9; ++i) x[i / 3][i % 3] = v[i];
        return dot(MoeCombine(x, logits));
      },
      flat);
  EXPECT_LT(RelativeError(analytic, fd_o), 1e-6);
}

TEST(Moe, Errors) {
  ExpertOutputs o{};
  EXPECT_MSFSER_ERROR(MoeCombine(o, Tensor2(2, 3)), ErrorCode::kShapeMismatch);
  EXPECT_MSFSER_ERROR(MoeCombine(o, Tensor2(3, 3), {false, false, false}), ErrorCode::kInvalidArgument);
}

// --- Config -----------------------------------------------------------------

TEST(ModelConfig, ExpertSets) {
  EXPECT_EQ(ParseExpertSet("ABC"), (std::array<bool, 3>{true, true, true}));
  EXPECT_EQ(ParseExpertSet("ca"), (std::array<bool, 3>{true, false, true}));
  EXPECT_EQ(ExpertSetName({false, true, true}), "BC");
  EXPECT_MSFSER_ERROR(ParseExpertSet(""), ErrorCode::kInvalidArgument);
  EXPECT_MSFSER_ERROR(ParseExpertSet("AD"), ErrorCode::kInvalidArgument);
}

TEST(ModelConfig, JsonRoundTrip) {
  ModelConfig cfg = SmallConfig();
  cfg.vector_gate = true;
  cfg.experts = {true, false, true};
  cfg.inter = InterFusion::kConcat;
  cfg.intra = IntraFusion::kLocalOnly;
  cfg.dropout = 0.25;
  ModelConfig back = ParseModelConfig(ModelConfigJson(cfg));
  EXPECT_EQ(ModelConfigJson(back), ModelConfigJson(cfg));
  EXPECT_EQ(ParseIntraFusion("gs"), IntraFusion::kGlobalOnly);
  EXPECT_EQ(ParseInterFusion("concat"), InterFusion::kConcat);
  EXPECT_MSFSER_ERROR(ParseIntraFusion("attention"), ErrorCode::kInvalidArgument);
}

// --- Full model -------------------------------------------------------------

TEST(FusionModel, ParametersOnlyForUsedParts) {
  ModelConfig cfg = SmallConfig();
  FusionModel full(cfg);
  for (const char *name : {"pool.w_a", "pool.v_a", "gate.w", "gate.b", "film_b.l1.w", "film_c.l2.b",
                           "head_a.l1.w", "head_b.ln_gain", "head_c.l2.b", "route.logits"})
    EXPECT_TRUE(full.params().Contains(name)) << name;
  EXPECT_EQ(full.Value("film_b.l2.w").cols(), 2 * cfg.pooled_dim());
  EXPECT_EQ(full.Value("gate.w").cols(), 1u);

  cfg.experts = {true, false, false};
  FusionModel a_only(cfg);
  EXPECT_FALSE(a_only.params().Contains("gate.w"));
  EXPECT_FALSE(a_only.params().Contains("film_b.l1.w"));
  EXPECT_FALSE(a_only.params().Contains("head_c.l1.w"));

  cfg = SmallConfig();
  cfg.inter = InterFusion::kConcat;
  FusionModel concat(cfg);
  EXPECT_FALSE(concat.params().Contains("film_b.l1.w"));
  EXPECT_EQ(concat.Value("head_b.l1.w").rows(), cfg.pooled_dim() + cfg.sem_dim);
}

TEST(FusionModel, InitialisationBounds) {
  FusionModel m(SmallConfig());
  for (const Param &p : m.params()) {
    if (p.name.find("ln_gain") != std::string::npos) {
      for (double v : p.value.data()) EXPECT_EQ(v, 1.0);
    } else if (p.name.find("ln_bias") != std::string::npos || p.name == "route.logits") {
      for (double v : p.value.data()) EXPECT_EQ(v, 0.0);
    } else {
      const std::string w = p.name.substr(0, p.name.rfind('.')) + (p.name.back() == 'b' ? ".w" : "");
      const std::size_t fan_in =
          p.name == "pool.v_a" ? p.value.rows() : m.Value(p.name.back() == 'b' ? w : p.name).rows();
      const double s = 1.0 / std::sqrt(static_cast<double>(fan_in));
      for (double v : p.value.data()) {
        EXPECT_GE(v, -s) << p.name;
        EXPECT_LT(v, s) << p.name;
      }
    }
  }
  FusionModel again(SmallConfig());
  for (std::size_t i = 0; i < m.params().size(); ++i)
    EXPECT_EQ(m.params()[i].value, again.params()[i].value);
}

TEST(FusionModel, ForwardMatchesOracle) {
  std::mt19937_64 gen(15);
  std::vector<ModelConfig> configs;
  for (int variant = 0; variant < 6; ++variant) {
    ModelConfig cfg = SmallConfig();
    cfg.init_seed = static_cast<std::uint64_t>(variant);
    if (variant == 1) cfg.vector_gate = true;
    if (variant == 2) cfg.inter = InterFusion::kConcat;
    if (variant == 3) cfg.intra = IntraFusion::kGlobalOnly;
    if (variant == 4) cfg.experts = {true, true, false};
    if (variant == 5) cfg.experts = {true, false, false};
    configs.push_back(cfg);
  }
  for (int trial = 0; trial < 100; ++trial) {
    const ModelConfig &cfg = configs[static_cast<std::size_t>(trial) % configs.size()];
    FusionModel m(cfg);
    Perturb(m, gen, 0.3);
    std::vector<Utterance> data = {RandomUtterance(gen, cfg, 3 + gen() % 20),
                                   RandomUtterance(gen, cfg, 3 + gen() % 20)};
    m.FitInputNormalization(data);
    RngState rng(0);
    for (const Utterance &u : data) {
      ModelOutput out = m.Forward(u, rng, false);
      Vad want = oracle::Forward(m, u);
      for (std::size_t d = 0; d < 3; ++d) EXPECT_LT(oracle::ScaledError(out.y[d], want[d]), 1e-10);
    }
  }
}

TEST(FusionModel, OutputContract) {
  std::mt19937_64 gen(16);
  ModelConfig cfg = SmallConfig();
  FusionModel m(cfg);
  Perturb(m, gen, 1.0);
  RngState rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    Utterance u = RandomUtterance(gen, cfg, 1 + gen() % 10);
    ModelOutput out = m.Forward(u, rng, trial % 2 == 0);
    for (double y : out.y) EXPECT_TRUE(std::isfinite(y));
    ASSERT_EQ(out.gate.size(), 1u);
    EXPECT_GT(out.gate[0], 0.0);
    EXPECT_LT(out.gate[0], 1.0);
    for (const auto &row : out.routing) {
      double sum = 0.0;
      for (double p : row) {
        EXPECT_GT(p, 0.0);
        sum += p;
      }
      EXPECT_NEAR(sum, 1.0, 1e-12);
    }
  }
}

TEST(FusionModel, ExpertASemanticsBlind) {
  std::mt19937_64 gen(17);
  ModelConfig cfg = SmallConfig();
  FusionModel m(cfg);
  Utterance u = RandomUtterance(gen, cfg, 8), v = u;
  v.h_local = oracle::RandomVec(gen, cfg.sem_dim);
  v.h_global = oracle::RandomVec(gen, cfg.sem_dim);
  v.h_ext = oracle::RandomVec(gen, cfg.sem_dim);
  RngState rng(0);
  ModelOutput a = m.Forward(u, rng, false), b = m.Forward(v, rng, false);
  EXPECT_EQ(a.experts[0], b.experts[0]);
  EXPECT_NE(a.experts[1], b.experts[1]);
  EXPECT_NE(a.experts[2], b.experts[2]);
}

TEST(FusionModel, ZeroFilmMakesBAnAcousticHead) {
  std::mt19937_64 gen(18);
  ModelConfig cfg = SmallConfig();
  FusionModel m(cfg);
  for (Param &p : m.params())
    if (p.name.rfind("film_b", 0) == 0) p.value.Fill(0.0);
  Utterance u = RandomUtterance(gen, cfg, 6);
  RngState rng(0);
  std::vector<double> pooled = AttentivePool(u.frames, m.Value("pool.w_a"), m.Value("pool.v_a"));
  Vad b = m.ExpertForward(ExpertKind::kB, pooled, u.h_global, u.h_ext, rng, false);
  EXPECT_EQ(b, RegressionHead(pooled, m.Head(ExpertKind::kB), cfg.dropout, rng, false));
}

TEST(FusionModel, AcousticOnlyIsBaselineHead) {
  std::mt19937_64 gen(19);
  ModelConfig cfg = SmallConfig();
  cfg.experts = {true, false, false};
  FusionModel m(cfg);
  Perturb(m, gen);
  Utterance u = RandomUtterance(gen, cfg, 9);
  u.h_local.clear();
  u.h_global.clear();
  u.h_ext.clear();
  RngState rng(0);
  ModelOutput out = m.Forward(u, rng, false);
  std::vector<double> pooled = AttentivePool(u.frames, m.Value("pool.w_a"), m.Value("pool.v_a"));
  EXPECT_EQ(out.y, RegressionHead(pooled, m.Head(ExpertKind::kA), cfg.dropout, rng, false));
  EXPECT_TRUE(out.gate.empty());
  for (const auto &row : out.routing) EXPECT_EQ(row[0], 1.0);
}

TEST(FusionModel, InputErrors) {
  std::mt19937_64 gen(20);
  ModelConfig cfg = SmallConfig();
  FusionModel m(cfg);
  RngState rng(0);
  Utterance u = RandomUtterance(gen, cfg, 4);
  Utterance no_ext = u;
  no_ext.h_ext.clear();
  EXPECT_MSFSER_ERROR(m.Forward(no_ext, rng, false), ErrorCode::kMissingSemantics);
  Utterance no_les = u;
  no_les.h_local.clear();
  EXPECT_MSFSER_ERROR(m.Forward(no_les, rng, false), ErrorCode::kMissingSemantics);
  Utterance short_sem = u;
  short_sem.h_global.pop_back();
  EXPECT_MSFSER_ERROR(m.Forward(short_sem, rng, false), ErrorCode::kDimMismatch);
  Utterance empty = u;
  empty.frames = Tensor2(0, cfg.frame_dim);
  EXPECT_MSFSER_ERROR(m.Forward(empty, rng, false), ErrorCode::kEmptyInput);
  Utterance wide = u;
  wide.frames = Tensor2(3, cfg.frame_dim + 1);
  EXPECT_MSFSER_ERROR(m.Forward(wide, rng, false), ErrorCode::kDimMismatch);
  std::vector<double> pooled(cfg.pooled_dim(), 0.0);
  EXPECT_MSFSER_ERROR(m.ExpertForward(ExpertKind::kC, pooled, u.h_global, {}, rng, false),
                      ErrorCode::kMissingSemantics);
}

TEST(FusionModel, GradientCheckAcrossVariants) {
  std::mt19937_64 gen(21);
  for (int variant = 0; variant < 5; ++variant) {
    ModelConfig cfg = SmallConfig();
    if (variant == 1) cfg.vector_gate = true;
    if (variant == 2) cfg.inter = InterFusion::kConcat;
    if (variant == 3) cfg.intra = IntraFusion::kLocalOnly;
    if (variant == 4) cfg.experts = {false, true, true};
    FusionModel m(cfg);
    Perturb(m, gen);
    std::vector<Utterance> data;
    for (int i = 0; i < 4; ++i) data.push_back(RandomUtterance(gen, cfg, 5 + gen() % 6));
    m.FitInputNormalization(data);
    SCOPED_TRACE("variant " + std::to_string(variant));
    EXPECT_LT(WorstGradientError(m, data, LossKind::kCcc), 1e-4);
    EXPECT_LT(WorstGradientError(m, data, LossKind::kMse), 1e-4);
  }
}

TEST(FusionModel, InputNormalisation) {
  ModelConfig cfg = SmallConfig();
  FusionModel m(cfg);
  std::vector<Utterance> data(2);
  data[0].frames = Tensor2(2, 5, {1, 0, 3, 7, 7, 3, 0, 3, 7, 7});
  data[1].frames = Tensor2(2, 5, {1, 0, 3, 7, 7, 3, 0, 3, 7, 7});
  m.FitInputNormalization(data);
  EXPECT_EQ(m.input_mean(), (std::vector<double>{2, 0, 3, 7, 7}));
  EXPECT_EQ(m.input_std()[0], 1.0);
  EXPECT_EQ(m.input_std()[1], 1.0);  // constant column left unscaled
}

TEST(Checkpoint, RoundTrip) {
  std::mt19937_64 gen(22);
  ModelConfig cfg = SmallConfig();
  cfg.vector_gate = true;
  FusionModel m(cfg);
  Perturb(m, gen);
  std::vector<Utterance> data = {RandomUtterance(gen, cfg, 5), RandomUtterance(gen, cfg, 6)};
  m.FitInputNormalization(data);
  for (Param &p : m.params()) {
    p.m.Fill(0.25);
    p.v.Fill(0.5);
  }
  m.params().step = 17;

  testing_support::TempDir dir;
  m.Save(dir / "ckpt.json");
  FusionModel back = FusionModel::Load(dir / "ckpt.json");
  EXPECT_EQ(back.ToCheckpointJson(), m.ToCheckpointJson());
  EXPECT_EQ(back.params().step, 17u);
  EXPECT_EQ(back.input_std(), m.input_std());
  RngState rng(0);
  EXPECT_EQ(back.Forward(data[0], rng, false).y, m.Forward(data[0], rng, false).y);
  EXPECT_EQ(back.ConfigHash(), m.ConfigHash());
  EXPECT_TRUE(std::regex_match(m.ConfigHash(), std::regex("[0-9a-f]{16}")));

  nlohmann::json j = nlohmann::json::parse(m.ToCheckpointJson());
  EXPECT_EQ(j.at("version"), "msf-ser-ckpt-v1");
  EXPECT_EQ(j.at("params").at("route.logits").at("rows"), 3);
  EXPECT_EQ(j.at("params").at("route.logits").at("data").size(), 9u);
}

TEST(Checkpoint, Malformed) {
  FusionModel m(SmallConfig());
  nlohmann::json j = nlohmann::json::parse(m.ToCheckpointJson());
  EXPECT_MSFSER_ERROR(FusionModel::FromCheckpointJson("{"), ErrorCode::kMalformedCheckpoint);
  nlohmann::json wrong_version = j;
  wrong_version["version"] = "v0";
  EXPECT_MSFSER_ERROR(FusionModel::FromCheckpointJson(wrong_version.dump()), ErrorCode::kMalformedCheckpoint);
  nlohmann::json missing = j;
  missing["params"].erase("gate.w");
  EXPECT_MSFSER_ERROR(FusionModel::FromCheckpointJson(missing.dump()), ErrorCode::kMalformedCheckpoint);
  nlohmann::json shape = j;
  shape["params"]["gate.w"]["rows"] = 1;
  EXPECT_MSFSER_ERROR(FusionModel::FromCheckpointJson(shape.dump()), ErrorCode::kMalformedCheckpoint);
  EXPECT_MSFSER_ERROR(FusionModel::Load("/nonexistent/ckpt.json"), ErrorCode::kIo);
}

// --- Training ---------------------------------------------------------------

std::vector<Utterance> RandomSet(std::mt19937_64 &gen, const ModelConfig &cfg, std::size_t n) {
  std::vector<Utterance> data;
  for (std::size_t i = 0; i < n; ++i) data.push_back(RandomUtterance(gen, cfg, 4 + gen() % 8));
  return data;
}

TEST(Train, ZeroLearningRateLeavesParameters) {
  std::mt19937_64 gen(23);
  ModelConfig cfg = SmallConfig();
  FusionModel m(cfg);
  std::vector<Utterance> data = RandomSet(gen, cfg, 10);
  const std::string before = m.ToCheckpointJson();
  TrainOptions opts;
  opts.adam.lr = 0.0;
  opts.batch = 3;
  opts.grad_accum = 2;
  opts.epochs = 3;
  RngState rng(1);
  Train(m, data, opts, rng);
  for (std::size_t i = 0; i < m.params().size(); ++i) {
    FusionModel fresh(cfg);
    EXPECT_EQ(m.params()[i].value, fresh.params()[i].value) << m.params()[i].name;
  }
  EXPECT_GT(m.params().step, 0u);
  (void)before;
}

TEST(Train, AccumulationOfIdenticalBatchesEqualsOneStep) {
  std::mt19937_64 gen(24);
  ModelConfig cfg = SmallConfig();
  cfg.dropout = 0.0;
  std::vector<Utterance> data = RandomSet(gen, cfg, 5);
  std::vector<const Utterance *> batch;
  for (const Utterance &u : data) batch.push_back(&u);
  AdamWOptions adam;
  adam.lr = 1e-2;

  FusionModel once(cfg), accumulated(cfg);
  RngState r1(0), r2(0);
  once.params().ZeroGrad();
  BatchLoss(once, batch, LossKind::kCcc, r1, true, true);
  AdamWStep(once.params(), adam);

  accumulated.params().ZeroGrad();
  for (int j = 0; j < 4; ++j) BatchLoss(accumulated, batch, LossKind::kCcc, r2, true, true);
  accumulated.params().ScaleGrad(0.25);
  AdamWStep(accumulated.params(), adam);

  for (std::size_t i = 0; i < once.params().size(); ++i)
    EXPECT_LT(RelativeError(once.params()[i].value.data(), accumulated.params()[i].value.data()), 1e-12)
        << once.params()[i].name;
}

TEST(Train, StepsPerEpoch) {
  std::mt19937_64 gen(25);
  ModelConfig cfg = SmallConfig();
  std::vector<Utterance> data = RandomSet(gen, cfg, 9);
  TrainOptions opts;
  opts.adam.lr = 1e-3;
  opts.batch = 2;  // 9 utterances: batches 2,2,2,3
  opts.grad_accum = 4;
  opts.epochs = 2;
  FusionModel m(cfg);
  RngState rng(2);
  std::vector<EpochStats> h = Train(m, data, opts, rng);
  ASSERT_EQ(h.size(), 2u);
  EXPECT_EQ(h[0].steps, 1u);
  EXPECT_EQ(h[1].steps, 2u);
  opts.grad_accum = 1;
  FusionModel m2(cfg);
  EXPECT_EQ(Train(m2, data, opts, rng).back().steps, 8u);
  EXPECT_EQ(LossHistoryCsv(h).substr(0, 22), "epoch,steps,mean_loss\n");
}

TEST(Train, DeterministicAndRoutingStaysValid) {
  std::mt19937_64 gen(26);
  ModelConfig cfg = SmallConfig();
  std::vector<Utterance> data = RandomSet(gen, cfg, 12);
  TrainOptions opts;
  opts.adam.lr = 5e-2;
  opts.batch = 4;
  opts.grad_accum = 1;
  opts.epochs = 1;
  FusionModel a(cfg), b(cfg);
  RngState ra(5), rb(5);
  for (int epoch = 0; epoch < 5; ++epoch) {
    Train(a, data, opts, ra);
    Train(b, data, opts, rb);
    RngState probe(0);
    for (const auto &row : a.Forward(data[0], probe, false).routing) {
      double sum = 0.0;
      for (double p : row) {
        EXPECT_GT(p, 0.0);
        sum += p;
      }
      EXPECT_NEAR(sum, 1.0, 1e-12);
    }
  }
  EXPECT_EQ(a.ToCheckpointJson(), b.ToCheckpointJson());
}

TEST(Train, LearnsAToyTarget) {
  std::mt19937_64 gen(27);
  ModelConfig cfg = SmallConfig();
  cfg.dropout = 0.0;
  std::vector<Utterance> data = RandomSet(gen, cfg, 40);
  for (Utterance &u : data) {
    double mean0 = 0.0;
    for (std::size_t t = 0; t < u.frames.rows(); ++t) mean0 += u.frames(t, 0) / u.frames.rows();
    u.targets = {u.h_global[0], mean0, u.h_ext[1]};
  }
  FusionModel m(cfg);
  m.FitInputNormalization(data);
  const double before = Evaluate(m, data).ccc_avg;
  TrainOptions opts;
  opts.adam.lr = 1e-2;
  opts.batch = 8;
  opts.grad_accum = 1;
  opts.epochs = 150;
  RngState rng(3);
  std::vector<EpochStats> h = Train(m, data, opts, rng);
  const double after = Evaluate(m, data).ccc_avg;
  EXPECT_GT(after, 0.8);
  EXPECT_GT(after, before);
  EXPECT_LT(h.back().mean_loss, h.front().mean_loss);
}

TEST(Train, Errors) {
  std::mt19937_64 gen(28);
  ModelConfig cfg = SmallConfig();
  FusionModel m(cfg);
  RngState rng(0);
  std::vector<Utterance> one = RandomSet(gen, cfg, 1);
  EXPECT_MSFSER_ERROR(Train(m, one, {}, rng), ErrorCode::kTooFewUtterances);
  std::vector<Utterance> bad = RandomSet(gen, cfg, 4);
  bad[2].frames(0, 0) = std::nan("");
  TrainOptions opts;
  opts.batch = 4;
  EXPECT_MSFSER_ERROR(Train(m, bad, opts, rng), ErrorCode::kNumericalFailure);
}

TEST(Evaluate, Contract) {
  std::mt19937_64 gen(29);
  std::vector<Vad> t(10), constant(10, Vad{0.3, 0.3, 0.3});
  std::normal_distribution<double> n(0.0, 1.0);
  for (Vad &v : t)
    for (double &x : v) x = n(gen);
  EvalReport perfect = EvaluatePredictions(t, t);
  for (double c : perfect.ccc) EXPECT_DOUBLE_EQ(c, 1.0);
  EXPECT_DOUBLE_EQ(perfect.ccc_avg, 1.0);
  EvalReport flat = EvaluatePredictions(constant, t);
  for (double c : flat.ccc) EXPECT_EQ(c, 0.0);
  EXPECT_EQ(flat.ccc_avg, 0.0);
  std::vector<Vad> p = t;
  for (Vad &v : p)
    for (double &x : v) x = 0.5 * x + 0.3 * n(gen);
  EvalReport r = EvaluatePredictions(p, t);
  EXPECT_DOUBLE_EQ(r.ccc_avg, (r.ccc[0] + r.ccc[1] + r.ccc[2]) / 3.0);
  EXPECT_EQ(r.n, 10u);
  EXPECT_MSFSER_ERROR(EvaluatePredictions(std::vector<Vad>(1), std::vector<Vad>(1)), ErrorCode::kTooShort);

  nlohmann::json j = nlohmann::json::parse(EvalReportJson(r, "00ff00ff00ff00ff"));
  for (const char *key : {"ccc_v", "ccc_a", "ccc_d", "ccc_avg", "n_utterances", "config_hash"})
    EXPECT_TRUE(j.contains(key)) << key;
  EXPECT_EQ(j.at("n_utterances"), 10);
}

}  // namespace
}  // namespace msfser
