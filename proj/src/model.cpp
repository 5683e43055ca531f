// src/model.cpp

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

#include "msfser/model.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include "json.hpp"
#include "msfser/embeddings.hpp"
#include "msfser/error.hpp"

namespace msfser {

using Json = nlohmann::ordered_json;

namespace {

constexpr const char *kCheckpointVersion = "msf-ser-ckpt-v1";

std::span<const double> Span(const Tensor2 &t) { return t.data(); }

std::vector<double> Concat(std::span<const double> a, std::span<const double> b) {
  std::vector<double> out(a.begin(), a.end());
  out.insert(out.end(), b.begin(), b.end());
  return out;
}

void AddInto(Tensor2 &dst, const Tensor2 &src) {
  if (!dst.SameShape(src)) Fail(ErrorCode::kShapeMismatch, "gradient shape mismatch");
  for (std::size_t i = 0; i < src.size(); ++i) dst.data()[i] += src.data()[i];
}

const char *ExpertTag(ExpertKind k) {
  switch (k) {
    case ExpertKind::kA: return "a";
    case ExpertKind::kB: return "b";
    case ExpertKind::kC: return "c";
  }
  return "a";
}

constexpr ExpertKind kAllExperts[] = {ExpertKind::kA, ExpertKind::kB, ExpertKind::kC};

Json TensorJson(const Tensor2 &t) {
  Json j;
  j["rows"] = t.rows();
  j["cols"] = t.cols();
  j["data"] = t.data();
  return j;
}

Tensor2 TensorFromJson(const Json &j, const std::string &what) {
  try {
    return Tensor2(j.at("rows").get<std::size_t>(), j.at("cols").get<std::size_t>(),
                   j.at("data").get<std::vector<double>>());
  } catch (const Error &) {
    throw;
  } catch (const std::exception &e) {
    Fail(ErrorCode::kMalformedCheckpoint, what + ": " + e.what());
  }
}

}  // namespace

// --- Config -----------------------------------------------------------------

const char *IntraFusionName(IntraFusion f) {
  switch (f) {
    case IntraFusion::kGated: return "gated";
    case IntraFusion::kGlobalOnly: return "gs";
    case IntraFusion::kLocalOnly: return "les";
  }
  return "gated";
}

IntraFusion ParseIntraFusion(const std::string &s) {
  if (s == "gated") return IntraFusion::kGated;
  if (s == "gs") return IntraFusion::kGlobalOnly;
  if (s == "les") return IntraFusion::kLocalOnly;
  Fail(ErrorCode::kInvalidArgument, "intra fusion must be gated, gs or les, got " + s);
}

const char *InterFusionName(InterFusion f) { return f == InterFusion::kFilm ? "film" : "concat"; }

InterFusion ParseInterFusion(const std::string &s) {
  if (s == "film") return InterFusion::kFilm;
  if (s == "concat") return InterFusion::kConcat;
  Fail(ErrorCode::kInvalidArgument, "inter fusion must be film or concat, got " + s);
}

void ModelConfig::Validate() const {
  if (frame_dim == 0 || sem_dim == 0 || attention_dim == 0 || film_hidden == 0 || head_hidden == 0)
    Fail(ErrorCode::kInvalidArgument, "model sizes must be positive");
  if (!(dropout >= 0.0 && dropout < 1.0))
    Fail(ErrorCode::kInvalidArgument, "dropout must be in [0, 1)");
  if (!experts[0] && !experts[1] && !experts[2])
    Fail(ErrorCode::kInvalidArgument, "expert set must not be empty");
}

std::array<bool, kNumExperts> ParseExpertSet(std::string_view text) {
  std::array<bool, kNumExperts> out{false, false, false};
  for (char c : text) {
    const char u = static_cast<char>(c >= 'a' && c <= 'z' ? c - 'a' + 'A' : c);
    if (u == ',' || u == ' ') continue;
    if (u < 'A' || u > 'C')
      Fail(ErrorCode::kInvalidArgument, "expert set takes letters A, B, C; got \"" +
                                            std::string(text) + "\"");
    out[static_cast<std::size_t>(u - 'A')] = true;
  }
  if (!out[0] && !out[1] && !out[2]) Fail(ErrorCode::kInvalidArgument, "expert set must not be empty");
  return out;
}

std::string ExpertSetName(const std::array<bool, kNumExperts> &experts) {
  std::string s;
  for (std::size_t k = 0; k < kNumExperts; ++k)
    if (experts[k]) s += static_cast<char>('A' + k);
  return s;
}

namespace {

Json ConfigToJson(const ModelConfig &cfg) {
  Json j;
  j["frame_dim"] = cfg.frame_dim;
  j["sem_dim"] = cfg.sem_dim;
  j["attention_dim"] = cfg.attention_dim;
  j["film_hidden"] = cfg.film_hidden;
  j["head_hidden"] = cfg.head_hidden;
  j["dropout"] = cfg.dropout;
  j["vector_gate"] = cfg.vector_gate;
  j["experts"] = ExpertSetName(cfg.experts);
  j["intra"] = IntraFusionName(cfg.intra);
  j["inter"] = InterFusionName(cfg.inter);
  j["init_seed"] = cfg.init_seed;
  return j;
}

ModelConfig ConfigFromJson(const Json &j) {
  ModelConfig cfg;
  try {
    cfg.frame_dim = j.at("frame_dim").get<std::size_t>();
    cfg.sem_dim = j.at("sem_dim").get<std::size_t>();
    cfg.attention_dim = j.at("attention_dim").get<std::size_t>();
    cfg.film_hidden = j.at("film_hidden").get<std::size_t>();
    cfg.head_hidden = j.at("head_hidden").get<std::size_t>();
    cfg.dropout = j.at("dropout").get<double>();
    cfg.vector_gate = j.at("vector_gate").get<bool>();
    cfg.experts = ParseExpertSet(j.at("experts").get<std::string>());
    cfg.intra = ParseIntraFusion(j.at("intra").get<std::string>());
    cfg.inter = ParseInterFusion(j.at("inter").get<std::string>());
    cfg.init_seed = j.at("init_seed").get<std::uint64_t>();
  } catch (const Error &) {
    throw;
  } catch (const std::exception &e) {
    Fail(ErrorCode::kMalformedCheckpoint, std::string("model config: ") + e.what());
  }
  cfg.Validate();
  return cfg;
}

}  // namespace

std::string ModelConfigJson(const ModelConfig &cfg) { return ConfigToJson(cfg).dump(); }

ModelConfig ParseModelConfig(std::string_view json) {
  Json j = Json::parse(json.begin(), json.end(), nullptr, false);
  if (j.is_discarded() || !j.is_object())
    Fail(ErrorCode::kMalformedCheckpoint, "model config is not a JSON object");
  return ConfigFromJson(j);
}

// --- Attentive pooling ------------------------------------------------------

std::vector<double> AttentivePool(const Tensor2 &frames, const Tensor2 &w_a, const Tensor2 &v_a,
                                  PoolCache *cache) {
  const std::size_t t_count = frames.rows(), f = frames.cols();
  if (t_count == 0) Fail(ErrorCode::kEmptyInput, "attentive pooling over zero frames");
  if (w_a.rows() != f || v_a.rows() != w_a.cols() || v_a.cols() != 1)
    Fail(ErrorCode::kShapeMismatch, "attention parameters do not match the frame dimension");

  Tensor2 hidden = Activate(Linear(frames, w_a, std::vector<double>(w_a.cols(), 0.0)),
                            Activation::kTanh);
  std::vector<double> scores(t_count, 0.0);
  for (std::size_t t = 0; t < t_count; ++t)
    for (std::size_t j = 0; j < hidden.cols(); ++j) scores[t] += hidden(t, j) * v_a(j, 0);
  std::vector<double> a = Softmax(scores);

  std::vector<double> mean(f, 0.0), m2(f, 0.0), sd(f, 0.0);
  for (std::size_t t = 0; t < t_count; ++t)
    for (std::size_t i = 0; i < f; ++i) {
      mean[i] += a[t] * frames(t, i);
      m2[i] += a[t] * frames(t, i) * frames(t, i);
    }
  for (std::size_t i = 0; i < f; ++i)
    sd[i] = std::sqrt(std::max(m2[i] - mean[i] * mean[i], 0.0) + kPoolStdEps);

  std::vector<double> pooled = Concat(mean, sd);
  if (cache != nullptr) {
    cache->frames = frames;
    cache->hidden = std::move(hidden);
    cache->attention = std::move(a);
    cache->mean = std::move(mean);
    cache->second_moment = std::move(m2);
    cache->stddev = std::move(sd);
  }
  return pooled;
}

PoolGrads AttentivePoolBackward(const PoolCache &cache, const Tensor2 &w_a, const Tensor2 &v_a,
                                std::span<const double> dpooled) {
  const Tensor2 &x = cache.frames;
  const std::size_t t_count = x.rows(), f = x.cols();
  if (dpooled.size() != 2 * f) Fail(ErrorCode::kShapeMismatch, "pooled gradient length");

  // d/d(mean) and d/d(second moment) per feature.
  std::vector<double> dmean(dpooled.begin(), dpooled.begin() + static_cast<std::ptrdiff_t>(f));
  std::vector<double> dm2(f, 0.0);
  for (std::size_t i = 0; i < f; ++i) {
    const double var = cache.second_moment[i] - cache.mean[i] * cache.mean[i];
    if (var <= 0.0) continue;  // clamped branch has zero slope
    const double dvar = dpooled[f + i] / (2.0 * cache.stddev[i]);
    dm2[i] = dvar;
    dmean[i] -= 2.0 * cache.mean[i] * dvar;
  }

  std::vector<double> da(t_count, 0.0);
  for (std::size_t t = 0; t < t_count; ++t)
    for (std::size_t i = 0; i < f; ++i) da[t] += dmean[i] * x(t, i) + dm2[i] * x(t, i) * x(t, i);
  std::vector<double> ds = SoftmaxBackward(cache.attention, da);

  PoolGrads g;
  g.dv_a = Tensor2(v_a.rows(), 1);
  Tensor2 dhidden(t_count, cache.hidden.cols());
  for (std::size_t t = 0; t < t_count; ++t)
    for (std::size_t j = 0; j < cache.hidden.cols(); ++j) {
      g.dv_a(j, 0) += ds[t] * cache.hidden(t, j);
      dhidden(t, j) = ds[t] * v_a(j, 0);
    }
  Tensor2 dz = ActivateBackward(cache.hidden, cache.hidden, dhidden, Activation::kTanh);
  g.dw_a = LinearBackward(x, w_a, dz).dw;
  return g;
}

// --- Gated fusion -----------------------------------------------------------

FuseResult GatedFuse(std::span<const double> h_local, std::span<const double> h_global,
                     const Tensor2 &w_g, const Tensor2 &b_g) {
  const std::size_t d = h_local.size();
  if (h_global.size() != d)
    Fail(ErrorCode::kDimMismatch, "local and global semantics differ in dimension");
  if (w_g.rows() != 2 * d || (w_g.cols() != 1 && w_g.cols() != d) || b_g.size() != w_g.cols())
    Fail(ErrorCode::kDimMismatch, "gate parameters do not match the semantic dimension");
  Tensor2 z = Linear(Tensor2::Row(Concat(h_local, h_global)), w_g, Span(b_g));
  FuseResult r;
  r.gate.resize(z.cols());
  for (std::size_t j = 0; j < z.cols(); ++j) r.gate[j] = Sigmoid(z(0, j));
  r.h_sem.resize(d);
  for (std::size_t i = 0; i < d; ++i) {
    const double g = r.gate.size() == 1 ? r.gate[0] : r.gate[i];
    r.h_sem[i] = g * h_local[i] + (1.0 - g) * h_global[i];
  }
  return r;
}

FuseGrads GatedFuseBackward(std::span<const double> h_local, std::span<const double> h_global,
                            const FuseResult &fwd, std::span<const double> dh_sem) {
  const std::size_t d = h_local.size();
  const std::size_t width = fwd.gate.size();
  Tensor2 dz(1, width);
  for (std::size_t i = 0; i < d; ++i) {
    const std::size_t j = width == 1 ? 0 : i;
    dz(0, j) += dh_sem[i] * (h_local[i] - h_global[i]);
  }
  for (std::size_t j = 0; j < width; ++j) dz(0, j) *= fwd.gate[j] * (1.0 - fwd.gate[j]);
  Tensor2 in = Tensor2::Row(Concat(h_local, h_global));
  LinearGrads lg = LinearBackward(in, Tensor2(2 * d, width), dz);
  return {std::move(lg.dw), Tensor2::Row(lg.db)};
}

// --- FiLM -------------------------------------------------------------------

std::vector<double> FilmModulate(std::span<const double> h_audio, std::span<const double> h_sem,
                                 const FilmView &p, FilmCache *cache) {
  const std::size_t n = h_audio.size();
  if (p.w1.rows() != h_sem.size() || p.b1.size() != p.w1.cols() || p.w2.rows() != p.w1.cols() ||
      p.b2.size() != p.w2.cols())
    Fail(ErrorCode::kDimMismatch, "FiLM parameters do not match the semantic dimension");
  if (p.w2.cols() != 2 * n)
    Fail(ErrorCode::kDimMismatch, "FiLM output must be twice the acoustic dimension");
  Tensor2 sem = Tensor2::Row(h_sem);
  Tensor2 hidden = Activate(Linear(sem, p.w1, Span(p.b1)), Activation::kTanh);
  Tensor2 raw = Linear(hidden, p.w2, Span(p.b2));
  std::vector<double> gamma(n), out(n);
  for (std::size_t i = 0; i < n; ++i) {
    gamma[i] = 1.0 + raw(0, i);
    out[i] = gamma[i] * h_audio[i] + raw(0, n + i);
  }
  if (cache != nullptr) {
    cache->sem = std::move(sem);
    cache->hidden = std::move(hidden);
    cache->raw = std::move(raw);
    cache->audio.assign(h_audio.begin(), h_audio.end());
    cache->gamma = std::move(gamma);
  }
  return out;
}

FilmGrads FilmModulateBackward(const FilmCache &cache, const FilmView &p,
                               std::span<const double> dout) {
  const std::size_t n = cache.audio.size();
  if (dout.size() != n) Fail(ErrorCode::kShapeMismatch, "FiLM output gradient length");
  FilmGrads g;
  Tensor2 draw(1, 2 * n);
  g.dh_audio.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    draw(0, i) = dout[i] * cache.audio[i];
    draw(0, n + i) = dout[i];
    g.dh_audio[i] = dout[i] * cache.gamma[i];
  }
  LinearGrads l2 = LinearBackward(cache.hidden, p.w2, draw);
  Tensor2 dpre = ActivateBackward(cache.hidden, cache.hidden, l2.dx, Activation::kTanh);
  LinearGrads l1 = LinearBackward(cache.sem, p.w1, dpre);
  g.dw2 = std::move(l2.dw);
  g.db2 = Tensor2::Row(l2.db);
  g.dw1 = std::move(l1.dw);
  g.db1 = Tensor2::Row(l1.db);
  g.dh_sem = l1.dx.data();
  return g;
}

// --- Regression head --------------------------------------------------------

Vad RegressionHead(std::span<const double> in, const HeadView &p, double dropout, RngState &rng,
                   bool training, HeadCache *cache) {
  if (p.w1.rows() != in.size() || p.w2.cols() != kNumDims)
    Fail(ErrorCode::kDimMismatch, "head parameters do not match the input dimension");
  Tensor2 x = Tensor2::Row(in);
  Tensor2 z1 = Linear(x, p.w1, Span(p.b1));
  LayerNormCache ln;
  Tensor2 normed = LayerNorm(z1, Span(p.ln_gain), Span(p.ln_bias), &ln);
  Tensor2 act = Activate(normed, Activation::kTanh);
  Tensor2 mask;
  Tensor2 dropped = Dropout(act, dropout, rng, training, &mask);
  Tensor2 out = Linear(dropped, p.w2, Span(p.b2));
  if (cache != nullptr) {
    cache->in = std::move(x);
    cache->ln = std::move(ln);
    cache->normed = std::move(normed);
    cache->act = std::move(act);
    cache->mask = std::move(mask);
    cache->dropped = std::move(dropped);
  }
  return {out(0, 0), out(0, 1), out(0, 2)};
}

HeadGrads RegressionHeadBackward(const HeadCache &cache, const HeadView &p, const Vad &dout) {
  HeadGrads g;
  LinearGrads l2 = LinearBackward(cache.dropped, p.w2, Tensor2::Row(dout));
  Tensor2 dact = l2.dx;
  for (std::size_t i = 0; i < dact.size(); ++i) dact.data()[i] *= cache.mask.data()[i];
  Tensor2 dnormed = ActivateBackward(cache.normed, cache.act, dact, Activation::kTanh);
  LayerNormGrads lg = LayerNormBackward(cache.ln, Span(p.ln_gain), dnormed);
  LinearGrads l1 = LinearBackward(cache.in, p.w1, lg.dx);
  g.dw1 = std::move(l1.dw);
  g.db1 = Tensor2::Row(l1.db);
  g.dgain = Tensor2::Row(lg.dgain);
  g.dbias = Tensor2::Row(lg.dbias);
  g.dw2 = std::move(l2.dw);
  g.db2 = Tensor2::Row(l2.db);
  g.din = l1.dx.data();
  return g;
}

// --- Routing ----------------------------------------------------------------

MoeResult MoeCombine(const ExpertOutputs &outputs, const Tensor2 &logits,
                     const std::array<bool, kNumExperts> &active) {
  if (logits.rows() != kNumDims || logits.cols() != kNumExperts)
    Fail(ErrorCode::kShapeMismatch, "routing logits must be 3 x 3");
  if (!active[0] && !active[1] && !active[2])
    Fail(ErrorCode::kInvalidArgument, "no active experts");
  MoeResult r;
  for (std::size_t d = 0; d < kNumDims; ++d) {
    std::vector<double> row;
    for (std::size_t k = 0; k < kNumExperts; ++k)
      if (active[k]) row.push_back(logits(d, k));
    std::vector<double> pi = Softmax(row);
    std::size_t j = 0;
    for (std::size_t k = 0; k < kNumExperts; ++k) {
      r.pi[d][k] = active[k] ? pi[j++] : 0.0;
      if (active[k]) r.y[d] += r.pi[d][k] * outputs[k][d];
    }
  }
  return r;
}

MoeGrads MoeCombineBackward(const ExpertOutputs &outputs, const MoeResult &fwd, const Vad &dy) {
  MoeGrads g;
  g.dlogits = Tensor2(kNumDims, kNumExperts);
  for (std::size_t d = 0; d < kNumDims; ++d)
    for (std::size_t k = 0; k < kNumExperts; ++k) {
      const double pi = fwd.pi[d][k];
      if (pi == 0.0) continue;
      g.doutputs[k][d] = pi * dy[d];
      g.dlogits(d, k) = pi * (outputs[k][d] - fwd.y[d]) * dy[d];
    }
  return g;
}

// --- FusionModel ------------------------------------------------------------

FusionModel::FusionModel(const ModelConfig &cfg) : cfg_(cfg) {
  cfg_.Validate();
  input_mean_.assign(cfg_.frame_dim, 0.0);
  input_std_.assign(cfg_.frame_dim, 1.0);
  AddParams();
}

std::size_t FusionModel::HeadInputDim(ExpertKind kind) const {
  if (kind == ExpertKind::kA || cfg_.inter == InterFusion::kFilm) return cfg_.pooled_dim();
  return cfg_.pooled_dim() + cfg_.sem_dim;
}

void FusionModel::AddParams() {
  RngState rng(cfg_.init_seed);
  auto uniform = [&](std::size_t rows, std::size_t cols, std::size_t fan_in) {
    const double s = 1.0 / std::sqrt(static_cast<double>(fan_in));
    Tensor2 t(rows, cols);
    for (double &v : t.data()) v = rng.Uniform(-s, s);
    return t;
  };
  auto affine = [&](const std::string &prefix, std::size_t in, std::size_t out) {
    tape_.Add(prefix + ".w", uniform(in, out, in));
    tape_.Add(prefix + ".b", uniform(1, out, in));
  };

  const std::size_t f = cfg_.frame_dim, p = cfg_.pooled_dim(), d = cfg_.sem_dim;
  tape_.Add("pool.w_a", uniform(f, cfg_.attention_dim, f));
  tape_.Add("pool.v_a", uniform(cfg_.attention_dim, 1, cfg_.attention_dim));
  if (cfg_.Has(ExpertKind::kB) && cfg_.intra == IntraFusion::kGated)
    affine("gate", 2 * d, cfg_.vector_gate ? d : 1);
  if (cfg_.inter == InterFusion::kFilm) {
    for (ExpertKind k : {ExpertKind::kB, ExpertKind::kC}) {
      if (!cfg_.Has(k)) continue;
      const std::string prefix = std::string("film_") + ExpertTag(k);
      affine(prefix + ".l1", d, cfg_.film_hidden);
      affine(prefix + ".l2", cfg_.film_hidden, 2 * p);
    }
  }
  for (ExpertKind k : kAllExperts) {
    if (!cfg_.Has(k)) continue;
    const std::string prefix = std::string("head_") + ExpertTag(k);
    affine(prefix + ".l1", HeadInputDim(k), cfg_.head_hidden);
    tape_.Add(prefix + ".ln_gain", Tensor2(1, cfg_.head_hidden, 1.0));
    tape_.Add(prefix + ".ln_bias", Tensor2(1, cfg_.head_hidden, 0.0));
    affine(prefix + ".l2", cfg_.head_hidden, kNumDims);
  }
  tape_.Add("route.logits", Tensor2(kNumDims, kNumExperts, 0.0));
}

const Tensor2 &FusionModel::Value(const std::string &name) const {
  return tape_[tape_.Index(name)].value;
}

FilmView FusionModel::Film(ExpertKind kind) const {
  const std::string prefix = std::string("film_") + ExpertTag(kind);
  return {Value(prefix + ".l1.w"), Value(prefix + ".l1.b"), Value(prefix + ".l2.w"),
          Value(prefix + ".l2.b")};
}

HeadView FusionModel::Head(ExpertKind kind) const {
  const std::string prefix = std::string("head_") + ExpertTag(kind);
  return {Value(prefix + ".l1.w"),    Value(prefix + ".l1.b"), Value(prefix + ".ln_gain"),
          Value(prefix + ".ln_bias"), Value(prefix + ".l2.w"), Value(prefix + ".l2.b")};
}

void FusionModel::FitInputNormalization(std::span<const Utterance> data) {
  const std::size_t f = cfg_.frame_dim;
  std::vector<double> sum(f, 0.0), sq(f, 0.0);
  std::size_t n = 0;
  for (const Utterance &u : data) {
    if (u.frames.cols() != f) Fail(ErrorCode::kDimMismatch, u.id + ": frame dimension");
    for (std::size_t t = 0; t < u.frames.rows(); ++t, ++n)
      for (std::size_t i = 0; i < f; ++i) sum[i] += u.frames(t, i);
  }
  if (n == 0) Fail(ErrorCode::kEmptyInput, "no frames to fit input normalisation");
  for (std::size_t i = 0; i < f; ++i) input_mean_[i] = sum[i] / static_cast<double>(n);
  for (const Utterance &u : data)
    for (std::size_t t = 0; t < u.frames.rows(); ++t)
      for (std::size_t i = 0; i < f; ++i) {
        const double c = u.frames(t, i) - input_mean_[i];
        sq[i] += c * c;
      }
  for (std::size_t i = 0; i < f; ++i) {
    const double sd = std::sqrt(sq[i] / static_cast<double>(n));
    input_std_[i] = sd > 1e-8 ? sd : 1.0;
  }
}

namespace {

void CheckSemantic(const std::vector<double> &v, std::size_t dim, const std::string &what,
                   const std::string &id) {
  if (v.empty()) Fail(ErrorCode::kMissingSemantics, id + ": no " + what + " vector");
  if (v.size() != dim)
    Fail(ErrorCode::kDimMismatch, id + ": " + what + " has " + std::to_string(v.size()) +
                                      " dims, model expects " + std::to_string(dim));
}

}  // namespace

std::vector<double> FusionModel::FuseSemantics(const Utterance &utt,
                                               std::optional<FuseResult> *fuse) const {
  switch (cfg_.intra) {
    case IntraFusion::kGlobalOnly:
      CheckSemantic(utt.h_global, cfg_.sem_dim, "gs", utt.id);
      return utt.h_global;
    case IntraFusion::kLocalOnly:
      CheckSemantic(utt.h_local, cfg_.sem_dim, "les", utt.id);
      return utt.h_local;
    case IntraFusion::kGated: break;
  }
  CheckSemantic(utt.h_local, cfg_.sem_dim, "les", utt.id);
  CheckSemantic(utt.h_global, cfg_.sem_dim, "gs", utt.id);
  FuseResult r = GatedFuse(utt.h_local, utt.h_global, Value("gate.w"), Value("gate.b"));
  std::vector<double> h = r.h_sem;
  if (fuse != nullptr) *fuse = std::move(r);
  return h;
}

Vad FusionModel::ExpertForward(ExpertKind kind, std::span<const double> pooled,
                               std::span<const double> h_sem, std::span<const double> h_ext,
                               RngState &rng, bool training) const {
  if (!cfg_.Has(kind)) Fail(ErrorCode::kInvalidArgument, "expert is not part of this model");
  std::vector<double> in;
  if (kind == ExpertKind::kA) {
    in.assign(pooled.begin(), pooled.end());
  } else {
    std::span<const double> sem = kind == ExpertKind::kB ? h_sem : h_ext;
    if (sem.empty())
      Fail(ErrorCode::kMissingSemantics,
           std::string("expert ") + (kind == ExpertKind::kB ? "B" : "C") + " needs semantics");
    in = cfg_.inter == InterFusion::kFilm ? FilmModulate(pooled, sem, Film(kind))
                                          : Concat(pooled, sem);
  }
  return RegressionHead(in, Head(kind), cfg_.dropout, rng, training);
}

ModelOutput FusionModel::Forward(const Utterance &utt, RngState &rng, bool training,
                                 ForwardCache *cache) const {
  const std::size_t f = cfg_.frame_dim;
  if (utt.frames.rows() == 0) Fail(ErrorCode::kEmptyInput, utt.id + ": no frames");
  if (utt.frames.cols() != f)
    Fail(ErrorCode::kDimMismatch, utt.id + ": frames have " + std::to_string(utt.frames.cols()) +
                                      " features, model expects " + std::to_string(f));

  Tensor2 x = utt.frames;
  for (std::size_t t = 0; t < x.rows(); ++t)
    for (std::size_t i = 0; i < f; ++i) x(t, i) = (x(t, i) - input_mean_[i]) / input_std_[i];

  ForwardCache local;
  ForwardCache &c = cache != nullptr ? *cache : local;
  c = ForwardCache{};
  c.utt = &utt;
  c.pooled = AttentivePool(x, Value("pool.w_a"), Value("pool.v_a"), &c.pool);

  ModelOutput out;
  if (cfg_.Has(ExpertKind::kB)) {
    c.h_sem = FuseSemantics(utt, &c.fuse);
    if (c.fuse) out.gate = c.fuse->gate;
  }
  if (cfg_.Has(ExpertKind::kC)) CheckSemantic(utt.h_ext, cfg_.sem_dim, "es", utt.id);

  for (ExpertKind k : kAllExperts) {
    if (!cfg_.Has(k)) continue;
    const std::size_t ki = static_cast<std::size_t>(k);
    std::vector<double> in;
    if (k == ExpertKind::kA) {
      in = c.pooled;
    } else {
      const std::vector<double> &sem = k == ExpertKind::kB ? c.h_sem : utt.h_ext;
      if (cfg_.inter == InterFusion::kFilm) {
        c.film[ki].emplace();
        in = FilmModulate(c.pooled, sem, Film(k), &*c.film[ki]);
      } else {
        in = Concat(c.pooled, sem);
      }
    }
    c.head[ki].emplace();
    c.outputs[ki] = RegressionHead(in, Head(k), cfg_.dropout, rng, training, &*c.head[ki]);
  }
  c.moe = MoeCombine(c.outputs, Value("route.logits"), cfg_.experts);

  out.y = c.moe.y;
  out.routing = c.moe.pi;
  out.experts = c.outputs;
  return out;
}

void FusionModel::Backward(const ForwardCache &c, const Vad &dy) {
  auto grad = [&](const std::string &name) -> Tensor2 & { return tape_[tape_.Index(name)].grad; };

  MoeGrads mg = MoeCombineBackward(c.outputs, c.moe, dy);
  AddInto(grad("route.logits"), mg.dlogits);

  std::vector<double> dpooled(cfg_.pooled_dim(), 0.0);
  std::vector<double> dh_sem(cfg_.sem_dim, 0.0);
  const std::size_t p = cfg_.pooled_dim();
  for (ExpertKind k : kAllExperts) {
    if (!cfg_.Has(k)) continue;
    const std::size_t ki = static_cast<std::size_t>(k);
    const std::string head = std::string("head_") + ExpertTag(k);
    HeadGrads hg = RegressionHeadBackward(*c.head[ki], Head(k), mg.doutputs[ki]);
    AddInto(grad(head + ".l1.w"), hg.dw1);
    AddInto(grad(head + ".l1.b"), hg.db1);
    AddInto(grad(head + ".ln_gain"), hg.dgain);
    AddInto(grad(head + ".ln_bias"), hg.dbias);
    AddInto(grad(head + ".l2.w"), hg.dw2);
    AddInto(grad(head + ".l2.b"), hg.db2);

    if (k == ExpertKind::kA) {
      for (std::size_t i = 0; i < p; ++i) dpooled[i] += hg.din[i];
      continue;
    }
    std::vector<double> dsem;
    if (cfg_.inter == InterFusion::kFilm) {
      const std::string film = std::string("film_") + ExpertTag(k);
      FilmGrads fg = FilmModulateBackward(*c.film[ki], Film(k), hg.din);
      AddInto(grad(film + ".l1.w"), fg.dw1);
      AddInto(grad(film + ".l1.b"), fg.db1);
      AddInto(grad(film + ".l2.w"), fg.dw2);
      AddInto(grad(film + ".l2.b"), fg.db2);
      for (std::size_t i = 0; i < p; ++i) dpooled[i] += fg.dh_audio[i];
      dsem = std::move(fg.dh_sem);
    } else {
      for (std::size_t i = 0; i < p; ++i) dpooled[i] += hg.din[i];
      dsem.assign(hg.din.begin() + static_cast<std::ptrdiff_t>(p), hg.din.end());
    }
    // h_ext is an input, so only expert B's semantic gradient flows further.
    if (k == ExpertKind::kB)
      for (std::size_t i = 0; i < dh_sem.size(); ++i) dh_sem[i] += dsem[i];
  }

  if (c.fuse) {
    FuseGrads fg = GatedFuseBackward(c.utt->h_local, c.utt->h_global, *c.fuse, dh_sem);
    AddInto(grad("gate.w"), fg.dw_g);
    AddInto(grad("gate.b"), fg.db_g);
  }

  PoolGrads pg = AttentivePoolBackward(c.pool, Value("pool.w_a"), Value("pool.v_a"), dpooled);
  AddInto(grad("pool.w_a"), pg.dw_a);
  AddInto(grad("pool.v_a"), pg.dv_a);
}

// --- Checkpoints ------------------------------------------------------------

std::string FusionModel::ToCheckpointJson() const {
  Json doc;
  doc["version"] = kCheckpointVersion;
  doc["config"] = ConfigToJson(cfg_);
  doc["input_norm"]["mean"] = input_mean_;
  doc["input_norm"]["std"] = input_std_;
  Json params = Json::object(), m = Json::object(), v = Json::object();
  for (const Param &prm : tape_) {
    params[prm.name] = TensorJson(prm.value);
    m[prm.name] = TensorJson(prm.m);
    v[prm.name] = TensorJson(prm.v);
  }
  doc["params"] = std::move(params);
  doc["optimizer"]["step"] = tape_.step;
  doc["optimizer"]["m"] = std::move(m);
  doc["optimizer"]["v"] = std::move(v);
  return doc.dump() + "\n";
}

FusionModel FusionModel::FromCheckpointJson(std::string_view text) {
  Json doc = Json::parse(text.begin(), text.end(), nullptr, false);
  if (doc.is_discarded() || !doc.is_object())
    Fail(ErrorCode::kMalformedCheckpoint, "checkpoint is not a JSON object");
  if (!doc.contains("version") || doc["version"] != kCheckpointVersion)
    Fail(ErrorCode::kMalformedCheckpoint, std::string("checkpoint version must be ") +
                                              kCheckpointVersion);
  if (!doc.contains("config") || !doc.contains("params") || !doc.contains("input_norm"))
    Fail(ErrorCode::kMalformedCheckpoint, "checkpoint lacks config, params or input_norm");
  try {
    FusionModel model(ConfigFromJson(doc["config"]));
    model.input_mean_ = doc["input_norm"].at("mean").get<std::vector<double>>();
    model.input_std_ = doc["input_norm"].at("std").get<std::vector<double>>();
    if (model.input_mean_.size() != model.cfg_.frame_dim ||
        model.input_std_.size() != model.cfg_.frame_dim)
      Fail(ErrorCode::kMalformedCheckpoint, "input_norm length differs from frame_dim");

    const Json &params = doc["params"];
    if (!params.is_object() || params.size() != model.tape_.size())
      Fail(ErrorCode::kMalformedCheckpoint, "parameter set does not match the config");
    const Json *opt = doc.contains("optimizer") ? &doc["optimizer"] : nullptr;
    for (Param &prm : model.tape_) {
      if (!params.contains(prm.name))
        Fail(ErrorCode::kMalformedCheckpoint, "missing parameter " + prm.name);
      Tensor2 value = TensorFromJson(params[prm.name], prm.name);
      if (!value.SameShape(prm.value))
        Fail(ErrorCode::kMalformedCheckpoint, "parameter " + prm.name + " has the wrong shape");
      prm.value = std::move(value);
      if (opt != nullptr) {
        prm.m = TensorFromJson(opt->at("m").at(prm.name), prm.name + " (m)");
        prm.v = TensorFromJson(opt->at("v").at(prm.name), prm.name + " (v)");
        if (!prm.m.SameShape(prm.value) || !prm.v.SameShape(prm.value))
          Fail(ErrorCode::kMalformedCheckpoint, "optimiser state for " + prm.name + " has the wrong shape");
      }
    }
    if (opt != nullptr) model.tape_.step = opt->value("step", std::uint64_t{0});
    return model;
  } catch (const Error &e) {
    if (e.code() == ErrorCode::kMalformedCheckpoint) throw;
    Fail(ErrorCode::kMalformedCheckpoint, e.what());
  } catch (const std::exception &e) {
    Fail(ErrorCode::kMalformedCheckpoint, e.what());
  }
}

void FusionModel::Save(const std::string &path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) Fail(ErrorCode::kIo, "cannot write " + path);
  out << ToCheckpointJson();
  if (!out) Fail(ErrorCode::kIo, "write failed: " + path);
}

FusionModel FusionModel::Load(const std::string &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) Fail(ErrorCode::kIo, "cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return FromCheckpointJson(ss.str());
}

std::string FusionModel::ConfigHash() const {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(StableHash(ModelConfigJson(cfg_), 0)));
  return buf;
}

// --- Training ---------------------------------------------------------------

double BatchLoss(FusionModel &model, std::span<const Utterance *const> batch, LossKind loss,
                 RngState &rng, bool training, bool accumulate) {
  const std::size_t n = batch.size();
  if (n == 0) Fail(ErrorCode::kEmptyInput, "empty batch");
  std::vector<ForwardCache> caches(accumulate ? n : 0);
  Tensor2 pred(n, kNumDims), target(n, kNumDims);
  for (std::size_t i = 0; i < n; ++i) {
    ModelOutput out = model.Forward(*batch[i], rng, training, accumulate ? &caches[i] : nullptr);
    for (std::size_t d = 0; d < kNumDims; ++d) {
      pred(i, d) = out.y[d];
      target(i, d) = batch[i]->targets[d];
    }
  }
  LossWithGrad lg = loss == LossKind::kCcc ? CccLoss(pred, target) : MseLoss(pred, target);
  if (accumulate && std::isfinite(lg.loss)) {
    for (std::size_t i = 0; i < n; ++i)
      model.Backward(caches[i], {lg.grad(i, 0), lg.grad(i, 1), lg.grad(i, 2)});
  }
  return lg.loss;
}

std::vector<EpochStats> Train(FusionModel &model, std::span<const Utterance> data,
                              const TrainOptions &opts, RngState &rng) {
  if (data.size() < 2)
    Fail(ErrorCode::kTooFewUtterances, "training needs at least 2 utterances, got " +
                                           std::to_string(data.size()));
  if (opts.batch < 2) Fail(ErrorCode::kInvalidArgument, "batch size must be >= 2");
  if (opts.grad_accum == 0) Fail(ErrorCode::kInvalidArgument, "grad_accum must be >= 1");

  std::vector<EpochStats> history;
  std::vector<std::size_t> order(data.size());
  for (std::size_t epoch = 0; epoch < opts.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    for (std::size_t i = order.size() - 1; i > 0; --i) std::swap(order[i], order[rng.Below(i + 1)]);

    std::vector<std::vector<const Utterance *>> batches;
    for (std::size_t start = 0; start < order.size(); start += opts.batch) {
      std::vector<const Utterance *> b;
      for (std::size_t i = start; i < std::min(order.size(), start + opts.batch); ++i)
        b.push_back(&data[order[i]]);
      // CCC needs two items; a lone leftover joins the previous batch.
      if (b.size() < 2 && !batches.empty())
        batches.back().insert(batches.back().end(), b.begin(), b.end());
      else
        batches.push_back(std::move(b));
    }

    double loss_sum = 0.0;
    for (std::size_t g = 0; g < batches.size(); g += opts.grad_accum) {
      const std::size_t count = std::min(opts.grad_accum, batches.size() - g);
      model.params().ZeroGrad();
      for (std::size_t j = 0; j < count; ++j) {
        const double loss = BatchLoss(model, batches[g + j], opts.loss, rng, true, true);
        if (!std::isfinite(loss))
          Fail(ErrorCode::kNumericalFailure, "non-finite loss at epoch " + std::to_string(epoch + 1));
        loss_sum += loss;
      }
      model.params().ScaleGrad(1.0 / static_cast<double>(count));
      AdamWStep(model.params(), opts.adam);
    }
    history.push_back({epoch + 1, model.params().step,
                       loss_sum / static_cast<double>(batches.size())});
  }
  return history;
}

std::vector<Vad> Predict(const FusionModel &model, std::span<const Utterance> data) {
  RngState unused(0);
  std::vector<Vad> out;
  out.reserve(data.size());
  for (const Utterance &u : data) out.push_back(model.Forward(u, unused, false).y);
  return out;
}

EvalReport EvaluatePredictions(std::span<const Vad> pred, std::span<const Vad> target) {
  if (pred.size() != target.size())
    Fail(ErrorCode::kLengthMismatch, "prediction and target counts differ");
  if (pred.size() < 2) Fail(ErrorCode::kTooShort, "evaluation needs at least 2 utterances");
  EvalReport r;
  r.n = pred.size();
  for (std::size_t d = 0; d < kNumDims; ++d) {
    std::vector<double> p, t;
    for (std::size_t i = 0; i < pred.size(); ++i) {
      p.push_back(pred[i][d]);
      t.push_back(target[i][d]);
    }
    r.ccc[d] = Ccc(p, t);
  }
  r.ccc_avg = (r.ccc[0] + r.ccc[1] + r.ccc[2]) / 3.0;
  return r;
}

EvalReport Evaluate(const FusionModel &model, std::span<const Utterance> data) {
  if (data.size() < 2) Fail(ErrorCode::kTooShort, "evaluation needs at least 2 utterances");
  std::vector<Vad> pred = Predict(model, data);
  std::vector<Vad> target;
  for (const Utterance &u : data) target.push_back(u.targets);
  return EvaluatePredictions(pred, target);
}

std::string EvalReportJson(const EvalReport &report, const std::string &config_hash) {
  Json j;
  j["ccc_v"] = report.ccc[0];
  j["ccc_a"] = report.ccc[1];
  j["ccc_d"] = report.ccc[2];
  j["ccc_avg"] = report.ccc_avg;
  j["n_utterances"] = report.n;
  j["config_hash"] = config_hash;
  return j.dump(2) + "\n";
}

std::string LossHistoryCsv(std::span<const EpochStats> history) {
  std::ostringstream os;
  os.precision(17);
  os << "epoch,steps,mean_loss\n";
  for (const EpochStats &e : history) os << e.epoch << ',' << e.steps << ',' << e.mean_loss << '\n';
  return os.str();
}

}  // namespace msfser
