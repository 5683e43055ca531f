// msfser/model.hpp

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

#ifndef MSFSER_MODEL_HPP_
#define MSFSER_MODEL_HPP_

// The fusion regressor. Acoustic frames are pooled with attentive
// statistics; local and global text semantics are mixed by a sigmoid gate;
// FiLM layers let semantics scale and shift the pooled acoustic vector;
// three experts (acoustic only, fused text, extended description) feed a
// per-dimension softmax routing over valence, arousal and dominance.

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "msfser/numcore.hpp"

namespace msfser {

constexpr std::size_t kNumExperts = 3;
constexpr std::size_t kNumDims = 3;  // valence, arousal, dominance

using Vad = std::array<double, kNumDims>;
/// Indexed [expert][dim].
using ExpertOutputs = std::array<Vad, kNumExperts>;
/// Indexed [dim][expert].
using RoutingMatrix = std::array<std::array<double, kNumExperts>, kNumDims>;

enum class ExpertKind { kA = 0, kB = 1, kC = 2 };

/// How local and global semantics are combined into h_sem.
enum class IntraFusion { kGated, kGlobalOnly, kLocalOnly };
/// How semantics enter experts B and C.
enum class InterFusion { kFilm, kConcat };

/// "gated", "gs", "les" and "film", "concat".
const char *IntraFusionName(IntraFusion f);
IntraFusion ParseIntraFusion(const std::string &name);
const char *InterFusionName(InterFusion f);
InterFusion ParseInterFusion(const std::string &name);

struct ModelConfig {
  std::size_t frame_dim = 19;
  std::size_t sem_dim = 32;
  std::size_t attention_dim = 16;
  std::size_t film_hidden = 32;
  std::size_t head_hidden = 32;
  double dropout = 0.5;
  bool vector_gate = false;
  std::array<bool, kNumExperts> experts{true, true, true};
  IntraFusion intra = IntraFusion::kGated;
  InterFusion inter = InterFusion::kFilm;
  std::uint64_t init_seed = 0;

  std::size_t pooled_dim() const { return 2 * frame_dim; }
  bool Has(ExpertKind k) const { return experts[static_cast<std::size_t>(k)]; }
  void Validate() const;
};

/// "ABC" style expert-set strings.
std::array<bool, kNumExperts> ParseExpertSet(std::string_view text);
std::string ExpertSetName(const std::array<bool, kNumExperts> &experts);

std::string ModelConfigJson(const ModelConfig &cfg);
ModelConfig ParseModelConfig(std::string_view json);

// --- Components with explicit parameters ------------------------------------

constexpr double kPoolStdEps = 1e-9;

struct PoolCache {
  Tensor2 frames;   // T x F
  Tensor2 hidden;   // tanh(frames W_a), T x A
  std::vector<double> attention;
  std::vector<double> mean;
  std::vector<double> second_moment;
  std::vector<double> stddev;
};

/// a = softmax_t(v_a . tanh(W_a^T h_t)); returns [sum a h ; sqrt(max(sum a h^2
/// - mean^2, 0) + 1e-9)]. W_a is F x A, v_a is A x 1. Throws kEmptyInput for
/// zero frames.
std::vector<double> AttentivePool(const Tensor2 &frames, const Tensor2 &w_a, const Tensor2 &v_a,
                                  PoolCache *cache = nullptr);

struct PoolGrads {
  Tensor2 dw_a;
  Tensor2 dv_a;
};
PoolGrads AttentivePoolBackward(const PoolCache &cache, const Tensor2 &w_a, const Tensor2 &v_a,
                                std::span<const double> dpooled);

struct FuseResult {
  std::vector<double> h_sem;
  std::vector<double> gate;  // one entry, or one per dimension
};

/// g = sigmoid([h_local; h_global] W_g + b_g), h_sem = g h_local + (1 - g)
/// h_global. W_g is 2D x G with G = 1 (scalar gate) or D. Throws
/// kDimMismatch.
FuseResult GatedFuse(std::span<const double> h_local, std::span<const double> h_global,
                     const Tensor2 &w_g, const Tensor2 &b_g);

struct FuseGrads {
  Tensor2 dw_g;
  Tensor2 db_g;
};
FuseGrads GatedFuseBackward(std::span<const double> h_local, std::span<const double> h_global,
                            const FuseResult &fwd, std::span<const double> dh_sem);

struct FilmView {
  const Tensor2 &w1;  // D x H
  const Tensor2 &b1;  // 1 x H
  const Tensor2 &w2;  // H x 2P
  const Tensor2 &b2;  // 1 x 2P
};

struct FilmCache {
  Tensor2 sem;
  Tensor2 hidden;  // tanh output
  Tensor2 raw;
  std::vector<double> audio;
  std::vector<double> gamma;
};

/// (raw_g, beta) = MLP(h_sem), gamma = 1 + raw_g, out = gamma * h_audio + beta.
/// The MLP is linear -> tanh -> linear. Throws kDimMismatch.
std::vector<double> FilmModulate(std::span<const double> h_audio, std::span<const double> h_sem,
                                 const FilmView &p, FilmCache *cache = nullptr);

struct FilmGrads {
  Tensor2 dw1, db1, dw2, db2;
  std::vector<double> dh_audio;
  std::vector<double> dh_sem;
};
FilmGrads FilmModulateBackward(const FilmCache &cache, const FilmView &p,
                               std::span<const double> dout);

struct HeadView {
  const Tensor2 &w1;  // In x H
  const Tensor2 &b1;
  const Tensor2 &ln_gain;
  const Tensor2 &ln_bias;
  const Tensor2 &w2;  // H x 3
  const Tensor2 &b2;
};

struct HeadCache {
  Tensor2 in;
  LayerNormCache ln;
  Tensor2 normed;
  Tensor2 act;
  Tensor2 mask;
  Tensor2 dropped;
};

/// linear -> layer norm -> tanh -> dropout -> linear, three outputs.
Vad RegressionHead(std::span<const double> in, const HeadView &p, double dropout, RngState &rng,
                   bool training, HeadCache *cache = nullptr);

struct HeadGrads {
  Tensor2 dw1, db1, dgain, dbias, dw2, db2;
  std::vector<double> din;
};
HeadGrads RegressionHeadBackward(const HeadCache &cache, const HeadView &p, const Vad &dout);

struct MoeResult {
  Vad y{};
  RoutingMatrix pi{};
};

/// pi[d] = softmax of logits row d over the active experts (inactive ones get
/// weight 0); y[d] = sum_k pi[d][k] * outputs[k][d]. `logits` is 3 x 3.
MoeResult MoeCombine(const ExpertOutputs &outputs, const Tensor2 &logits,
                     const std::array<bool, kNumExperts> &active = {true, true, true});

struct MoeGrads {
  ExpertOutputs doutputs{};
  Tensor2 dlogits;
};
MoeGrads MoeCombineBackward(const ExpertOutputs &outputs, const MoeResult &fwd, const Vad &dy);

// --- Full model -------------------------------------------------------------

struct Utterance {
  std::string id;
  Tensor2 frames;  // T x frame_dim, raw acoustic features
  std::vector<double> h_local;
  std::vector<double> h_global;
  std::vector<double> h_ext;
  Vad targets{};
};

struct ForwardCache {
  PoolCache pool;
  std::vector<double> pooled;
  std::optional<FuseResult> fuse;
  std::vector<double> h_sem;
  std::array<std::optional<FilmCache>, kNumExperts> film;
  std::array<std::optional<HeadCache>, kNumExperts> head;
  ExpertOutputs outputs{};
  MoeResult moe;
  const Utterance *utt = nullptr;
};

struct ModelOutput {
  Vad y{};
  std::vector<double> gate;  // empty when no gate ran
  RoutingMatrix routing{};
  ExpertOutputs experts{};
};

class FusionModel {
 public:
  /// Initialises every affine weight and bias from U(-s, s), s = 1/sqrt(fan_in),
  /// with layer-norm gains at 1, biases at 0 and routing logits at 0.
  explicit FusionModel(const ModelConfig &cfg);

  const ModelConfig &config() const { return cfg_; }
  ParamTape &params() { return tape_; }
  const ParamTape &params() const { return tape_; }

  /// Per-feature standardisation applied to frames before pooling. Not
  /// learned; set once from training data.
  void FitInputNormalization(std::span<const Utterance> data);
  const std::vector<double> &input_mean() const { return input_mean_; }
  const std::vector<double> &input_std() const { return input_std_; }

  /// Throws kMissingSemantics when an active expert lacks its vectors and
  /// kDimMismatch on wrong sizes.
  ModelOutput Forward(const Utterance &utt, RngState &rng, bool training,
                      ForwardCache *cache = nullptr) const;

  /// Adds d(loss)/d(param) for one utterance into params().grad.
  void Backward(const ForwardCache &cache, const Vad &dy);

  /// One expert's raw 3-vector given an already pooled acoustic vector.
  Vad ExpertForward(ExpertKind kind, std::span<const double> pooled, std::span<const double> h_sem,
                    std::span<const double> h_ext, RngState &rng, bool training) const;

  std::vector<double> FuseSemantics(const Utterance &utt, std::optional<FuseResult> *fuse) const;

  FilmView Film(ExpertKind kind) const;
  HeadView Head(ExpertKind kind) const;
  const Tensor2 &Value(const std::string &name) const;

  /// Versioned JSON checkpoint including optimiser state.
  std::string ToCheckpointJson() const;
  static FusionModel FromCheckpointJson(std::string_view text);
  void Save(const std::string &path) const;
  static FusionModel Load(const std::string &path);

  /// Hex FNV-based hash of the model config.
  std::string ConfigHash() const;

 private:
  std::size_t HeadInputDim(ExpertKind kind) const;
  void AddParams();

  ModelConfig cfg_;
  ParamTape tape_;
  std::vector<double> input_mean_;
  std::vector<double> input_std_;
};

// --- Training and evaluation ------------------------------------------------

enum class LossKind { kCcc, kMse };

struct TrainOptions {
  AdamWOptions adam;
  std::size_t batch = 32;
  std::size_t grad_accum = 4;
  std::size_t epochs = 1;
  LossKind loss = LossKind::kCcc;
};

struct EpochStats {
  std::size_t epoch = 0;
  std::uint64_t steps = 0;  // optimiser steps so far
  double mean_loss = 0.0;
};

/// Forward + loss over one micro-batch; when `accumulate` is set the
/// gradient of the loss is added to the model's parameter gradients.
double BatchLoss(FusionModel &model, std::span<const Utterance *const> batch, LossKind loss,
                 RngState &rng, bool training, bool accumulate);

/// Shuffles each epoch, splits into micro-batches of `batch` (a remainder of
/// one utterance joins the previous batch), averages the gradients of up to
/// `grad_accum` micro-batches and takes one AdamW step per group. Throws
/// kTooFewUtterances with fewer than two utterances and kNumericalFailure on a
/// non-finite loss.
std::vector<EpochStats> Train(FusionModel &model, std::span<const Utterance> data,
                              const TrainOptions &opts, RngState &rng);

std::vector<Vad> Predict(const FusionModel &model, std::span<const Utterance> data);

struct EvalReport {
  Vad ccc{};
  double ccc_avg = 0.0;
  std::size_t n = 0;
};

/// CCC per dimension over the whole set. Throws kTooShort below two items.
EvalReport Evaluate(const FusionModel &model, std::span<const Utterance> data);
EvalReport EvaluatePredictions(std::span<const Vad> pred, std::span<const Vad> target);

/// {ccc_v, ccc_a, ccc_d, ccc_avg, n_utterances, config_hash}
std::string EvalReportJson(const EvalReport &report, const std::string &config_hash);

std::string LossHistoryCsv(std::span<const EpochStats> history);

}  // namespace msfser

#endif  // MSFSER_MODEL_HPP_
