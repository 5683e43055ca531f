// src/capi.cpp

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

#include "msfser/msfser.h"

#include <algorithm>
#include <cstdlib>
#include <cstring>
#include <memory>
#include <new>
#include <sstream>
#include <string>

#include "json.hpp"
#include "msfser/config.hpp"
#include "msfser/dataset.hpp"
#include "msfser/embeddings.hpp"
#include "msfser/error.hpp"
#include "msfser/lemf.hpp"
#include "msfser/model.hpp"
#include "msfser/plot.hpp"
#include "msfser/synth.hpp"
#include "msfser/textgrid.hpp"
#include "msfser/wav.hpp"

struct msfser_config {
  msfser::RunConfig cfg;
};
struct msfser_textgrid {
  msfser::TextGrid tg;
};
struct msfser_audio {
  msfser::AudioBuffer audio;
};
struct msfser_lemf {
  msfser::LemfResult result;
};
struct msfser_dataset {
  std::vector<msfser::Utterance> utts;
};
struct msfser_model {
  msfser::FusionModel model;
};

namespace {

thread_local std::string g_last_error;

msfser_status ToStatus(msfser::ErrorCode code) {
  return static_cast<msfser_status>(static_cast<int>(code) + 1);
}

template <typename F>
msfser_status Guard(F &&body) {
  try {
    body();
    g_last_error.clear();
    return MSFSER_OK;
  } catch (const msfser::Error &e) {
    g_last_error = e.what();
    return ToStatus(e.code());
  } catch (const nlohmann::json::exception &e) {
    g_last_error = std::string("InvalidArgument: ") + e.what();
    return MSFSER_ERR_INVALID_ARGUMENT;
  } catch (const std::bad_alloc &) {
    g_last_error = "Internal: out of memory";
    return MSFSER_ERR_INTERNAL;
  } catch (const std::exception &e) {
    g_last_error = std::string("Internal: ") + e.what();
    return MSFSER_ERR_INTERNAL;
  } catch (...) {
    g_last_error = "Internal: unknown exception";
    return MSFSER_ERR_INTERNAL;
  }
}

void Require(const void *p, const char *what) {
  if (p == nullptr) msfser::Fail(msfser::ErrorCode::kInvalidArgument, std::string(what) + " is NULL");
}

char *Copy(const std::string &s) {
  char *out = static_cast<char *>(std::malloc(s.size() + 1));
  if (out == nullptr) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

void Emit(char **out, const std::string &s) {
  Require(out, "output pointer");
  *out = Copy(s);
}

std::string Str(const char *s) { return s == nullptr ? std::string() : std::string(s); }

}  // namespace

extern "C" {

const char *msfser_version(void) { return "1.0.0"; }

const char *msfser_last_error(void) { return g_last_error.c_str(); }

const char *msfser_status_name(msfser_status status) {
  if (status == MSFSER_OK) return "Ok";
  if (status == MSFSER_ERR_INTERNAL) return "Internal";
  const int code = static_cast<int>(status) - 1;
  if (code < 0 || code > static_cast<int>(msfser::ErrorCode::kMalformedCheckpoint)) return "Unknown";
  return msfser::ErrorCodeName(static_cast<msfser::ErrorCode>(code));
}

int msfser_exit_code(msfser_status status) {
  if (status == MSFSER_OK) return 0;
  return status == MSFSER_ERR_NUMERICAL_FAILURE ? 3 : 2;
}

void msfser_string_free(char *s) { std::free(s); }

// --- Config -----------------------------------------------------------------

msfser_status msfser_config_create(msfser_config **out) {
  return Guard([&] {
    Require(out, "output pointer");
    auto cfg = std::make_unique<msfser_config>();
    if (const char *seed = std::getenv("MSFSER_SEED"); seed != nullptr && *seed != '\0')
      cfg->cfg.Set("seed", seed);
    *out = cfg.release();
  });
}

void msfser_config_free(msfser_config *cfg) { delete cfg; }

msfser_status msfser_config_set(msfser_config *cfg, const char *key, const char *value) {
  return Guard([&] {
    Require(cfg, "config");
    Require(key, "key");
    Require(value, "value");
    cfg->cfg.Set(key, value);
  });
}

msfser_status msfser_config_merge_json(msfser_config *cfg, const char *json) {
  return Guard([&] {
    Require(cfg, "config");
    Require(json, "json");
    cfg->cfg.MergeJson(json);
  });
}

msfser_status msfser_config_merge_file(msfser_config *cfg, const char *path) {
  return Guard([&] {
    Require(cfg, "config");
    Require(path, "path");
    cfg->cfg.MergeFile(path);
  });
}

msfser_status msfser_config_validate(const msfser_config *cfg) {
  return Guard([&] {
    Require(cfg, "config");
    cfg->cfg.Validate();
  });
}

msfser_status msfser_config_to_json(const msfser_config *cfg, char **out) {
  return Guard([&] {
    Require(cfg, "config");
    Emit(out, cfg->cfg.ToJson());
  });
}

msfser_status msfser_config_keys(char **out) {
  return Guard([&] {
    std::string s;
    for (const std::string &k : msfser::RunConfig::Keys()) s += k + "\n";
    Emit(out, s);
  });
}

// --- TextGrid ---------------------------------------------------------------

msfser_status msfser_textgrid_parse(const char *text, size_t len, msfser_textgrid **out) {
  return Guard([&] {
    Require(text, "text");
    Require(out, "output pointer");
    auto tg = std::make_unique<msfser_textgrid>();
    tg->tg = msfser::ParseTextGrid(std::string_view(text, len));
    *out = tg.release();
  });
}

msfser_status msfser_textgrid_read(const char *path, msfser_textgrid **out) {
  return Guard([&] {
    Require(path, "path");
    Require(out, "output pointer");
    auto tg = std::make_unique<msfser_textgrid>();
    tg->tg = msfser::ReadTextGridFile(path);
    *out = tg.release();
  });
}

void msfser_textgrid_free(msfser_textgrid *tg) { delete tg; }

msfser_status msfser_textgrid_serialize(const msfser_textgrid *tg, char **out) {
  return Guard([&] {
    Require(tg, "textgrid");
    Emit(out, msfser::SerializeTextGrid(tg->tg));
  });
}

msfser_status msfser_textgrid_report(const msfser_textgrid *tg, char **out) {
  return Guard([&] {
    Require(tg, "textgrid");
    msfser::ValidateTextGrid(tg->tg);
    nlohmann::ordered_json j;
    j["valid"] = true;
    j["xmin"] = tg->tg.xmin;
    j["xmax"] = tg->tg.xmax;
    j["tiers"] = nlohmann::ordered_json::array();
    for (const msfser::Tier &t : tg->tg.tiers) {
      nlohmann::ordered_json tj;
      tj["name"] = t.name;
      const bool interval = t.kind == msfser::TierKind::kInterval;
      tj["kind"] = interval ? "IntervalTier" : "TextTier";
      tj["xmin"] = t.xmin;
      tj["xmax"] = t.xmax;
      tj["items"] = interval ? t.intervals.size() : t.points.size();
      j["tiers"].push_back(std::move(tj));
    }
    Emit(out, j.dump(2) + "\n");
  });
}

// --- Audio ------------------------------------------------------------------

msfser_status msfser_audio_read(const char *path, msfser_audio **out) {
  return Guard([&] {
    Require(path, "path");
    Require(out, "output pointer");
    auto a = std::make_unique<msfser_audio>();
    a->audio = msfser::ReadWav(path);
    *out = a.release();
  });
}

void msfser_audio_free(msfser_audio *audio) { delete audio; }

int msfser_audio_sample_rate(const msfser_audio *audio) {
  return audio == nullptr ? 0 : audio->audio.sample_rate;
}

size_t msfser_audio_length(const msfser_audio *audio) {
  return audio == nullptr ? 0 : audio->audio.samples.size();
}

// --- Emphasis ---------------------------------------------------------------

msfser_status msfser_lemf_run(const msfser_config *cfg, const msfser_audio *audio,
                              const msfser_textgrid *tg, msfser_lemf **out) {
  return Guard([&] {
    Require(cfg, "config");
    Require(audio, "audio");
    Require(tg, "textgrid");
    Require(out, "output pointer");
    auto r = std::make_unique<msfser_lemf>();
    r->result = msfser::RunLemf(audio->audio, tg->tg, msfser::ToLemfConfig(cfg->cfg));
    *out = r.release();
  });
}

void msfser_lemf_free(msfser_lemf *res) { delete res; }

msfser_status msfser_lemf_json(const msfser_lemf *res, const char *utt_id, char **out) {
  return Guard([&] {
    Require(res, "result");
    Emit(out, msfser::LemfToJson(Str(utt_id), res->result));
  });
}

msfser_status msfser_lemf_words_csv(const msfser_lemf *res, char **out) {
  return Guard([&] {
    Require(res, "result");
    Emit(out, msfser::WordProsodyCsv(res->result));
  });
}

msfser_status msfser_lemf_f0_csv(const msfser_lemf *res, char **out) {
  return Guard([&] {
    Require(res, "result");
    Emit(out, msfser::F0PlotCsv(res->result.track));
  });
}

msfser_status msfser_lemf_energy_csv(const msfser_lemf *res, char **out) {
  return Guard([&] {
    Require(res, "result");
    Emit(out, msfser::EnergyPlotCsv(res->result.track));
  });
}

msfser_status msfser_lemf_svg(const msfser_lemf *res, const char *title, char **out) {
  return Guard([&] {
    Require(res, "result");
    Emit(out, msfser::RenderEmphasisSvg(res->result, Str(title)));
  });
}

msfser_status msfser_lemf_segment_text(const msfser_lemf *res, char **out) {
  return Guard([&] {
    Require(res, "result");
    Emit(out, res->result.segment.Text());
  });
}

msfser_status msfser_extended_description(const char *free_label, const char *constrained_label,
                                          const char *explanation, const char *scenario,
                                          const char *paralinguistics, const char *gender,
                                          char **out) {
  return Guard([&] {
    msfser::ExtendedInfo info;
    info.free_label = Str(free_label);
    info.constrained_label = Str(constrained_label);
    info.explanation = Str(explanation);
    info.scenario = Str(scenario);
    info.paralinguistics = Str(paralinguistics);
    info.gender = Str(gender);
    Emit(out, msfser::AssembleExtendedDescription(info));
  });
}

// --- Embeddings -------------------------------------------------------------

msfser_status msfser_toy_embed(const char *text, size_t dim, uint64_t seed, double *out) {
  return Guard([&] {
    Require(text, "text");
    Require(out, "output buffer");
    msfser::SemanticVec v = msfser::ToyEmbedText(text, dim, seed);
    std::copy(v.values.begin(), v.values.end(), out);
  });
}

msfser_status msfser_embed_lines(const msfser_config *cfg, const char *tsv, const char *channel,
                                 char **out_jsonl) {
  return Guard([&] {
    Require(cfg, "config");
    Require(tsv, "input");
    Require(channel, "channel");
    const msfser::Channel ch = msfser::ParseChannel(channel);
    std::istringstream in{std::string(tsv)};
    std::string line, result;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty()) continue;
      const std::size_t tab = line.find('\t');
      if (tab == std::string::npos || tab == 0)
        msfser::Fail(msfser::ErrorCode::kMalformedRecord,
                     "line " + std::to_string(line_no) + ": expected id<TAB>text");
      msfser::SemanticVec v = msfser::ToyEmbedText(line.substr(tab + 1), cfg->cfg.embed_dim,
                                                   cfg->cfg.embed_seed);
      result += msfser::EmbeddingRecord(line.substr(0, tab), ch, v);
    }
    Emit(out_jsonl, result);
  });
}

// --- Synthetic corpus -------------------------------------------------------

msfser_status msfser_synth(const msfser_config *cfg, const char *out_dir) {
  return Guard([&] {
    Require(cfg, "config");
    Require(out_dir, "output directory");
    cfg->cfg.Validate();
    msfser::GenerateSynthetic(msfser::ToSyntheticSpec(cfg->cfg), out_dir,
                              msfser::ToLemfConfig(cfg->cfg), msfser::EffectiveThreads(cfg->cfg));
  });
}

// --- Dataset and model ------------------------------------------------------

msfser_status msfser_dataset_load(const msfser_config *cfg, const char *dir, const char *split,
                                  msfser_dataset **out) {
  return Guard([&] {
    Require(cfg, "config");
    Require(dir, "directory");
    Require(out, "output pointer");
    auto ds = std::make_unique<msfser_dataset>();
    ds->utts = msfser::LoadDataset(dir, msfser::ToDatasetOptions(cfg->cfg, split ? split : "all"));
    *out = ds.release();
  });
}

void msfser_dataset_free(msfser_dataset *ds) { delete ds; }

size_t msfser_dataset_size(const msfser_dataset *ds) { return ds == nullptr ? 0 : ds->utts.size(); }

msfser_status msfser_model_create(const msfser_config *cfg, const msfser_dataset *fit_on,
                                  msfser_model **out) {
  return Guard([&] {
    Require(cfg, "config");
    Require(out, "output pointer");
    cfg->cfg.Validate();
    auto m = std::unique_ptr<msfser_model>(
        new msfser_model{msfser::FusionModel(msfser::ToModelConfig(cfg->cfg))});
    if (fit_on != nullptr) m->model.FitInputNormalization(fit_on->utts);
    *out = m.release();
  });
}

msfser_status msfser_model_load(const char *path, msfser_model **out) {
  return Guard([&] {
    Require(path, "path");
    Require(out, "output pointer");
    *out = new msfser_model{msfser::FusionModel::Load(path)};
  });
}

msfser_status msfser_model_save(const msfser_model *model, const char *path) {
  return Guard([&] {
    Require(model, "model");
    Require(path, "path");
    model->model.Save(path);
  });
}

void msfser_model_free(msfser_model *model) { delete model; }

size_t msfser_model_parameter_count(const msfser_model *model) {
  return model == nullptr ? 0 : model->model.params().ParameterCount();
}

msfser_status msfser_model_train(msfser_model *model, const msfser_config *cfg,
                                 const msfser_dataset *ds, char **loss_csv) {
  return Guard([&] {
    Require(model, "model");
    Require(cfg, "config");
    Require(ds, "dataset");
    cfg->cfg.Validate();
    msfser::RngState rng(msfser::StableHash("train", cfg->cfg.seed));
    std::vector<msfser::EpochStats> history =
        msfser::Train(model->model, ds->utts, msfser::ToTrainOptions(cfg->cfg), rng);
    if (loss_csv != nullptr) *loss_csv = Copy(msfser::LossHistoryCsv(history));
  });
}

msfser_status msfser_model_evaluate(const msfser_model *model, const msfser_dataset *ds,
                                    char **report_json) {
  return Guard([&] {
    Require(model, "model");
    Require(ds, "dataset");
    msfser::EvalReport r = msfser::Evaluate(model->model, ds->utts);
    Emit(report_json, msfser::EvalReportJson(r, model->model.ConfigHash()));
  });
}

msfser_status msfser_model_evaluate_values(const msfser_model *model, const msfser_dataset *ds,
                                           double out[4]) {
  return Guard([&] {
    Require(model, "model");
    Require(ds, "dataset");
    Require(out, "output buffer");
    msfser::EvalReport r = msfser::Evaluate(model->model, ds->utts);
    out[0] = r.ccc[0];
    out[1] = r.ccc[1];
    out[2] = r.ccc[2];
    out[3] = r.ccc_avg;
  });
}

}  // extern "C"
