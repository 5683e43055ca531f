/* msfser/msfser.h */

/*
 * Copyright 2026 The msfser Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *  http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef MSFSER_MSFSER_H_
#define MSFSER_MSFSER_H_

/*
 * C interface. Objects are opaque handles released with their *_free
 * function; strings returned through char** are heap copies released with
 * msfser_string_free. Every call returns a status; on failure the message is
 * available from msfser_last_error() on the same thread.
 */

#include <stddef.h>
#include <stdint.h>

#if defined(MSFSER_BUILDING_LIBRARY)
#define MSFSER_API __attribute__((visibility("default")))
#else
#define MSFSER_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum msfser_status {
  MSFSER_OK = 0,
  MSFSER_ERR_INVALID_ARGUMENT = 1,
  MSFSER_ERR_IO = 2,
  MSFSER_ERR_MALFORMED_HEADER = 3,
  MSFSER_ERR_MALFORMED_BODY = 4,
  MSFSER_ERR_TRUNCATED_FILE = 5,
  MSFSER_ERR_NON_MONOTONE_INTERVALS = 6,
  MSFSER_ERR_UNKNOWN_TIER = 7,
  MSFSER_ERR_UNSUPPORTED_AUDIO = 8,
  MSFSER_ERR_SIGNAL_TOO_SHORT = 9,
  MSFSER_ERR_MALFORMED_RECORD = 10,
  MSFSER_ERR_DIM_MISMATCH = 11,
  MSFSER_ERR_DUPLICATE_KEY = 12,
  MSFSER_ERR_MISSING_KEY = 13,
  MSFSER_ERR_SHAPE_MISMATCH = 14,
  MSFSER_ERR_EMPTY_INPUT = 15,
  MSFSER_ERR_LENGTH_MISMATCH = 16,
  MSFSER_ERR_TOO_SHORT = 17,
  MSFSER_ERR_MISSING_SEMANTICS = 18,
  MSFSER_ERR_TOO_FEW_UTTERANCES = 19,
  MSFSER_ERR_NUMERICAL_FAILURE = 20,
  MSFSER_ERR_MALFORMED_CHECKPOINT = 21,
  MSFSER_ERR_INTERNAL = 99
} msfser_status;

typedef struct msfser_config msfser_config;
typedef struct msfser_textgrid msfser_textgrid;
typedef struct msfser_audio msfser_audio;
typedef struct msfser_lemf msfser_lemf;
typedef struct msfser_dataset msfser_dataset;
typedef struct msfser_model msfser_model;

MSFSER_API const char *msfser_version(void);
/* Message of the last failed call on this thread; "" when none. */
MSFSER_API const char *msfser_last_error(void);
MSFSER_API const char *msfser_status_name(msfser_status status);
/* 3 for MSFSER_ERR_NUMERICAL_FAILURE, 0 for MSFSER_OK, else 2. */
MSFSER_API int msfser_exit_code(msfser_status status);
MSFSER_API void msfser_string_free(char *s);

/* --- Run configuration ---------------------------------------------------- */

/* Defaults; when MSFSER_SEED is set in the environment it becomes the seed. */
MSFSER_API msfser_status msfser_config_create(msfser_config **out);
MSFSER_API void msfser_config_free(msfser_config *cfg);
MSFSER_API msfser_status msfser_config_set(msfser_config *cfg, const char *key, const char *value);
MSFSER_API msfser_status msfser_config_merge_json(msfser_config *cfg, const char *json);
MSFSER_API msfser_status msfser_config_merge_file(msfser_config *cfg, const char *path);
MSFSER_API msfser_status msfser_config_validate(const msfser_config *cfg);
MSFSER_API msfser_status msfser_config_to_json(const msfser_config *cfg, char **out);
/* Newline-separated list of every key. */
MSFSER_API msfser_status msfser_config_keys(char **out);

/* --- TextGrid --------------------------------------------------------------- */

MSFSER_API msfser_status msfser_textgrid_parse(const char *text, size_t len, msfser_textgrid **out);
MSFSER_API msfser_status msfser_textgrid_read(const char *path, msfser_textgrid **out);
MSFSER_API void msfser_textgrid_free(msfser_textgrid *tg);
MSFSER_API msfser_status msfser_textgrid_serialize(const msfser_textgrid *tg, char **out);
/* JSON summary: bounds, tiers with kind, bounds and item counts. */
MSFSER_API msfser_status msfser_textgrid_report(const msfser_textgrid *tg, char **out);

/* --- Audio ------------------------------------------------------------------ */

MSFSER_API msfser_status msfser_audio_read(const char *path, msfser_audio **out);
MSFSER_API void msfser_audio_free(msfser_audio *audio);
MSFSER_API int msfser_audio_sample_rate(const msfser_audio *audio);
MSFSER_API size_t msfser_audio_length(const msfser_audio *audio);

/* --- Emphasis detection ----------------------------------------------------- */

MSFSER_API msfser_status msfser_lemf_run(const msfser_config *cfg, const msfser_audio *audio,
                                         const msfser_textgrid *tg, msfser_lemf **out);
MSFSER_API void msfser_lemf_free(msfser_lemf *res);
MSFSER_API msfser_status msfser_lemf_json(const msfser_lemf *res, const char *utt_id, char **out);
MSFSER_API msfser_status msfser_lemf_words_csv(const msfser_lemf *res, char **out);
/* time_s,log_f0 over voiced frames. */
MSFSER_API msfser_status msfser_lemf_f0_csv(const msfser_lemf *res, char **out);
/* time_s,energy over all frames. */
MSFSER_API msfser_status msfser_lemf_energy_csv(const msfser_lemf *res, char **out);
MSFSER_API msfser_status msfser_lemf_svg(const msfser_lemf *res, const char *title, char **out);
/* Words of the emphasis segment joined by spaces. */
MSFSER_API msfser_status msfser_lemf_segment_text(const msfser_lemf *res, char **out);

/* Any field may be NULL or empty; empty fields drop their clause. */
MSFSER_API msfser_status msfser_extended_description(const char *free_label,
                                                     const char *constrained_label,
                                                     const char *explanation, const char *scenario,
                                                     const char *paralinguistics,
                                                     const char *gender, char **out);

/* --- Embeddings ------------------------------------------------------------- */

/* Writes `dim` values into `out`. */
MSFSER_API msfser_status msfser_toy_embed(const char *text, size_t dim, uint64_t seed, double *out);
/* Reads "id<TAB>text" lines and writes one JSON-lines record per line for
 * `channel` ("les", "gs" or "es") using embed_dim and embed_seed from cfg. */
MSFSER_API msfser_status msfser_embed_lines(const msfser_config *cfg, const char *tsv,
                                            const char *channel, char **out_jsonl);

/* --- Synthetic corpus ------------------------------------------------------- */

MSFSER_API msfser_status msfser_synth(const msfser_config *cfg, const char *out_dir);

/* --- Datasets and the model ------------------------------------------------- */

/* split: "train", "test" or "all". */
MSFSER_API msfser_status msfser_dataset_load(const msfser_config *cfg, const char *dir,
                                             const char *split, msfser_dataset **out);
MSFSER_API void msfser_dataset_free(msfser_dataset *ds);
MSFSER_API size_t msfser_dataset_size(const msfser_dataset *ds);

/* Fresh model from the config; input normalisation is fitted on `fit_on`
 * when it is not NULL. */
MSFSER_API msfser_status msfser_model_create(const msfser_config *cfg, const msfser_dataset *fit_on,
                                             msfser_model **out);
MSFSER_API msfser_status msfser_model_load(const char *path, msfser_model **out);
MSFSER_API msfser_status msfser_model_save(const msfser_model *model, const char *path);
MSFSER_API void msfser_model_free(msfser_model *model);
MSFSER_API size_t msfser_model_parameter_count(const msfser_model *model);
/* Trains with the optimiser settings of cfg; the loss history CSV goes to
 * *loss_csv when loss_csv is not NULL. */
MSFSER_API msfser_status msfser_model_train(msfser_model *model, const msfser_config *cfg,
                                            const msfser_dataset *ds, char **loss_csv);
/* {ccc_v, ccc_a, ccc_d, ccc_avg, n_utterances, config_hash} */
MSFSER_API msfser_status msfser_model_evaluate(const msfser_model *model, const msfser_dataset *ds,
                                               char **report_json);
/* CCC values without JSON; out holds v, a, d, avg. */
MSFSER_API msfser_status msfser_model_evaluate_values(const msfser_model *model,
                                                      const msfser_dataset *ds, double out[4]);

#ifdef __cplusplus
}  /* extern "C" */
#endif

#endif  /* MSFSER_MSFSER_H_ */
