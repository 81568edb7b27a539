/* flowcast: failure prediction and replay for multi-sample agent
 * trajectory logs.
 *
 * C interface of the shared library. All types are opaque handles and
 * every function reports through fc_status; fc_last_error() describes
 * the most recent failure on the calling thread. Strings returned
 * through char** out-parameters are heap-allocated and released with
 * fc_string_free().
 */
#ifndef FLOWCAST_H
#define FLOWCAST_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define FC_API __declspec(dllexport)
#else
#define FC_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum fc_status {
  FC_OK = 0,
  FC_ERROR_PARSE = 1,      /* malformed input file */
  FC_ERROR_VALIDATION = 2, /* well-formed but contract-violating data */
  FC_ERROR_CONFIG = 3,     /* bad or mismatched configuration */
  FC_ERROR_DATA = 4,       /* inputs missing pieces the operation needs */
  FC_ERROR_PARAM = 5,      /* caller violated a function contract */
  FC_ERROR_IO = 6,         /* file could not be read or written */
  FC_ERROR_INTERNAL = 7
} fc_status;

/* Message for the last failing call on this thread; never NULL. */
FC_API const char* fc_last_error(void);

FC_API const char* fc_version(void);

FC_API void fc_string_free(char* s);

/* ---- corpora (parsed trajectory logs) ---- */

typedef struct fc_corpus fc_corpus;

FC_API fc_status fc_corpus_load(const char* path, fc_corpus** out);
FC_API fc_status fc_corpus_save(const fc_corpus* corpus, const char* path);
FC_API size_t fc_corpus_size(const fc_corpus* corpus);
FC_API void fc_corpus_free(fc_corpus* corpus);

/* ---- synthetic corpus generation ---- */

typedef struct fc_synth_options {
  int tasks;
  int runs;
  int budget;
  uint64_t seed;
  double signal_strength;
  double failure_rate;
  double rescue_rate;
  const char* source_model; /* NULL for the default */
  const char* target_model; /* NULL for the default */
} fc_synth_options;

FC_API void fc_synth_options_init(fc_synth_options* options);

/* Writes a source log, optionally a paired target log, and optionally a
 * pricing file covering the generated model ids. */
FC_API fc_status fc_synth(const fc_synth_options* options, const char* source_path, const char* target_path,
                          const char* pricing_path);

/* ---- graph construction ---- */

typedef struct fc_graphset fc_graphset;

typedef struct fc_build_options {
  const char* mode;             /* "exact" or "cluster" */
  double assignment_threshold;
  double merge_threshold;
  const char* truncation_mode;  /* "none", "parallel", "sequential" */
  int truncation_k;
  int binarize_adjacency;       /* 0/1 */
  const char* variant;          /* "full", "no-semantics", "no-arguments", "no-functions" */
  int arg_dim;
  int ngram_min;
  int ngram_max;
  uint64_t hash_buckets;
  uint64_t embed_seed;
  const char* vector_file;      /* optional word2vec text file, NULL for none */
  int jobs;                     /* <= 0 means one worker per core */
} fc_build_options;

FC_API void fc_build_options_init(fc_build_options* options);

FC_API fc_status fc_graphset_build(const fc_corpus* corpus, const fc_build_options* options, fc_graphset** out);
FC_API fc_status fc_graphset_save(const fc_graphset* graphs, const char* path);
FC_API fc_status fc_graphset_load(const char* path, fc_graphset** out);
FC_API size_t fc_graphset_size(const fc_graphset* graphs);
FC_API void fc_graphset_free(fc_graphset* graphs);

/* DOT rendering of one graph; task_id NULL means the first graph. */
FC_API fc_status fc_graphset_export_dot(const fc_graphset* graphs, const char* task_id, char** out);

/* ---- reports (JSON documents with an optional table rendering) ---- */

typedef struct fc_report fc_report;

FC_API fc_status fc_report_json(const fc_report* report, char** out);
FC_API fc_status fc_report_table(const fc_report* report, char** out);
FC_API fc_status fc_report_save(const fc_report* report, const char* path);
FC_API void fc_report_free(fc_report* report);

/* ---- training and evaluation ---- */

typedef struct fc_model fc_model;

typedef struct fc_train_options {
  double learning_rate;
  int batch_size;
  int hidden_dim;
  double dropout_rate;
  int epochs;
  int folds;
  uint64_t seed;
  int criterion_n;        /* label criterion: top-n vote / at-least-n plausible */
  double positive_weight; /* loss weight on the failure class, default 1.0 */
} fc_train_options;

FC_API void fc_train_options_init(fc_train_options* options);

/* Cross-validates on the graph set; returns the best-validation
 * checkpoint and a fold report. Either out-parameter may be NULL. */
FC_API fc_status fc_train(const fc_graphset* graphs, const fc_train_options* options, fc_model** model_out,
                          fc_report** report_out);

FC_API fc_status fc_model_save(const fc_model* model, const char* path);
FC_API fc_status fc_model_load(const char* path, fc_model** out);
FC_API void fc_model_free(fc_model* model);

/* Scores a graph set with a trained model. The graphs' pipeline must
 * fingerprint-match the model's. */
FC_API fc_status fc_evaluate(const fc_model* model, const fc_graphset* graphs, int criterion_n, double threshold,
                             fc_report** out);

/* ---- baselines ---- */

FC_API fc_status fc_baseline_majority(const fc_corpus* corpus, int criterion_n, fc_report** out);
FC_API fc_status fc_baseline_confidence(const fc_corpus* corpus, int criterion_n, uint64_t seed, fc_report** out);

/* ---- pricing ---- */

typedef struct fc_pricing fc_pricing;

FC_API fc_status fc_pricing_load(const char* path, fc_pricing** out);
FC_API fc_status fc_pricing_uniform(fc_pricing** out);
FC_API void fc_pricing_free(fc_pricing* pricing);

/* ---- replay simulations ---- */

/* mode: "sequential" or "parallel". `continuations` may be NULL; for
 * parallel replays that substitutes full target runs and flags the
 * report approximate. The model must have been trained at the same
 * truncation mode and k. */
FC_API fc_status fc_simulate_hotswap(const fc_corpus* source, const fc_corpus* target,
                                     const fc_corpus* continuations, const fc_model* model,
                                     const fc_pricing* pricing, const char* mode, int k, double threshold,
                                     int criterion_n, fc_report** out);

FC_API fc_status fc_simulate_early_termination(const fc_corpus* corpus, const fc_model* model,
                                               const fc_pricing* pricing, double threshold, int criterion_n,
                                               fc_report** out);

/* ---- threshold/k sweeps ---- */

typedef struct fc_sweep_options {
  const char* truncation_mode; /* "parallel" or "sequential" */
  int k_min;
  int k_max;
  const char* thresholds;      /* comma-separated, NULL for 0.1..0.9 */
  int criterion_n;
  fc_build_options build;      /* pipeline for the per-k retraining */
  fc_train_options train;
} fc_sweep_options;

FC_API void fc_sweep_options_init(fc_sweep_options* options);

/* Cost/retention trade-off grid as CSV. With `model` non-NULL the sweep
 * scores every task with that fixed model (k fixed by the model);
 * otherwise it cross-validates per k and replays the held-out halves. */
FC_API fc_status fc_sweep(const fc_corpus* corpus, const fc_sweep_options* options, const fc_model* model,
                          const fc_pricing* pricing, char** csv_out);

#ifdef __cplusplus
}
#endif

#endif /* FLOWCAST_H */
