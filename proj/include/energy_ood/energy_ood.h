/*
 * SPDX-License-Identifier: Apache-2.0
 *
 * C interface to the energy-based out-of-distribution detection library.
 *
 * Conventions:
 *  - Every function that can fail returns an eood_status. On failure the
 *    message is available from eood_last_error() on the same thread until the
 *    next failing call.
 *  - Opaque handles (eood_mlp, eood_gda, eood_table) are created by the
 *    library and released with the matching *_destroy function. Destroying
 *    NULL is a no-op.
 *  - Strings and arrays returned through `char**` / `double**` are allocated by
 *    the library and released with eood_free.
 *  - Score axes are "higher = more in-distribution" except eood_energy_score.
 */
#ifndef ENERGY_OOD_H
#define ENERGY_OOD_H

#include <stddef.h>
#include <stdint.h>

#if defined(EOOD_BUILDING_LIBRARY)
#define EOOD_API __attribute__((visibility("default")))
#else
#define EOOD_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum eood_status {
  EOOD_OK = 0,
  EOOD_ERR_INVALID_ARGUMENT = 1,
  EOOD_ERR_OUT_OF_RANGE = 2,
  EOOD_ERR_PARSE = 3,
  EOOD_ERR_IO = 4,
  EOOD_ERR_NUMERICAL = 5,
  EOOD_ERR_INTERNAL = 6
} eood_status;

typedef enum eood_score_kind {
  EOOD_SCORE_NEG_ENERGY = 0,
  EOOD_SCORE_MSP = 1,
  EOOD_SCORE_NEG_ENERGY_GDA = 2,
  EOOD_SCORE_MAHALANOBIS = 3
} eood_score_kind;

typedef enum eood_split { EOOD_SPLIT_IN = 0, EOOD_SPLIT_OUT = 1 } eood_split;

typedef enum eood_table_format { EOOD_FORMAT_CSV = 0, EOOD_FORMAT_RAW64 = 1 } eood_table_format;

#define EOOD_NO_LABEL (-1)

EOOD_API const char* eood_version(void);
EOOD_API const char* eood_last_error(void);
EOOD_API const char* eood_status_name(eood_status status);
EOOD_API void eood_free(void* ptr);

/* Caps internal parallelism; 0 = hardware concurrency. */
EOOD_API void eood_set_num_threads(unsigned n);

EOOD_API eood_status eood_score_kind_parse(const char* name, eood_score_kind* out);
EOOD_API const char* eood_score_kind_name(eood_score_kind kind);

/* ---- Scores over a single logit vector of length k ------------------- */

EOOD_API eood_status eood_energy_score(const double* logits, size_t k, double temp, double* out);
EOOD_API eood_status eood_neg_energy_score(const double* logits, size_t k, double temp, double* out);
EOOD_API eood_status eood_label_energy(const double* logits, size_t k, size_t label, double* out);
EOOD_API eood_status eood_softmax(const double* logits, size_t k, double temp, double* out_probs);
EOOD_API eood_status eood_msp_score(const double* logits, size_t k, double* out);

/* Row-major rows x k logits; kind is NEG_ENERGY or MSP. out has `rows` slots. */
EOOD_API eood_status eood_score_logits(const double* logits, size_t rows, size_t k, eood_score_kind kind,
                                       double temp, double* out);
EOOD_API eood_status eood_energy_logits(const double* logits, size_t rows, size_t k, double temp, double* out);

/* ---- Detector -------------------------------------------------------- */

typedef struct eood_detector {
  double tau; /* -INFINITY accepts everything */
  double target_tpr;
  eood_score_kind score_kind;
} eood_detector;

EOOD_API eood_status eood_calibrate(const double* in_scores, size_t n, double target_tpr,
                                    eood_score_kind kind, eood_detector* out);
/* Fraction of scores strictly above tau. */
EOOD_API eood_status eood_pass_rate(const double* scores, size_t n, double tau, double* out);
/* *label = 1 (in-distribution) iff score > tau. */
EOOD_API eood_status eood_classify(double score, const eood_detector* det, int* label);
/* *predicted = argmax class, or -1 when rejected as OOD. */
EOOD_API eood_status eood_filter_and_predict(const double* logits, size_t k, const eood_detector* det,
                                             double temp, int64_t* predicted);
EOOD_API eood_status eood_detector_to_json(const eood_detector* det, char** json);
EOOD_API eood_status eood_detector_from_json(const char* json, eood_detector* out);

/* ---- Metrics --------------------------------------------------------- */

typedef struct eood_report {
  double fpr_at_tpr;
  double auroc;
  double aupr;
  size_t n_in;
  size_t n_out;
  double tpr_target;
  int has_aupr_out;
  double aupr_out; /* OOD-positive AUPR, valid when has_aupr_out */
} eood_report;

EOOD_API eood_status eood_fpr_at_tpr(const double* in_scores, size_t n_in, const double* out_scores,
                                     size_t n_out, double q, double* out);
EOOD_API eood_status eood_auroc(const double* in_scores, size_t n_in, const double* out_scores, size_t n_out,
                                double* out);
EOOD_API eood_status eood_aupr(const double* in_scores, size_t n_in, const double* out_scores, size_t n_out,
                               double* out);
EOOD_API eood_status eood_full_report(const double* in_scores, size_t n_in, const double* out_scores,
                                      size_t n_out, double q, int both_orientations, eood_report* out);
EOOD_API eood_status eood_report_to_json(const eood_report* report, char** json);

/* ---- Score files: CSV "row,<column>,..." ----------------------------- */

EOOD_API eood_status eood_scores_save(const char* path, const double* scores, size_t n);
/* column NULL means "score". */
EOOD_API eood_status eood_scores_load(const char* path, const char* column, double** scores, size_t* n);

/* ---- Tables and benchmark generation --------------------------------- */

typedef struct eood_table eood_table;

EOOD_API eood_status eood_table_load(const char* path, eood_table_format format, eood_table** out);
EOOD_API eood_status eood_table_save(const eood_table* table, const char* path, eood_table_format format);
EOOD_API void eood_table_destroy(eood_table* table);
EOOD_API size_t eood_table_dim(const eood_table* table);
EOOD_API size_t eood_table_rows(const eood_table* table);
/* Number of rows in one split. */
EOOD_API size_t eood_table_split_rows(const eood_table* table, eood_split split);
/* Copies rows (in file order) of one split into caller buffers; values needs
   split_rows * dim slots, labels (optional) split_rows slots. */
EOOD_API eood_status eood_table_copy_split(const eood_table* table, eood_split split, double* values,
                                           int32_t* labels);
/* Copies every row; splits (optional) receives eood_split values. */
EOOD_API eood_status eood_table_copy_all(const eood_table* table, double* values, int32_t* labels,
                                         int32_t* splits);
/* Builds a table from explicit rows (all arrays have `rows` entries). */
EOOD_API eood_status eood_table_create(size_t rows, size_t dim, const double* values, const int32_t* labels,
                                       const int32_t* splits, eood_table** out);
/* Replaces every label (rows entries). */
EOOD_API eood_status eood_table_set_labels(eood_table* table, const int32_t* labels, size_t rows);

/* Benchmark specs travel as JSON text; missing keys take defaults. */
EOOD_API eood_status eood_bench_default_spec(char** json);
/* Generates train (in + out rows) and test tables and the canonical spec /
   manifest JSON. Any output pointer may be NULL. */
EOOD_API eood_status eood_bench_generate(const char* spec_json, eood_table** train, eood_table** test,
                                         char** manifest_json);

/* ---- MLP classifier -------------------------------------------------- */

typedef struct eood_mlp eood_mlp;

typedef struct eood_train_config {
  double lambda;
  double m_in;
  double m_out;
  double lr0;
  size_t epochs;
  size_t batch_in;
  size_t batch_out;
  uint64_t seed;
  double temp;
} eood_train_config;

typedef struct eood_train_log_row {
  size_t epoch;
  size_t step;
  double lr;
  double nll;
  double energy_reg;
  double total;
} eood_train_log_row;

typedef void (*eood_train_log_fn)(const eood_train_log_row* row, void* user);

/* A labeled (labels != NULL) or unlabeled batch of row-major inputs. */
typedef struct eood_batch {
  const double* inputs;
  const int32_t* labels;
  size_t rows;
  size_t dim;
} eood_batch;

typedef enum eood_loss_kind {
  EOOD_LOSS_NLL = 0,
  EOOD_LOSS_ENERGY_REG = 1,
  EOOD_LOSS_TOTAL = 2,
  EOOD_LOSS_OE = 3
} eood_loss_kind;

EOOD_API void eood_train_config_default(eood_train_config* cfg);
/* Missing keys keep the values already in *cfg. */
EOOD_API eood_status eood_train_config_from_json(const char* json, eood_train_config* cfg);
EOOD_API eood_status eood_train_config_to_json(const eood_train_config* cfg, char** json);

EOOD_API eood_status eood_mlp_create(const size_t* layer_sizes, size_t n_layers, uint64_t seed, eood_mlp** out);
EOOD_API eood_status eood_mlp_clone(const eood_mlp* model, eood_mlp** out);
EOOD_API void eood_mlp_destroy(eood_mlp* model);
EOOD_API size_t eood_mlp_num_inputs(const eood_mlp* model);
EOOD_API size_t eood_mlp_num_classes(const eood_mlp* model);
EOOD_API size_t eood_mlp_num_params(const eood_mlp* model);
EOOD_API eood_status eood_mlp_get_params(const eood_mlp* model, double* out, size_t n);
EOOD_API eood_status eood_mlp_set_params(eood_mlp* model, const double* params, size_t n);

EOOD_API eood_status eood_mlp_forward(const eood_mlp* model, const double* x, size_t dim, double* logits,
                                      size_t k);
/* rows x dim in, rows x K logits out. */
EOOD_API eood_status eood_mlp_forward_batch(const eood_mlp* model, const double* x, size_t rows, size_t dim,
                                            double* logits);
/* Fraction of labeled rows whose argmax logit equals the label. */
EOOD_API eood_status eood_mlp_accuracy(const eood_mlp* model, const eood_batch* batch, double* out);

/* Loss value and (when grad != NULL, grad_len == num_params) its gradient.
   NLL uses `in` and cfg->temp; ENERGY_REG uses in/out and the margins;
   TOTAL uses everything; OE uses `out` and cfg->temp. */
EOOD_API eood_status eood_mlp_loss(const eood_mlp* model, eood_loss_kind kind, const eood_batch* in,
                                   const eood_batch* out, const eood_train_config* cfg, double* loss,
                                   double* grad, size_t grad_len);

/* Train in place. log may be NULL. */
EOOD_API eood_status eood_mlp_pretrain(eood_mlp* model, const eood_batch* in, const eood_train_config* cfg,
                                       eood_train_log_fn log, void* user);
EOOD_API eood_status eood_mlp_finetune(eood_mlp* model, const eood_batch* in, const eood_batch* out,
                                       const eood_train_config* cfg, eood_train_log_fn log, void* user);

/* Mean and population standard deviation of E(x) at T = 1 over a batch. */
EOOD_API eood_status eood_mlp_energy_stats(const eood_mlp* model, const eood_batch* batch, double* mean,
                                           double* stddev);
/* m_in = mean E_in - std, m_out = mean E_out + std; both collapse to their
   midpoint when that would give m_in > m_out. */
EOOD_API eood_status eood_mlp_auto_margins(const eood_mlp* model, const eood_batch* in, const eood_batch* out,
                                           double* m_in, double* m_out);
EOOD_API eood_status eood_cosine_lr(size_t step, size_t total_steps, double lr0, double* out);

/* Checkpoints. cfg may be NULL on save; *has_cfg reports whether one was stored. */
EOOD_API eood_status eood_mlp_save(const eood_mlp* model, const char* path, const eood_train_config* cfg);
EOOD_API eood_status eood_mlp_load(const char* path, eood_mlp** out, eood_train_config* cfg, int* has_cfg);

/* Scores every row of one table split (NEG_ENERGY or MSP); out has split_rows slots. */
EOOD_API eood_status eood_mlp_score_split(const eood_mlp* model, const eood_table* table, eood_split split,
                                          eood_score_kind kind, double temp, double* out);

/* ---- Gaussian discriminant analysis ----------------------------------- */

typedef struct eood_gda eood_gda;

EOOD_API eood_status eood_gda_fit(const double* features, size_t rows, size_t dim, const int32_t* labels,
                                  double ridge, eood_gda** out);
/* means: k x dim row-major; covariance: dim x dim row-major. */
EOOD_API eood_status eood_gda_create(const double* means, size_t k, size_t dim, const double* covariance,
                                     const double* priors, double ridge, eood_gda** out);
EOOD_API void eood_gda_destroy(eood_gda* model);
EOOD_API size_t eood_gda_num_classes(const eood_gda* model);
EOOD_API size_t eood_gda_dim(const eood_gda* model);
EOOD_API eood_status eood_gda_posterior(const eood_gda* model, const double* x, size_t dim, double* out,
                                        size_t k);
EOOD_API eood_status eood_gda_energy_u(const eood_gda* model, const double* x, size_t dim, double* out);
EOOD_API eood_status eood_gda_mahalanobis(const eood_gda* model, const double* x, size_t dim, double* out);
EOOD_API eood_status eood_gda_to_json(const eood_gda* model, char** json);
EOOD_API eood_status eood_gda_from_json(const char* json, eood_gda** out);

#ifdef __cplusplus
}
#endif

#endif /* ENERGY_OOD_H */
