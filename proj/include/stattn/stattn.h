#ifndef STATTN_STATTN_H
#define STATTN_STATTN_H

/*
 * C interface to the stattn library.
 *
 * Objects are opaque handles created by stattn_*_create/load functions and
 * released with the matching *_free. Every fallible call returns a status
 * code; on failure stattn_last_error() describes the problem (per thread).
 * Strings returned through char** are heap allocated and must be released
 * with stattn_string_free. Structured arguments and results are JSON text.
 */

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

#if defined(__GNUC__)
#define STATTN_API __attribute__((visibility("default")))
#else
#define STATTN_API
#endif

typedef enum stattn_status {
  STATTN_OK = 0,
  STATTN_ERR_INVALID_ARGUMENT = 1,
  STATTN_ERR_SHAPE = 2,
  STATTN_ERR_PARSE = 3,
  STATTN_ERR_IO = 4,
  STATTN_ERR_NUMERIC = 5,
  STATTN_ERR_FORMAT = 6,
  STATTN_ERR_INTERNAL = 99
} stattn_status;

typedef struct stattn_cohort stattn_cohort;
typedef struct stattn_dataset stattn_dataset;
typedef struct stattn_model stattn_model;

STATTN_API const char* stattn_version(void);
STATTN_API const char* stattn_last_error(void);
STATTN_API void stattn_string_free(char* s);

/* Cohorts ---------------------------------------------------------------- */

/* generator_json may be NULL for the default generator. */
STATTN_API int stattn_cohort_generate(const char* generator_json, uint64_t seed, stattn_cohort** out);
/* Reads static.csv and visits.csv from a directory. */
STATTN_API int stattn_cohort_load(const char* dir, stattn_cohort** out);
STATTN_API int stattn_cohort_save(const stattn_cohort* cohort, const char* dir);
/* {"patients", "positives", "visits", "static_variables", "longitudinal_variables"} */
STATTN_API int stattn_cohort_summary(const stattn_cohort* cohort, char** json_out);
/* Writes the generator's noise-free logits as patient_id,logit lines.
   Only available for generated cohorts. */
STATTN_API int stattn_cohort_true_logits(const stattn_cohort* cohort, char** csv_out);
STATTN_API void stattn_cohort_free(stattn_cohort* cohort);

/* Preprocessing ---------------------------------------------------------- */

/* options_json: {"prevalence_threshold": 0.95, "modalities": "all" | "labs,vitals,..."};
   NULL uses the defaults. */
STATTN_API int stattn_dataset_create(const stattn_cohort* cohort, const char* options_json, stattn_dataset** out);
/* Applies a stored preprocessing state (from stattn_dataset_state) to a cohort. */
STATTN_API int stattn_dataset_apply(const stattn_cohort* cohort, const char* state_json, stattn_dataset** out);
/* Attaches first-visit clinical risk from a scoring table file to every
   sequence; required before evaluating the clinical variant. */
STATTN_API int stattn_dataset_attach_clinical(stattn_dataset* dataset, const stattn_cohort* cohort,
                                              const char* scoring_table_path);
STATTN_API int stattn_dataset_state(const stattn_dataset* dataset, char** json_out);
/* Writes features.csv (patient_id, step, label, features...) and state.json. */
STATTN_API int stattn_dataset_save(const stattn_dataset* dataset, const char* dir);
STATTN_API int stattn_dataset_load(const char* dir, stattn_dataset** out);
/* Per-sequence accessors; count must equal the dataset size. */
STATTN_API int stattn_dataset_labels(const stattn_dataset* dataset, int* labels, size_t count);
STATTN_API int stattn_dataset_clinical_risks(const stattn_dataset* dataset, double* risks, size_t count);
/* Patient ids, one per line, in dataset order. */
STATTN_API int stattn_dataset_patient_ids(const stattn_dataset* dataset, char** text_out);
STATTN_API size_t stattn_dataset_size(const stattn_dataset* dataset);
STATTN_API size_t stattn_dataset_width(const stattn_dataset* dataset);
STATTN_API void stattn_dataset_free(stattn_dataset* dataset);

/* Training --------------------------------------------------------------- */

/* Runs stratified cross-validation. config_json follows the train config
   document (NULL for defaults). When checkpoint_dir is non-NULL, the best
   checkpoint of every fold is written there as fold_<k>.ckpt. The report is
   returned as JSON. */
STATTN_API int stattn_cross_validate(const stattn_dataset* dataset, const char* config_json,
                                     const char* checkpoint_dir, char** report_json);

/* Models ----------------------------------------------------------------- */

STATTN_API int stattn_model_load(const char* checkpoint_path, stattn_model** out);
STATTN_API int stattn_model_save(const stattn_model* model, const char* checkpoint_path);
/* {"model": ..., "train": ..., "epoch": ..., "validation_auc": ...} */
STATTN_API int stattn_model_info(const stattn_model* model, char** json_out);
/* The preprocessing state stored with the checkpoint, or "" if none. */
STATTN_API int stattn_model_preprocess_state(const stattn_model* model, char** json_out);
/* Writes one risk per sequence into risks (capacity count, which must equal
   the dataset size). */
STATTN_API int stattn_model_predict(const stattn_model* model, const stattn_dataset* dataset, double* risks,
                                    size_t count);
STATTN_API void stattn_model_free(stattn_model* model);

/* Metrics ---------------------------------------------------------------- */

STATTN_API int stattn_auc(const double* scores, const int* labels, size_t count, double* out);
/* ROC points as "fpr,tpr,threshold" lines with a header. */
STATTN_API int stattn_roc_csv(const double* scores, const int* labels, size_t count, char** csv_out);

#ifdef __cplusplus
}
#endif

#endif
