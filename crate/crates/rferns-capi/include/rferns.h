#ifndef RFERNS_H
#define RFERNS_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status code returned by every fallible function.
 */
typedef enum {
  RFERNS_OK = 0,
  RFERNS_NULL_POINTER = 1,
  RFERNS_INVALID_ARGUMENT = 2,
  RFERNS_INVALID_UTF8 = 3,
  RFERNS_RUNTIME_ERROR = 4,
  /**
   * The requested quantity is undefined for this input (for example an
   * out-of-bag error when no object is ever out of bag).
   */
  RFERNS_UNDEFINED = 5,
} rferns_status;

/**
 * Final wrapper decision for one attribute.
 */
typedef enum {
  RFERNS_CONFIRMED = 0,
  RFERNS_REJECTED = 1,
  RFERNS_TENTATIVE = 2,
} rferns_decision;

/**
 * Opaque Boruta-result handle.
 */
typedef struct rferns_boruta_result rferns_boruta_result;

/**
 * Opaque dataset handle.
 */
typedef struct rferns_dataset rferns_dataset;

/**
 * Opaque trained-model handle.
 */
typedef struct rferns_model rferns_model;

/**
 * Opaque importance-report handle.
 */
typedef struct rferns_report rferns_report;

/**
 * Importance record of one attribute.
 */
typedef struct {
  /**
   * Regular permutation importance (I).
   */
  double regular;
  /**
   * Implicit shadow importance (J).
   */
  double shadow;
  /**
   * Ferns that scanned the attribute.
   */
  uint32_t scans;
  bool selected;
  bool never_scanned;
} rferns_attr_importance;

/**
 * Boruta outcome of one attribute.
 */
typedef struct {
  rferns_decision decision;
  uint32_t hits;
  uint32_t trials;
  double final_importance;
} rferns_feature_status;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message describing the most recent error on this thread, or NULL.
 * The caller owns the returned string (free with rferns_string_free).
 */
char *rferns_last_error_message(void);

/**
 * Free a string returned by this library. NULL is allowed.
 */
void rferns_string_free(char *s);

/**
 * Load a CSV file with a header row; `label_column` names the class
 * column, remaining columns are auto-typed.
 */
rferns_status rferns_dataset_from_csv(const char *path,
                                      const char *label_column,
                                      rferns_dataset **out);

/**
 * Build a dataset from a dense row-major matrix of numeric values plus
 * label codes in 0..n_classes. Attributes are named x0, x1, ...
 */
rferns_status rferns_dataset_from_dense(const double *values,
                                        uintptr_t n_rows,
                                        uintptr_t n_cols,
                                        const uint32_t *labels,
                                        uint32_t n_classes,
                                        rferns_dataset **out);

uintptr_t rferns_dataset_rows(const rferns_dataset *data);

uintptr_t rferns_dataset_cols(const rferns_dataset *data);

uintptr_t rferns_dataset_classes(const rferns_dataset *data);

void rferns_dataset_free(rferns_dataset *data);

/**
 * Train an ensemble of `ferns` ferns of depth `depth`, deterministically
 * from `seed`.
 */
rferns_status rferns_train(const rferns_dataset *data,
                           uint32_t depth,
                           uint32_t ferns,
                           uint64_t seed,
                           rferns_model **out);

rferns_status rferns_model_save_json(const rferns_model *model, const char *path);

rferns_status rferns_model_load_json(const char *path, rferns_model **out);

/**
 * Predict class codes for every row of `data` into `out_labels`
 * (capacity must be at least the row count).
 */
rferns_status rferns_predict(const rferns_model *model,
                             const rferns_dataset *data,
                             uint32_t *out_labels,
                             uintptr_t capacity);

/**
 * Out-of-bag error of a model on its training data. Returns
 * RFERNS_UNDEFINED when no object has an out-of-bag fern.
 */
rferns_status rferns_oob_error(const rferns_model *model, const rferns_dataset *data, double *out);

void rferns_model_free(rferns_model *model);

/**
 * Fern count needed for roughly `target_scans` considerations of each of
 * `n_attributes` attributes at the given depth.
 */
rferns_status rferns_ferns_for_scans(uintptr_t n_attributes,
                                     uint32_t depth,
                                     uint32_t target_scans,
                                     uint32_t *out);

/**
 * Train and compute the importance report in one pass.
 */
rferns_status rferns_importance(const rferns_dataset *data,
                                uint32_t depth,
                                uint32_t ferns,
                                uint64_t seed,
                                rferns_report **out);

uintptr_t rferns_report_len(const rferns_report *report);

rferns_status rferns_report_entry(const rferns_report *report,
                                  uintptr_t index,
                                  rferns_attr_importance *out);

/**
 * Attribute name; the caller owns the returned string.
 */
char *rferns_report_attr_name(const rferns_report *report, uintptr_t index);

/**
 * Maximum shadow importance over scanned attributes. RFERNS_UNDEFINED
 * when nothing was scanned.
 */
rferns_status rferns_report_max_shadow(const rferns_report *report, double *out);

uintptr_t rferns_report_selected_count(const rferns_report *report);

rferns_status rferns_report_save_json(const rferns_report *report, const char *path);

rferns_status rferns_report_save_csv(const rferns_report *report, const char *path);

void rferns_report_free(rferns_report *report);

/**
 * Run the Boruta-style wrapper. `target_scans` sets the per-iteration
 * ensemble budget; `bonferroni` toggles the multiple-testing correction.
 */
rferns_status rferns_boruta(const rferns_dataset *data,
                            uint32_t depth,
                            uint32_t target_scans,
                            uint64_t seed,
                            uint32_t max_iterations,
                            double alpha,
                            bool bonferroni,
                            rferns_boruta_result **out);

uintptr_t rferns_boruta_len(const rferns_boruta_result *result);

rferns_status rferns_boruta_entry(const rferns_boruta_result *result,
                                  uintptr_t index,
                                  rferns_feature_status *out);

/**
 * Attribute name; the caller owns the returned string.
 */
char *rferns_boruta_attr_name(const rferns_boruta_result *result, uintptr_t index);

void rferns_boruta_free(rferns_boruta_result *result);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* RFERNS_H */
