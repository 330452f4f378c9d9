#ifndef LPMBC_H
#define LPMBC_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum LpmbcAssumption {
  LPMBC_ASSUMPTION_LUA = 0,
  LPMBC_ASSUMPTION_LGA = 1,
  LPMBC_ASSUMPTION_LCA_UNIT = 2,
  LPMBC_ASSUMPTION_LCA_SILVERMAN = 3,
} LpmbcAssumption;

typedef enum LpmbcMetric {
  LPMBC_METRIC_CHEBYCHEV = 0,
  LPMBC_METRIC_EUCLIDEAN = 1,
} LpmbcMetric;

typedef enum LpmbcMode {
  LPMBC_MODE_PER_CLASS = 0,
  LPMBC_MODE_SHARED = 1,
  LPMBC_MODE_GLOBAL = 2,
} LpmbcMode;

// Result of every fallible call.
typedef enum LpmbcStatus {
  LPMBC_STATUS_OK = 0,
  LPMBC_STATUS_INVALID_INPUT = 1,
  LPMBC_STATUS_IO = 2,
  LPMBC_STATUS_NUMERIC = 3,
  LPMBC_STATUS_NULL_POINTER = 4,
  LPMBC_STATUS_PANIC = 5,
} LpmbcStatus;

// Opaque fitted classifier.
typedef struct LpmbcClassifier LpmbcClassifier;

// Opaque labeled dataset.
typedef struct LpmbcDataset LpmbcDataset;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or null. The pointer is
// valid until the next failing call on the same thread.
const char *lpmbc_last_error(void);

// Loads a CSV file with a header row and the label in the last column.
//
// # Safety
// `path` must be a nul-terminated string and `out` a valid pointer.
enum LpmbcStatus lpmbc_dataset_load_csv(const char *path, struct LpmbcDataset **out);

// Builds a dataset from `n` row-major rows of `d` features and `n` class
// indices in `0..n_classes`. Classes are named "0", "1", ...
//
// # Safety
// `features` must point to `n * d` doubles, `labels` to `n` values and
// `out` must be a valid pointer.
enum LpmbcStatus lpmbc_dataset_from_arrays(const double *features,
                                           const uint32_t *labels,
                                           uintptr_t n,
                                           uintptr_t d,
                                           uintptr_t n_classes,
                                           struct LpmbcDataset **out);

// Writes the sample, feature and class counts. Any output may be null.
//
// # Safety
// `data` must come from this library and not be freed.
enum LpmbcStatus lpmbc_dataset_shape(const struct LpmbcDataset *data,
                                     uintptr_t *n,
                                     uintptr_t *d,
                                     uintptr_t *n_classes);

// # Safety
// `data` must come from this library (or be null) and not be used again.
void lpmbc_dataset_free(struct LpmbcDataset *data);

// Fits a classifier on a copy of `data`. `k` is ignored in global mode.
// With `standardize` set, features are scaled to zero mean and unit
// variance on the training data and queries get the same transform.
//
// # Safety
// `data` must be a live dataset handle and `out` a valid pointer.
enum LpmbcStatus lpmbc_classifier_new(const struct LpmbcDataset *data,
                                      enum LpmbcMode mode,
                                      uintptr_t k,
                                      enum LpmbcAssumption assumption,
                                      enum LpmbcMetric metric,
                                      bool standardize,
                                      struct LpmbcClassifier **out);

// Classifies one query of `d` features. Writes the class index to `label`
// and, when `posteriors` is not null, the `n_classes` posteriors.
//
// # Safety
// `query` must point to `d` doubles, `posteriors` (if not null) to room
// for `n_classes` doubles, and `label` must be valid.
enum LpmbcStatus lpmbc_classifier_predict(const struct LpmbcClassifier *clf,
                                          const double *query,
                                          uintptr_t d,
                                          uintptr_t *label,
                                          double *posteriors,
                                          uintptr_t n_classes);

// # Safety
// `clf` must come from this library (or be null) and not be used again.
void lpmbc_classifier_free(struct LpmbcClassifier *clf);

// Runs the repeated cross test with inner model selection (per-class
// Chebychev neighborhoods, all three assumptions) and returns the report
// as a JSON string to be freed with `lpmbc_string_free`.
//
// # Safety
// `data` must be a live dataset handle and `json` a valid pointer.
enum LpmbcStatus lpmbc_bench_json(const struct LpmbcDataset *data,
                                  uintptr_t folds,
                                  uintptr_t repeats,
                                  uint64_t seed,
                                  char **json);

// # Safety
// `s` must come from this library (or be null) and not be used again.
void lpmbc_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* LPMBC_H */
