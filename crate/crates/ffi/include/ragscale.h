/* C interface to the ragscale scaling-law toolkit. */

#ifndef RAGSCALE_H
#define RAGSCALE_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

// Retrieval gain family selector for the C surface.
typedef enum RagscaleFamily {
  RAGSCALE_FAMILY_TWO_D = 0,
  RAGSCALE_FAMILY_LOG_GAIN = 1,
  RAGSCALE_FAMILY_POWER_GAIN = 2,
} RagscaleFamily;

// Status codes for every fallible call.
typedef enum RagscaleStatus {
  RAGSCALE_STATUS_OK = 0,
  RAGSCALE_STATUS_NULL_ARGUMENT = 1,
  RAGSCALE_STATUS_INVALID_UTF8 = 2,
  RAGSCALE_STATUS_IO_ERROR = 3,
  RAGSCALE_STATUS_PARSE_ERROR = 4,
  RAGSCALE_STATUS_DOMAIN_ERROR = 5,
  RAGSCALE_STATUS_INSUFFICIENT_DATA = 6,
  RAGSCALE_STATUS_NO_CONVERGENCE = 7,
  RAGSCALE_STATUS_INVALID_ARGUMENT = 8,
  RAGSCALE_STATUS_NUMERICAL_ERROR = 9,
  RAGSCALE_STATUS_PANIC = 10,
} RagscaleStatus;

// Opaque dataset handle.
typedef struct RagscaleDataset RagscaleDataset;

// Opaque fit handle: the two-stage result for one benchmark.
typedef struct RagscaleFit RagscaleFit;

// Flat law parameters. For `TwoD`, `c` and `rate` are ignored on input
// and zeroed on output.
typedef struct RagscaleLawParams {
  double a;
  double alpha;
  double b;
  double beta;
  double l0;
  double c;
  double rate;
  enum RagscaleFamily family;
} RagscaleLawParams;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static NUL-terminated string.
const char *ragscale_version(void);

// Message for the most recent failure on this thread. Never null; empty
// before the first failure. Do not free.
const char *ragscale_last_error_message(void);

// Frees a string returned through an out-pointer by this library.
//
// # Safety
// `s` must have been returned by a ragscale function or be null.
void ragscale_string_free(char *s);

// Loads a dataset from a CSV or JSON file (format inferred from the
// extension) and returns an owned handle through `out`.
//
// # Safety
// `path` must point to a NUL-terminated string and `out` to writable
// storage for one pointer.
enum RagscaleStatus ragscale_dataset_load(const char *path, struct RagscaleDataset **out);

// Number of records in the dataset.
//
// # Safety
// `dataset` must be a live handle from `ragscale_dataset_load`; `out`
// must be writable.
enum RagscaleStatus ragscale_dataset_len(const struct RagscaleDataset *dataset, uintptr_t *out);

// Releases a dataset handle.
//
// # Safety
// `dataset` must be a handle from `ragscale_dataset_load` or null; it
// must not be used afterwards.
void ragscale_dataset_free(struct RagscaleDataset *dataset);

// Two-axis law evaluation at (n, d).
//
// # Safety
// `params` and `out` must be valid for reads/writes respectively.
enum RagscaleStatus ragscale_eval_2d(const struct RagscaleLawParams *params,
                                     double n,
                                     double d,
                                     double *out);

// Three-axis law evaluation at (n, d, r). Fails with `DomainError` when a
// log-gain prediction is not positive.
//
// # Safety
// `params` and `out` must be valid for reads/writes respectively.
enum RagscaleStatus ragscale_eval_3d(const struct RagscaleLawParams *params,
                                     double n,
                                     double d,
                                     double r,
                                     double *out);

// Runs the seeded two-stage fit on one benchmark of the dataset.
// `benchmark` may be null when the dataset holds exactly one. `n_starts`
// of 0 selects the default (64).
//
// # Safety
// `dataset` must be a live handle; `benchmark` null or NUL-terminated;
// `out` writable.
enum RagscaleStatus ragscale_fit(const struct RagscaleDataset *dataset,
                                 enum RagscaleFamily family,
                                 uint64_t seed,
                                 uintptr_t n_starts,
                                 const char *benchmark,
                                 struct RagscaleFit **out);

// Copies the fitted law out of a fit handle.
//
// # Safety
// `fit` must be a live handle from `ragscale_fit`; `out` writable.
enum RagscaleStatus ragscale_fit_params(const struct RagscaleFit *fit,
                                        struct RagscaleLawParams *out);

// Serializes the full fit report (17-significant-digit JSON) into a newly
// allocated string.
//
// # Safety
// `fit` must be a live handle; `out` writable. Free the string with
// `ragscale_string_free`.
enum RagscaleStatus ragscale_fit_to_json(const struct RagscaleFit *fit, char **out);

// Releases a fit handle.
//
// # Safety
// `fit` must be a handle from `ragscale_fit` or null; it must not be used
// afterwards.
void ragscale_fit_free(struct RagscaleFit *fit);

// Optimal split of `budget` tokens between pretraining (`out_d`) and the
// retrieval store (`out_r`) for a model of `n` parameters; `out_loss`
// receives the predicted loss. `resolution` of 0 selects the default
// (512) and `d_min` of 0 selects the default (1e6).
//
// # Safety
// `params` must be readable; the out-pointers writable.
enum RagscaleStatus ragscale_optimize_split(const struct RagscaleLawParams *params,
                                            double n,
                                            double budget,
                                            double d_min,
                                            uintptr_t resolution,
                                            double *out_d,
                                            double *out_r,
                                            double *out_loss);

// Nested-prefix datastore selection: picks the shortest seeded-permutation
// prefix of the catalog meeting `budget` tokens and returns the manifest
// as JSON.
//
// # Safety
// `catalog_path` must be NUL-terminated; `out_json` writable. Free the
// string with `ragscale_string_free`.
enum RagscaleStatus ragscale_select_budget(const char *catalog_path,
                                           uint64_t seed,
                                           uint64_t budget,
                                           char **out_json);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* RAGSCALE_H */
