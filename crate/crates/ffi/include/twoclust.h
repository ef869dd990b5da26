#ifndef TWOCLUST_H
#define TWOCLUST_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every fallible call.
 */
typedef enum TcStatus {
  TC_STATUS_OK = 0,
  TC_STATUS_NULL_POINTER = 1,
  TC_STATUS_INVALID_ARGUMENT = 2,
  TC_STATUS_RANK_DEFICIENT = 3,
  TC_STATUS_TOO_FEW_CLUSTERS = 4,
  TC_STATUS_ESTIMATION_FAILED = 5,
  TC_STATUS_OUT_OF_RANGE = 6,
  TC_STATUS_PANIC = 7,
} TcStatus;

/**
 * Estimator family.
 */
typedef enum TcFamily {
  TC_FAMILY_CV1 = 1,
  TC_FAMILY_CV3 = 3,
} TcFamily;

/**
 * Estimator shape, in report order.
 */
typedef enum TcArity {
  TC_ARITY_HC = 0,
  TC_ARITY_ONE_WAY_I = 1,
  TC_ARITY_ONE_WAY_G = 2,
  TC_ARITY_ONE_WAY_H = 3,
  TC_ARITY_TWO_TERM = 4,
  TC_ARITY_THREE_TERM = 5,
  TC_ARITY_THREE_PLUS = 6,
  TC_ARITY_MAX = 7,
} TcArity;

/**
 * Component chosen by a max-se row.
 */
typedef enum TcComponent {
  TC_COMPONENT_NONE = -1,
  TC_COMPONENT_THREE_TERM = 0,
  TC_COMPONENT_G = 1,
  TC_COMPONENT_H = 2,
} TcComponent;

/**
 * Clustering dimension, as passed to `tc_fit_diagnostics`.
 */
typedef enum TcDim {
  TC_DIM_G = 0,
  TC_DIM_H = 1,
  TC_DIM_I = 2,
} TcDim;

/**
 * Opaque dataset handle.
 */
typedef struct TcDataset TcDataset;

/**
 * Opaque fit result handle.
 */
typedef struct TcFit TcFit;

/**
 * One estimator row. Undefined quantities are NaN.
 */
typedef struct TcRow {
  enum TcFamily family;
  enum TcArity arity;
  double estimate;
  double se;
  double stat;
  double p;
  double ci_lo;
  double ci_hi;
  uint64_t df;
  bool defined;
  enum TcComponent selected;
} TcRow;

/**
 * Diagnostics for one clustering dimension.
 */
typedef struct TcDiag {
  uint64_t n_clusters;
  double size_cv;
  double leverage_cv;
  double partial_leverage_cv;
  double beta_cv;
  double gstar;
} TcDiag;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the most recent failure on this thread, or NULL. The
 * pointer stays valid until the next failing call on the same thread.
 */
const char *tc_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *tc_version(void);

/**
 * Two-sided Student-t p-value; NaN for `df == 0`.
 */
double tc_student_t_pvalue(double t, uint64_t df);

/**
 * Builds a dataset.
 *
 * `x` is row-major `n` by `k`. `g` and `h` hold one integer cluster label
 * per observation. Column `coef` is the coefficient of interest.
 *
 * # Safety
 * `y`, `g` and `h` must point to `n` readable values, `x` to `n * k`, and
 * `out` must be writable.
 */
enum TcStatus tc_dataset_new(const double *y,
                             const double *x,
                             size_t n,
                             size_t k,
                             const int64_t *g,
                             const int64_t *h,
                             size_t coef,
                             struct TcDataset **out);

/**
 * Marks columns `n_primary..k` as fixed-effect dummies, which switches the
 * jackknife to the generalized inverse.
 *
 * # Safety
 * `ds` must be a live handle from [`tc_dataset_new`].
 */
enum TcStatus tc_dataset_set_fixed_effects(struct TcDataset *ds, size_t n_primary);

/**
 * # Safety
 * `ds` must be NULL or a handle from [`tc_dataset_new`] not yet freed.
 */
void tc_dataset_free(struct TcDataset *ds);

/**
 * Fits OLS and computes all 16 estimators and the diagnostics, testing
 * `beta[coef] = null_value` with intervals at confidence `level`.
 *
 * # Safety
 * `ds` must be a live dataset handle and `out` writable.
 */
enum TcStatus tc_fit(const struct TcDataset *ds,
                     double level,
                     double null_value,
                     struct TcFit **out);

/**
 * # Safety
 * `fit` must be NULL or a handle from [`tc_fit`] not yet freed.
 */
void tc_fit_free(struct TcFit *fit);

/**
 * Coefficient estimate; NaN for a NULL handle.
 *
 * # Safety
 * `fit` must be NULL or a live handle.
 */
double tc_fit_estimate(const struct TcFit *fit);

/**
 * Number of estimator rows (16 for a live handle, 0 for NULL).
 *
 * # Safety
 * `fit` must be NULL or a live handle.
 */
size_t tc_fit_n_rows(const struct TcFit *fit);

/**
 * Copies row `index` (CV1 rows 0-7, then CV3 rows 8-15) into `out`.
 *
 * # Safety
 * `fit` must be a live handle and `out` writable.
 */
enum TcStatus tc_fit_row(const struct TcFit *fit, size_t index, struct TcRow *out);

/**
 * Copies the diagnostics for dimension `dim` (a [`TcDim`] value) into
 * `out`.
 *
 * # Safety
 * `fit` must be a live handle and `out` writable.
 */
enum TcStatus tc_fit_diagnostics(const struct TcFit *fit, uint32_t dim, struct TcDiag *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* TWOCLUST_H */
