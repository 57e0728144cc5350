#ifndef DLREG_H
#define DLREG_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of every call.
 */
typedef enum DlregStatus {
  DLREG_STATUS_OK = 0,
  DLREG_STATUS_NULL_POINTER = 1,
  DLREG_STATUS_INVALID_ARGUMENT = 2,
  DLREG_STATUS_IO = 3,
  DLREG_STATUS_INVALID_DATA = 4,
  DLREG_STATUS_NOT_CONVERGED = 5,
  DLREG_STATUS_NUMERICAL = 6,
  DLREG_STATUS_BUFFER_TOO_SMALL = 7,
  DLREG_STATUS_PANIC = 8,
} DlregStatus;

typedef enum DlregLink {
  DLREG_LINK_IDENTITY = 0,
  DLREG_LINK_LOGIT = 1,
} DlregLink;

typedef enum DlregAuxiliary {
  /**
   * Normal model for the covariate given the surrogates.
   */
  DLREG_AUXILIARY_PARAMETRIC = 0,
  /**
   * Rank-based accelerated failure time model with a Kaplan-Meier residual law.
   */
  DLREG_AUXILIARY_SEMIPARAMETRIC = 1,
} DlregAuxiliary;

typedef enum DlregAuxScale {
  DLREG_AUX_SCALE_LINEAR = 0,
  DLREG_AUX_SCALE_LOG = 1,
} DlregAuxScale;

typedef enum DlregTransform {
  DLREG_TRANSFORM_NEGATE = 0,
  DLREG_TRANSFORM_NEG_EXP = 1,
} DlregTransform;

typedef enum DlregVariance {
  DLREG_VARIANCE_KNOWN_ETA = 0,
  DLREG_VARIANCE_CORRECTED = 1,
  DLREG_VARIANCE_CROSS_FIT = 2,
} DlregVariance;

/**
 * Opaque dataset handle.
 */
typedef struct DlregDataset DlregDataset;

/**
 * Opaque fit handle.
 */
typedef struct DlregFit DlregFit;

/**
 * Fit settings; start from [`dlreg_fit_options_default`].
 */
typedef struct DlregFitOptions {
  enum DlregLink link;
  enum DlregAuxiliary auxiliary;
  enum DlregAuxScale aux_scale;
  /**
   * Required by the semiparametric auxiliary model.
   */
  enum DlregTransform transform;
  enum DlregVariance variance;
  /**
   * NaN keeps the default truncation point.
   */
  double tau;
  bool normalize_htilde;
  uint64_t seed;
} DlregFitOptions;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. The pointer stays
 * valid until the next failing call on the same thread.
 */
const char *dlreg_last_error_message(void);

/**
 * Builds a dataset from per-row arrays.
 *
 * `u` is `n × p_u` and `z` is `n × p_z`, both row-major. `observed` may be
 * null, in which case a row counts as observed when `x > delta`; otherwise it
 * holds one 0/1 flag per row and the value of `x` on flagged-censored rows is
 * ignored.
 *
 * # Safety
 * `y` and `x` must point to `n` doubles, `u` to `n * p_u`, `z` to `n * p_z`,
 * `observed` (if not null) to `n` bytes, and `out` must be writable.
 */
enum DlregStatus dlreg_dataset_new(size_t n,
                                   const double *y,
                                   const double *x,
                                   const uint8_t *observed,
                                   size_t p_u,
                                   const double *u,
                                   size_t p_z,
                                   const double *z,
                                   double delta,
                                   struct DlregDataset **out);

/**
 * # Safety
 * `d` must come from [`dlreg_dataset_new`] and not be used afterwards. Null is ignored.
 */
void dlreg_dataset_free(struct DlregDataset *d);

/**
 * Number of rows whose covariate is above the detection limit.
 *
 * # Safety
 * `d` must be a live dataset handle and `out` writable.
 */
enum DlregStatus dlreg_dataset_n_observed(const struct DlregDataset *d, size_t *out);

/**
 * Default settings: identity link, parametric auxiliary model on the linear
 * scale, corrected sandwich variance.
 */
struct DlregFitOptions dlreg_fit_options_default(void);

/**
 * Fits the auxiliary model and the primary regression.
 *
 * # Safety
 * `d` must be a live dataset handle, `options` null or valid, `out` writable.
 */
enum DlregStatus dlreg_fit(const struct DlregDataset *d,
                           const struct DlregFitOptions *options,
                           struct DlregFit **out);

/**
 * # Safety
 * `f` must come from [`dlreg_fit`] and not be used afterwards. Null is ignored.
 */
void dlreg_fit_free(struct DlregFit *f);

/**
 * Number of coefficients: intercept, covariate, then one per `u` column.
 *
 * # Safety
 * `f` must be a live fit handle. Returns 0 for null.
 */
size_t dlreg_fit_n_coef(const struct DlregFit *f);

/**
 * Copies the coefficient estimates into `out`.
 *
 * # Safety
 * `f` must be a live fit handle and `out` must hold `len` doubles.
 */
enum DlregStatus dlreg_fit_coefficients(const struct DlregFit *f, double *out, size_t len);

/**
 * Copies the standard errors into `out`.
 *
 * # Safety
 * `f` must be a live fit handle and `out` must hold `len` doubles.
 */
enum DlregStatus dlreg_fit_std_errors(const struct DlregFit *f, double *out, size_t len);

/**
 * Copies the row-major `p × p` asymptotic variance of `√n(β̂ - β)` into `out`.
 *
 * # Safety
 * `f` must be a live fit handle and `out` must hold `len` doubles.
 */
enum DlregStatus dlreg_fit_variance(const struct DlregFit *f, double *out, size_t len);

/**
 * Wald test of `C β = b` with `C` row-major `rows × p`.
 *
 * # Safety
 * `f` must be a live fit handle, `c` must hold `rows * p` doubles, `b` must
 * hold `rows` doubles, and the outputs must be writable.
 */
enum DlregStatus dlreg_wald(const struct DlregFit *f,
                            const double *c,
                            size_t rows,
                            const double *b,
                            double *statistic,
                            double *p_value);

/**
 * Fit as JSON. Release the string with [`dlreg_string_free`].
 *
 * # Safety
 * `f` must be a live fit handle and `out` writable.
 */
enum DlregStatus dlreg_fit_to_json(const struct DlregFit *f, char **out);

/**
 * Runs a Monte Carlo scenario given as JSON (fields not given take the
 * design defaults) and returns the report as JSON. `jobs` of 0 uses every
 * core. Release the string with [`dlreg_string_free`].
 *
 * # Safety
 * `scenario_json` must be a NUL-terminated string and `out` writable.
 */
enum DlregStatus dlreg_simulate_json(const char *scenario_json, size_t jobs, char **out);

/**
 * # Safety
 * `s` must come from this library and not be used afterwards. Null is ignored.
 */
void dlreg_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DLREG_H */
