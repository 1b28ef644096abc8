#ifndef FRACRUIN_H
#define FRACRUIN_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum FrStatus {
  FR_STATUS_OK = 0,
  FR_STATUS_NULL_POINTER = 1,
  FR_STATUS_DOMAIN = 2,
  FR_STATUS_CONFIG = 3,
  FR_STATUS_NUMERICAL = 4,
  FR_STATUS_IO = 5,
  FR_STATUS_PANIC = 6,
} FrStatus;

/**
 * Opaque model handle.
 */
typedef struct FrModel FrModel;

/**
 * A point estimate with its standard error (or asymptotic sd).
 */
typedef struct FrEstimate {
  double value;
  double se;
} FrEstimate;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Creates a model X = u + σθt − σW^H on [0, horizon].
 *
 * # Safety
 * `out` must be a valid pointer to writable storage for one handle.
 */
enum FrStatus fr_model_new(double u,
                           double theta,
                           double sigma,
                           double hurst,
                           double horizon,
                           struct FrModel **out);

/**
 * Releases a model. Null is ignored.
 *
 * # Safety
 * `model` must be null or a handle from [`fr_model_new`] not yet freed.
 */
void fr_model_free(struct FrModel *model);

/**
 * Caps the worker threads used by this model (0 means the global pool).
 * Results do not depend on it.
 *
 * # Safety
 * `model` must be a live handle.
 */
enum FrStatus fr_model_set_workers(struct FrModel *model, size_t workers);

/**
 * Monte Carlo ruin probability on an n-step grid.
 *
 * # Safety
 * `model` must be a live handle and `out` valid for writing.
 */
enum FrStatus fr_ruin_probability(const struct FrModel *model,
                                  size_t paths,
                                  size_t steps,
                                  uint64_t seed,
                                  struct FrEstimate *out);

/**
 * Central finite difference of the ruin probability in σ with common random numbers.
 *
 * # Safety
 * `model` must be a live handle and `out` valid for writing.
 */
enum FrStatus fr_sens_finite_diff(const struct FrModel *model,
                                  double eps,
                                  size_t paths,
                                  size_t steps,
                                  uint64_t seed,
                                  struct FrEstimate *out);

/**
 * Malliavin-weight estimate of ∂Ψ/∂σ with the default dominating-process
 * exponents for the model's H. `sharpness` ≤ 0 selects the default.
 *
 * # Safety
 * `model` must be a live handle and `out` valid for writing.
 */
enum FrStatus fr_sens_malliavin(const struct FrModel *model,
                                double sharpness,
                                size_t paths,
                                size_t steps,
                                uint64_t seed,
                                struct FrEstimate *out);

/**
 * σ̂ from surplus observations `x` at times `t` (equally spaced from 0),
 * with its asymptotic sd in `se` (NaN when H ≥ 3/4).
 *
 * # Safety
 * `t` and `x` must point to `len` readable values and `out` be valid for writing.
 */
enum FrStatus fr_sigma_hat(const double *t,
                           const double *x,
                           size_t len,
                           double p,
                           double hurst,
                           struct FrEstimate *out);

/**
 * Message of the last failed call on this thread ("" after a success).
 * The pointer stays valid until the next call on this thread.
 */
const char *fr_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *fr_version(void);

#ifdef __cplusplus
} // extern "C"
#endif // __cplusplus

#endif /* FRACRUIN_H */
