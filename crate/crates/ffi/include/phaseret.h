#ifndef PHASERET_H
#define PHASERET_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

#define PHR_OK 0

#define PHR_NULL_POINTER 1

#define PHR_INVALID_ARGUMENT 2

#define PHR_SHAPE_MISMATCH 3

#define PHR_NON_FINITE 4

#define PHR_FORMAT 5

#define PHR_CHECKSUM_MISMATCH 6

#define PHR_PROVENANCE 7

#define PHR_MISSING_WEIGHTS 8

#define PHR_IO 9

#define PHR_INTERNAL 10

#define PHR_ALGORITHM_GS 0

#define PHR_ALGORITHM_HIO 1

#define PHR_ALGORITHM_RAAR 2

/**
 * A trained E2E reconstructor.
 */
typedef struct PhrE2e PhrE2e;

/**
 * A measurement operator `x ↦ |Ax|`.
 */
typedef struct PhrOperator PhrOperator;

/**
 * Scores of one reconstruction after registration.
 */
typedef struct PhrEvalRecord {
  double mse;
  double mae;
  double ssim;
  size_t delta_s;
  size_t delta_t;
  /**
   * 1 when the 180° rotation was undone.
   */
  int32_t rotated;
} PhrEvalRecord;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failure on this thread; valid until the next call.
 */
const char *phr_last_error(void);

/**
 * Static name of a status code.
 */
const char *phr_status_name(int32_t code);

/**
 * Orthonormal 2-D DFT magnitudes of an `h × w` image.
 */
int32_t phr_operator_fourier(size_t h, size_t w, struct PhrOperator **out);

/**
 * Gaussian `m × n` operator with `N(0, 1/m)` entries drawn from `seed`.
 */
int32_t phr_operator_gaussian(size_t m, size_t n, uint64_t seed, struct PhrOperator **out);

/**
 * # Safety
 * `op` must come from a `phr_operator_*` constructor and not be used afterwards.
 */
void phr_operator_free(struct PhrOperator *op);

/**
 * Writes the output (`m`) and input (`n`) lengths.
 *
 * # Safety
 * Pointers must be valid.
 */
int32_t phr_operator_dims(const struct PhrOperator *op, size_t *m, size_t *n);

/**
 * `y = |A x|`; `x` has `n` entries (row-major for Fourier), `y` has `m`.
 *
 * # Safety
 * `x` must hold `n` and `y` `m` doubles.
 */
int32_t phr_operator_apply(const struct PhrOperator *op,
                           const double *x,
                           size_t n,
                           double *y,
                           size_t m);

/**
 * Best-of-`restarts` projection solve of Fourier magnitudes `y` (`h × w`,
 * full-frame support). Writes the reconstruction and its residual.
 *
 * # Safety
 * `y` and `x_out` must hold `h * w` doubles; `residual` may be null.
 */
int32_t phr_solve(const double *y,
                  size_t h,
                  size_t w,
                  int32_t algorithm,
                  double beta,
                  size_t iters,
                  size_t restarts,
                  uint64_t seed,
                  double *x_out,
                  double *residual);

/**
 * Registers `x_hat` to `x` (circular shifts and 180° rotation) and scores it.
 *
 * # Safety
 * `x` and `x_hat` must hold `h * w` doubles.
 */
int32_t phr_evaluate(const double *x,
                     const double *x_hat,
                     size_t h,
                     size_t w,
                     struct PhrEvalRecord *out);

/**
 * Loads an E2E model from a weight archive (`path` is UTF-8).
 *
 * # Safety
 * `path` must be a NUL-terminated string.
 */
int32_t phr_e2e_load(const char *path, struct PhrE2e **out);

/**
 * # Safety
 * `model` must come from `phr_e2e_load` and not be used afterwards.
 */
void phr_e2e_free(struct PhrE2e *model);

/**
 * Measurement length the model expects.
 *
 * # Safety
 * Pointers must be valid.
 */
int32_t phr_e2e_input_dim(const struct PhrE2e *model, size_t *m);

/**
 * Reconstructs `count` images (784 values each) from `count × m` magnitudes.
 *
 * # Safety
 * `y` must hold `count * m` doubles and `x_out` `count * 784`.
 */
int32_t phr_e2e_reconstruct(const struct PhrE2e *model,
                            const double *y,
                            size_t count,
                            size_t m,
                            double *x_out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PHASERET_H */
