#ifndef DUNKL_H
#define DUNKL_H

/* Generated with cbindgen:0.29.4 */

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum DunklStatus {
  DUNKL_STATUS_OK = 0,
  DUNKL_STATUS_NULL_POINTER = 1,
  DUNKL_STATUS_INVALID_PARAMETER = 2,
  DUNKL_STATUS_GRID_MISMATCH = 3,
  DUNKL_STATUS_NON_CONVERGENCE = 4,
  DUNKL_STATUS_HYPOTHESIS = 5,
  DUNKL_STATUS_INVARIANT = 6,
  DUNKL_STATUS_DEGENERATE = 7,
  DUNKL_STATUS_CONFIG = 8,
  DUNKL_STATUS_IO = 9,
  DUNKL_STATUS_PANIC = 10,
} DunklStatus;

/**
 * A direct bilinear quadrature plan bound to the transform it was built on.
 */
typedef struct DunklBilinearPlan DunklBilinearPlan;

/**
 * A transform on a square space/frequency grid.
 */
typedef struct DunklTransform DunklTransform;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *dunkl_version(void);

/**
 * Copies the last error message of this thread into `buf` (NUL-terminated,
 * truncated to `len`). Returns the full message length, 0 when there is none.
 *
 * # Safety
 * `buf` must be null or point to `len` writable bytes.
 */
size_t dunkl_last_error(char *buf, size_t len);

/**
 * Builds a transform for multiplicities `k[0..dim]` on `[-radius, radius]^dim`
 * with `nodes` points per axis.
 *
 * # Safety
 * `k` must point to `dim` readable doubles and `out` to a writable handle slot.
 */
enum DunklStatus dunkl_transform_new(const double *k,
                                     size_t dim,
                                     double radius,
                                     size_t nodes,
                                     struct DunklTransform **out);

/**
 * # Safety
 * `t` must be null or a handle from [`dunkl_transform_new`] not yet freed.
 */
void dunkl_transform_free(struct DunklTransform *t);

/**
 * Number of grid points; 0 for a null handle.
 *
 * # Safety
 * `t` must be null or a live handle.
 */
size_t dunkl_transform_len(const struct DunklTransform *t);

/**
 * Writes the space nodes, `dim` coordinates per point, row-major.
 *
 * # Safety
 * `coords` must point to `dim * dunkl_transform_len(t)` writable doubles.
 */
enum DunklStatus dunkl_transform_nodes(const struct DunklTransform *t, double *coords);

/**
 * Forward transform of the grid samples. `im_in` may be null for real input.
 *
 * # Safety
 * Input buffers must hold `dunkl_transform_len(t)` doubles, outputs likewise writable.
 */
enum DunklStatus dunkl_transform_forward(const struct DunklTransform *t,
                                         const double *re_in,
                                         const double *im_in,
                                         double *re_out,
                                         double *im_out);

/**
 * Inverse transform; same buffer contract as [`dunkl_transform_forward`].
 *
 * # Safety
 * See [`dunkl_transform_forward`].
 */
enum DunklStatus dunkl_transform_inverse(const struct DunklTransform *t,
                                         const double *re_in,
                                         const double *im_in,
                                         double *re_out,
                                         double *im_out);

/**
 * `E_k(ix, y)` for the multiplicities `k[0..dim]`.
 *
 * # Safety
 * `k`, `x`, `y` must point to `dim` doubles; `re`, `im` must be writable.
 */
enum DunklStatus dunkl_kernel_eval(const double *k,
                                   size_t dim,
                                   const double *x,
                                   const double *y,
                                   double *re,
                                   double *im);

/**
 * Plans the direct bilinear quadrature of a named symbol (`one`, `zero`,
 * `product-ratio`, `difference-ratio`).
 *
 * # Safety
 * `t` must be a live handle, `symbol` a NUL-terminated string, `out` writable.
 */
enum DunklStatus dunkl_bilinear_new(const struct DunklTransform *t,
                                    const char *symbol,
                                    struct DunklBilinearPlan **out);

/**
 * # Safety
 * `p` must be null or a handle from [`dunkl_bilinear_new`] not yet freed.
 */
void dunkl_bilinear_free(struct DunklBilinearPlan *p);

/**
 * `T_m(f1, f2)` on the space grid. Null imaginary inputs mean real data.
 *
 * # Safety
 * `p` must have been planned on `t`; all buffers hold `dunkl_transform_len(t)` doubles.
 */
enum DunklStatus dunkl_bilinear_apply(const struct DunklBilinearPlan *p,
                                      const struct DunklTransform *t,
                                      const double *f1_re,
                                      const double *f1_im,
                                      const double *f2_re,
                                      const double *f2_im,
                                      double *re_out,
                                      double *im_out);

/**
 * Calderon-Zygmund decomposition of real samples at height `lambda`; writes the
 * good part and returns the number of bad cubes in `pieces`.
 *
 * # Safety
 * `f` and `good` must hold `dunkl_transform_len(t)` doubles; `pieces` writable.
 */
enum DunklStatus dunkl_cz_decompose(const struct DunklTransform *t,
                                    const double *f,
                                    double lambda,
                                    double *good,
                                    size_t *pieces);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DUNKL_H */
