#ifndef SECUREFILTER_H
#define SECUREFILTER_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum SsfStatus {
  SSF_STATUS_OK = 0,
  SSF_STATUS_NULL_POINTER = 1,
  SSF_STATUS_INVALID_PARAMETER = 2,
  SSF_STATUS_DIMENSION_MISMATCH = 3,
  SSF_STATUS_NUMERICAL = 4,
  SSF_STATUS_CONFIG_PARSE = 5,
  SSF_STATUS_CONFIG_INVALID = 6,
  SSF_STATUS_IO = 7,
  SSF_STATUS_PANIC = 8,
} SsfStatus;

typedef enum SsfMode {
  SSF_MODE_NOMINAL = 0,
  SSF_MODE_FILTERED = 1,
  SSF_MODE_FALLBACK = 2,
} SsfMode;

/**
 * Opaque secure filter handle.
 */
typedef struct SsfFilter SsfFilter;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the most recent failed call on this thread, or an empty
 * string. The pointer stays valid until the next call into this library
 * from the same thread.
 */
const char *ssf_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *ssf_version(void);

/**
 * Secure filter for the reduced-order drone model with the duplicated
 * 8-sensor output map and an axis-aligned geofence.
 *
 * `bounds` holds `x1_lo, x1_hi, x2_lo, x2_hi`.
 *
 * # Safety
 * `bounds` must point to 4 doubles and `out` to writable storage for a handle.
 */
enum SsfStatus ssf_filter_new_drone(double tau_s,
                                    double ts,
                                    size_t l,
                                    size_t s,
                                    double d_max,
                                    double gamma,
                                    const double *bounds,
                                    struct SsfFilter **out);

/**
 * Secure filter for a general system `x⁺ = Ax + Bu`, `y = Cx` with safe set
 * `{x : Hx + q ≥ 0}`. `a` is n×n, `b` n×m, `c` p×n, `h` r×n, `q` length r.
 *
 * # Safety
 * Every pointer must reference at least as many doubles as its shape
 * implies, and `out` must be writable.
 */
enum SsfStatus ssf_filter_new_linear(size_t n,
                                     size_t m,
                                     size_t p,
                                     const double *a,
                                     const double *b,
                                     const double *c,
                                     double ts,
                                     size_t r,
                                     const double *h,
                                     const double *q,
                                     double gamma,
                                     size_t l,
                                     size_t s,
                                     double d_max,
                                     struct SsfFilter **out);

/**
 * Releases a handle. Null is ignored.
 *
 * # Safety
 * `filter` must come from `ssf_filter_new_*` and not be used afterwards.
 */
void ssf_filter_free(struct SsfFilter *filter);

/**
 * Uses the per-row bound instead of the matrix-norm bound when `per_row` is nonzero.
 *
 * # Safety
 * `filter` must be a live handle.
 */
enum SsfStatus ssf_filter_set_per_row_bound(struct SsfFilter *filter, int per_row);

/**
 * Appends the measurement `y` (length p) to the data window.
 *
 * # Safety
 * `filter` must be a live handle and `y` must point to `p` doubles.
 */
enum SsfStatus ssf_filter_observe(struct SsfFilter *filter, const double *y, size_t p);

/**
 * Filters `u_nom` (length m) into `u_safe`. `mode` and `ball_count` may be null.
 *
 * # Safety
 * `filter` must be a live handle; `u_nom` and `u_safe` must point to `m` doubles.
 */
enum SsfStatus ssf_filter_step(struct SsfFilter *filter,
                               const double *u_nom,
                               size_t m,
                               double *u_safe,
                               enum SsfMode *mode,
                               size_t *ball_count);

/**
 * Empties the data window.
 *
 * # Safety
 * `filter` must be a live handle.
 */
enum SsfStatus ssf_filter_reset(struct SsfFilter *filter);

/**
 * `x = argmin ‖Ox − Y‖∞` for a k×n matrix `o`. Writes n entries to `x` and
 * the optimal residual to `d_lower`.
 *
 * # Safety
 * `o` must point to k·n doubles, `y` to k, `x` to n; `d_lower` must be writable.
 */
enum SsfStatus ssf_inf_norm_fit(const double *o,
                                size_t k,
                                size_t n,
                                const double *y,
                                double *x,
                                double *d_lower);

/**
 * Projects `u_nom` (length m) onto `{u : Gu ≥ h}` with `g` c×m. Sets
 * `*feasible` to 0 and leaves `u` untouched when the set is empty.
 *
 * # Safety
 * `u_nom` and `u` must point to m doubles, `g` to c·m, `h` to c; `feasible` must be writable.
 */
enum SsfStatus ssf_projection_qp(const double *u_nom,
                                 size_t m,
                                 const double *g,
                                 const double *h,
                                 size_t c,
                                 double *u,
                                 int *feasible);

/**
 * Runs a scenario file and writes `trace.csv` and `summary.json` into
 * `out_dir`, which is created if needed.
 *
 * # Safety
 * Both paths must be NUL-terminated strings.
 */
enum SsfStatus ssf_scenario_run(const char *config_path, const char *out_dir, int record_timing);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SECUREFILTER_H */
