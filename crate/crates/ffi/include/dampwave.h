#ifndef DAMPWAVE_H
#define DAMPWAVE_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum DwSettingKind {
  DW_SETTING_KIND_EUCLIDEAN = 0,
  DW_SETTING_KIND_HEISENBERG = 1,
} DwSettingKind;

typedef enum DwStatus {
  DW_STATUS_OK = 0,
  DW_STATUS_NULL_POINTER = 1,
  DW_STATUS_INVALID_ARGUMENT = 2,
  DW_STATUS_OUT_OF_SCOPE = 3,
  DW_STATUS_NUMERICAL = 4,
  DW_STATUS_REFUSED = 5,
  DW_STATUS_IO = 6,
  DW_STATUS_PANIC = 7,
} DwStatus;

/**
 * Opaque simulation result.
 */
typedef struct DwTrajectory DwTrajectory;

typedef struct DwPropagator {
  double a;
  double b;
  double a_t;
  double b_t;
} DwPropagator;

typedef struct DwDecayFit {
  double slope;
  double intercept;
  double stderr;
  size_t n_points;
} DwDecayFit;

typedef struct DwSample {
  double t;
  double l2;
  double h1dot;
  double linf;
  double hneg;
} DwSample;

typedef struct DwRunStatus {
  /**
   * 1 when the run crossed the blow-up threshold.
   */
  int32_t blow_up;
  /**
   * Horizon reached, or the midpoint of the blow-up bracket.
   */
  double time;
  double bracket_lo;
  double bracket_hi;
  int32_t under_resolved;
} DwRunStatus;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the calling thread's last error message into `buf` (NUL-terminated,
 * truncated to `len`). Returns the full message length plus one.
 *
 * # Safety
 * `buf` must be null or point to `len` writable bytes.
 */
size_t dw_last_error_message(char *buf, size_t len);

/**
 * Library version as a static NUL-terminated string.
 */
const char *dw_version(void);

/**
 * Critical power `1 + 4/(d + 2γ)`, `d` the (homogeneous) dimension.
 *
 * # Safety
 * `out_p` must be null or valid for writes.
 */
enum DwStatus dw_critical_exponent(enum DwSettingKind kind,
                                   uint32_t n,
                                   double gamma,
                                   double *out_p);

/**
 * Positive root of `2γ² + dγ − 2d = 0`.
 *
 * # Safety
 * `out` must be null or valid for writes.
 */
enum DwStatus dw_gamma_tilde(enum DwSettingKind kind, uint32_t n, double *out);

/**
 * Writes 1 to `out_admissible` when `γ` is admissible, 0 otherwise.
 * Returns `OutOfScope` (and writes 0) when the setting is not covered at all.
 *
 * # Safety
 * `out_admissible` must be null or valid for writes.
 */
enum DwStatus dw_check_admissibility(enum DwSettingKind kind,
                                     uint32_t n,
                                     double gamma,
                                     int32_t *out_admissible);

/**
 * Entries of the exact mode propagator of `w'' + w' + k²w = 0` at time `t`.
 *
 * # Safety
 * `out` must be null or valid for writes.
 */
enum DwStatus dw_propagator(double t, double k2, struct DwPropagator *out);

/**
 * Least-squares fit of `log y` against `log(1+t)` for `t_lo <= t <= t_hi`.
 *
 * # Safety
 * `t` and `y` must point to `len` readable values; `out` must be valid for writes.
 */
enum DwStatus dw_fit_decay(const double *t,
                           const double *y,
                           size_t len,
                           double t_lo,
                           double t_hi,
                           struct DwDecayFit *out);

/**
 * Runs the simulation described by a JSON setup (the `simulation` section of a run config).
 *
 * # Safety
 * `setup_json` must be a NUL-terminated string; `out` must be valid for writes.
 * The handle written to `out` must be released with [`dw_trajectory_free`].
 */
enum DwStatus dw_trajectory_simulate(const char *setup_json, struct DwTrajectory **out);

/**
 * Number of recorded samples; 0 for a null handle.
 *
 * # Safety
 * `h` must be null or a live handle.
 */
size_t dw_trajectory_len(const struct DwTrajectory *h);

/**
 * # Safety
 * `h` must be null or a live handle; `out` must be valid for writes.
 */
enum DwStatus dw_trajectory_sample(const struct DwTrajectory *h,
                                   size_t index,
                                   struct DwSample *out);

/**
 * # Safety
 * `h` must be null or a live handle; `out` must be valid for writes.
 */
enum DwStatus dw_trajectory_status(const struct DwTrajectory *h, struct DwRunStatus *out);

/**
 * Releases a handle; null is ignored.
 *
 * # Safety
 * `h` must be null or a handle not yet freed.
 */
void dw_trajectory_free(struct DwTrajectory *h);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DAMPWAVE_H */
