#ifndef LORENZ_LAB_H
#define LORENZ_LAB_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

// How [`ll_transact`] conserved the pair total.
typedef enum ll_conservation {
  LL_CONSERVATION_EXACT = 0,
  LL_CONSERVATION_ROUNDED = 1,
  LL_CONSERVATION_SKIPPED = 2,
} ll_conservation;

// Domain tag of a Lorenz curve.
typedef enum ll_domain {
  LL_DOMAIN_REAL_LINE = 0,
  LL_DOMAIN_POSITIVE_HALF_LINE = 1,
} ll_domain;

// Result code of every fallible call. `LL_STATUS_OK` is zero.
typedef enum ll_status {
  LL_STATUS_OK = 0,
  LL_STATUS_NULL_POINTER = 1,
  LL_STATUS_INVALID_INPUT = 2,
  LL_STATUS_NUMERICAL = 3,
  LL_STATUS_CONFIG = 4,
  LL_STATUS_IO = 5,
  LL_STATUS_BUFFER_TOO_SMALL = 6,
  LL_STATUS_PANIC = 7,
} ll_status;

// Opaque sampled Lorenz curve.
typedef struct ll_curve ll_curve;

// Opaque record of a finished experiment run.
typedef struct ll_run ll_run;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static NUL-terminated string.
const char *ll_version(void);

// Copies the calling thread's last error message into `buf`, NUL-terminated
// and truncated to `len - 1` bytes. Returns the full message length without
// the terminator, or 0 when the last call succeeded.
//
// # Safety
// `buf` is null or valid for `len` bytes of writes.
uintptr_t ll_last_error_message(char *buf, uintptr_t len);

// Gaussian Lorenz curve value at `f` for the given mean and standard deviation.
//
// # Safety
// `out` is valid for one `double` write.
enum ll_status ll_gaussian_lorenz(double f, double mean, double std, double *out);

// Heat-equation Lorenz curve on `count` uniform `f` nodes at time `t`,
// started from a point mass at `a`.
//
// # Safety
// `out` is valid for one pointer write. On success `*out` owns a handle.
enum ll_status ll_curve_heat(uintptr_t count,
                             double t,
                             double diffusion,
                             double a,
                             struct ll_curve **out);

// Curve from `len` values on uniform `f` nodes. The values are copied.
//
// # Safety
// `values` is valid for `len` reads; `out` for one pointer write.
enum ll_status ll_curve_from_values(const double *values,
                                    uintptr_t len,
                                    double time,
                                    enum ll_domain domain,
                                    struct ll_curve **out);

// Number of nodes, or 0 for a null handle.
//
// # Safety
// `curve` is null or a live handle.
uintptr_t ll_curve_len(const struct ll_curve *curve);

// Copies the node values into `buf`, which must hold at least
// [`ll_curve_len`] doubles.
//
// # Safety
// `curve` is a live handle; `buf` is valid for `len` writes.
enum ll_status ll_curve_values(const struct ll_curve *curve, double *buf, uintptr_t len);

// Gini coefficient of a positive-half-line curve.
//
// # Safety
// `curve` is a live handle; `out` is valid for one write.
enum ll_status ll_curve_gini(const struct ll_curve *curve, double *out);

// Releases a curve. Null is ignored.
//
// # Safety
// `curve` is null or a handle not yet freed.
void ll_curve_free(struct ll_curve *curve);

// One yard-sale exchange between wealths `wi` and `wj`. The f64 sum of the
// pair is preserved bit for bit.
//
// # Safety
// Each out-pointer is valid for one write.
enum ll_status ll_transact(double wi,
                           double wj,
                           double gamma,
                           bool i_wins,
                           double *out_wi,
                           double *out_wj,
                           enum ll_conservation *out_tier);

// Loads a TOML experiment file, runs it and writes artifacts under
// `out_dir`, or under the directory named in the file when `out_dir` is null.
//
// # Safety
// `config_path` is a NUL-terminated string; `out_dir` is null or one;
// `out` is valid for one pointer write.
enum ll_status ll_run_config(const char *config_path, const char *out_dir, struct ll_run **out);

// Manifest of a run as compact JSON. The string lives as long as the handle.
//
// # Safety
// `run` is null or a live handle.
const char *ll_run_manifest_json(const struct ll_run *run);

// Number of indexed artifacts the run wrote, or 0 for a null handle.
//
// # Safety
// `run` is null or a live handle.
uintptr_t ll_run_file_count(const struct ll_run *run);

// Releases a run. Null is ignored.
//
// # Safety
// `run` is null or a handle not yet freed.
void ll_run_free(struct ll_run *run);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* LORENZ_LAB_H */
