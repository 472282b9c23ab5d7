#ifndef CYCLONE_TIPPING_H
#define CYCLONE_TIPPING_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

// Result codes. `InvalidArgument`, `NumericalFailure` and `NotConverged` share their values
// with the command-line exit codes.
typedef enum CtStatus {
  CT_STATUS_OK = 0,
  CT_STATUS_NULL_POINTER = 1,
  CT_STATUS_INVALID_ARGUMENT = 2,
  CT_STATUS_NUMERICAL_FAILURE = 3,
  CT_STATUS_NOT_CONVERGED = 4,
  CT_STATUS_BUFFER_TOO_SMALL = 5,
  CT_STATUS_PANIC = 6,
} CtStatus;

typedef enum CtVerdict {
  CT_VERDICT_TRACKED = 0,
  CT_VERDICT_TIPPED_TO_O = 1,
  CT_VERDICT_UNDETERMINED = 2,
} CtVerdict;

typedef enum CtBasin {
  CT_BASIN_O = 0,
  CT_BASIN_S = 1,
} CtBasin;

// Opaque model parameters.
typedef struct CtModel CtModel;

// Opaque converged transition path.
typedef struct CtPath CtPath;

// Opaque UTF-8 text buffer.
typedef struct CtText CtText;

// Equilibria in the order O, U, S; `count` is 1 when only O exists.
typedef struct CtFixedPoints {
  uint32_t count;
  double v[3];
  double m[3];
} CtFixedPoints;

// First-transition statistics of an ensemble. Times are NaN when nothing tipped.
typedef struct CtEnsembleStats {
  uint64_t n_realizations;
  uint64_t n_tipped;
  double tip_fraction;
  double tip_time_mean;
  double tip_time_median;
} CtEnsembleStats;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static NUL-terminated string.
const char *ct_version(void);

// Message of the last failed call on this thread, or null. Valid until the next call on
// this thread.
const char *ct_last_error_message(void);

// Creates a model with validated parameters.
//
// # Safety
// `out` must be a valid pointer to writable storage for one handle.
enum CtStatus ct_model_new(double gamma, double c, struct CtModel **out);

// Releases a model; null is ignored.
//
// # Safety
// `model` must come from [`ct_model_new`] and not have been freed.
void ct_model_free(struct CtModel *model);

// Drift (dv/dτ, dm/dτ) at (v, m).
//
// # Safety
// `model` must be a live handle; `out_dv` and `out_dm` must be writable.
enum CtStatus ct_model_vector_field(const struct CtModel *model,
                                    double v,
                                    double m,
                                    double *out_dv,
                                    double *out_dm);

// Equilibria of the model.
//
// # Safety
// `model` must be a live handle; `out` must be writable.
enum CtStatus ct_model_fixed_points(const struct CtModel *model, struct CtFixedPoints *out);

// Deterministic ramped run from S⁻ with the default ramp at rate `r`.
//
// # Safety
// `out` must be writable.
enum CtStatus ct_rate_tip(double r, double gamma, enum CtVerdict *out);

// Bisection for the critical ramp rate of the default ramp.
//
// # Safety
// `out_lo` and `out_hi` must be writable.
enum CtStatus ct_critical_rate(double gamma,
                               double r_lo,
                               double r_hi,
                               double tol,
                               double *out_lo,
                               double *out_hi);

// Euler-Maruyama ensemble from O or S with equal noise on both components.
//
// # Safety
// `model` must be a live handle; `out` must be writable.
enum CtStatus ct_ensemble_run(const struct CtModel *model,
                              enum CtBasin start,
                              double sigma,
                              double dt,
                              double tau_f,
                              uint64_t seed,
                              uint64_t count,
                              struct CtEnsembleStats *out);

// Most probable O to S path on `[0, tau_f]` with `nodes` grid points.
//
// # Safety
// `model` must be a live handle; `out` must be writable.
enum CtStatus ct_mpp_solve(const struct CtModel *model,
                           double sigma1,
                           double sigma2,
                           double tau_f,
                           uint64_t nodes,
                           struct CtPath **out);

// Number of nodes of a path, or 0 for null.
//
// # Safety
// `path` must be null or a live handle.
uint64_t ct_path_len(const struct CtPath *path);

// Discrete action of the path, or NaN for null.
//
// # Safety
// `path` must be null or a live handle.
double ct_path_action(const struct CtPath *path);

// Gradient-flow iterations used, or 0 for null.
//
// # Safety
// `path` must be null or a live handle.
uint64_t ct_path_iterations(const struct CtPath *path);

// Copies τ, v and m into caller buffers of length `len`, which must be at least the path length.
//
// # Safety
// `path` must be a live handle; each buffer must hold `len` doubles.
enum CtStatus ct_path_copy(const struct CtPath *path,
                           double *tau,
                           double *v,
                           double *m,
                           uint64_t len);

// Releases a path; null is ignored.
//
// # Safety
// `path` must come from [`ct_mpp_solve`] and not have been freed.
void ct_path_free(struct CtPath *path);

// Runs a command by its command-line name with a TOML configuration (null or empty for
// defaults) and returns the JSON result envelope.
//
// # Safety
// `command` must be a NUL-terminated string; `config_toml` null or NUL-terminated; `out`
// writable.
enum CtStatus ct_run_command(const char *command, const char *config_toml, struct CtText **out);

// NUL-terminated contents of a text buffer, or null for null. Valid until the buffer is freed.
//
// # Safety
// `text` must be null or a live handle.
const char *ct_text_data(const struct CtText *text);

// Releases a text buffer; null is ignored.
//
// # Safety
// `text` must come from this library and not have been freed.
void ct_text_free(struct CtText *text);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CYCLONE_TIPPING_H */
