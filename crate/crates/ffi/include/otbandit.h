#ifndef OTBANDIT_H
#define OTBANDIT_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes returned by every entry point.
 */
typedef enum OtbStatus {
  /**
   * Success.
   */
  OTB_STATUS_OK = 0,
  /**
   * A required pointer argument was null.
   */
  OTB_STATUS_NULL_POINTER = 1,
  /**
   * Arguments failed validation (dimensions, ranges, UTF-8).
   */
  OTB_STATUS_INVALID_ARGUMENT = 2,
  /**
   * JSON parsing or serialization failed.
   */
  OTB_STATUS_JSON = 3,
  /**
   * A solver reported an error.
   */
  OTB_STATUS_SOLVER = 4,
  /**
   * The solve hit its iteration budget; outputs carry the flagged result.
   */
  OTB_STATUS_UNCONVERGED = 5,
  /**
   * Internal panic; state may be inconsistent.
   */
  OTB_STATUS_INTERNAL = 6,
} OtbStatus;

/**
 * Opaque environment handle.
 */
typedef struct OtbEnv OtbEnv;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *otb_version(void);

/**
 * Copy the last error message into `buf` (NUL-terminated, truncated to
 * `cap`). Returns the full message length.
 */
uintptr_t otb_last_error_message(char *buf, uintptr_t cap);

/**
 * Build an environment from an env-spec JSON document (the `env` block of
 * an experiment config). On success `*out` owns the handle.
 *
 * # Safety
 * `json` must be a NUL-terminated string and `out` a valid pointer.
 */
enum OtbStatus otb_env_from_json(const char *json, struct OtbEnv **out);

/**
 * # Safety
 * `env` must come from [`otb_env_from_json`] and not be freed twice.
 */
void otb_env_free(struct OtbEnv *env);

/**
 * Grid dimensions of the environment.
 *
 * # Safety
 * All pointers must be valid.
 */
enum OtbStatus otb_env_grid(const struct OtbEnv *env, uintptr_t *out_k, uintptr_t *out_kp);

/**
 * Instance hash (hex, NUL-terminated) into a caller buffer of length `cap`.
 *
 * # Safety
 * All pointers must be valid.
 */
enum OtbStatus otb_env_hash(const struct OtbEnv *env, char *buf, uintptr_t cap);

/**
 * Lipschitz constant of the environment's true cost on its grid.
 *
 * # Safety
 * All pointers must be valid.
 */
enum OtbStatus otb_env_lipschitz(const struct OtbEnv *env, double *out);

/**
 * Exact Kantorovich value of a `k x kp` cost table (row-major) under the
 * marginal weights `mu` (length `k`) and `nu` (length `kp`). Optionally
 * writes the optimal plan into `out_plan` (length `k*kp`).
 *
 * # Safety
 * Array pointers must reference buffers of the stated lengths.
 */
enum OtbStatus otb_kantorovich(const double *cost,
                               uintptr_t k,
                               uintptr_t kp,
                               const double *mu,
                               const double *nu,
                               double *out_value,
                               double *out_plan);

/**
 * Entropic solve at level `epsilon` with marginal-violation tolerance `tol`
 * and iteration budget `max_iter`. Fills the rounded feasible plan
 * (`out_plan`, length `k*kp`, optional), the certified primal value and the
 * duality gap. Returns `Unconverged` when the budget was hit; outputs are
 * still the flagged result.
 *
 * # Safety
 * Array pointers must reference buffers of the stated lengths.
 */
enum OtbStatus otb_sinkhorn(const double *cost,
                            uintptr_t k,
                            uintptr_t kp,
                            const double *mu,
                            const double *nu,
                            double epsilon,
                            double tol,
                            uintptr_t max_iter,
                            double *out_plan,
                            double *out_value,
                            double *out_gap,
                            uintptr_t *out_iterations);

/**
 * Run a full experiment config (JSON) and return the export envelope as a
 * JSON string (records plus metadata). Free the result with
 * [`otb_string_free`]. Null on failure.
 *
 * # Safety
 * `json` must be a NUL-terminated string.
 */
char *otb_run_experiment_json(const char *json);

/**
 * # Safety
 * `s` must come from this library and not be freed twice.
 */
void otb_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* OTBANDIT_H */
