#ifndef HYDROSCHED_H
#define HYDROSCHED_H

/* Generated by cbindgen from crates/ffi/src. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Algorithms available through [`hs_solve`].
 */
typedef enum HsAlgorithm {
  /**
   * Continuous relaxation; its schedule is an upper bound, not a plan.
   */
  HS_ALGORITHM_LP = 0,
  /**
   * Price decomposition.
   */
  HS_ALGORITHM_PRICE = 1,
  /**
   * Interaction prediction.
   */
  HS_ALGORITHM_PREDICT = 2,
  /**
   * Relaxation followed by a nearest-schedule sweep.
   */
  HS_ALGORITHM_HEURISTIC = 3,
} HsAlgorithm;

/**
 * Result codes of the C interface.
 */
typedef enum HsStatus {
  HS_STATUS_OK = 0,
  /**
   * A required pointer argument was null.
   */
  HS_STATUS_NULL_POINTER = 1,
  /**
   * A string argument was not valid UTF-8.
   */
  HS_STATUS_INVALID_UTF8 = 2,
  /**
   * The instance text or file could not be parsed or failed validation.
   */
  HS_STATUS_INVALID_INSTANCE = 3,
  /**
   * An algorithm parameter was out of range.
   */
  HS_STATUS_INVALID_CONFIG = 4,
  /**
   * The algorithm ran but returned no feasible schedule.
   */
  HS_STATUS_NO_FEASIBLE_SCHEDULE = 5,
  /**
   * The continuous relaxation has no solution.
   */
  HS_STATUS_RELAXATION_INFEASIBLE = 6,
  /**
   * A reservoir index or buffer length did not match the solution.
   */
  HS_STATUS_OUT_OF_RANGE = 7,
  HS_STATUS_IO = 8,
  /**
   * Any other library error.
   */
  HS_STATUS_INTERNAL = 9,
  /**
   * A panic was caught at the boundary.
   */
  HS_STATUS_PANIC = 10,
} HsStatus;

/**
 * Opaque valley instance.
 */
typedef struct HsInstance HsInstance;

/**
 * Opaque schedule returned by [`hs_solve`].
 */
typedef struct HsSolution HsSolution;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failing call on this thread; empty if none. The
 * pointer stays valid until the next failing call on the same thread.
 */
const char *hs_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *hs_version(void);

/**
 * Parses an instance from JSON text.
 *
 * # Safety
 *
 * `json` must be a NUL-terminated string and `out` a valid pointer.
 */
enum HsStatus hs_instance_from_json(const char *json, struct HsInstance **out);

/**
 * Reads an instance file.
 *
 * # Safety
 *
 * `path` must be a NUL-terminated string and `out` a valid pointer.
 */
enum HsStatus hs_instance_load(const char *path, struct HsInstance **out);

/**
 * Releases an instance. Null is ignored.
 *
 * # Safety
 *
 * `instance` must come from this library and not be used afterwards.
 */
void hs_instance_free(struct HsInstance *instance);

/**
 * Number of reservoirs, or 0 for a null handle.
 *
 * # Safety
 *
 * `instance` must be null or a live handle.
 */
size_t hs_instance_reservoirs(const struct HsInstance *instance);

/**
 * Number of time steps, or 0 for a null handle.
 *
 * # Safety
 *
 * `instance` must be null or a live handle.
 */
size_t hs_instance_horizon(const struct HsInstance *instance);

/**
 * Upper bound on the gain from the continuous relaxation.
 *
 * # Safety
 *
 * `instance` must be a live handle and `out` a valid pointer.
 */
enum HsStatus hs_lp_bound(const struct HsInstance *instance, double *out);

/**
 * Solves `instance` with `algorithm`, one of the [`HsAlgorithm`] values
 * (anything else gives [`HsStatus::InvalidConfig`]). `max_iters` caps the iterations of
 * the iterative methods; 0 keeps the default. Returns
 * [`HsStatus::NoFeasibleSchedule`] and a null `out` when nothing feasible
 * was found.
 *
 * # Safety
 *
 * `instance` must be a live handle and `out` a valid pointer.
 */
enum HsStatus hs_solve(const struct HsInstance *instance,
                       int32_t algorithm,
                       uint32_t max_iters,
                       struct HsSolution **out);

/**
 * Releases a solution. Null is ignored.
 *
 * # Safety
 *
 * `solution` must come from this library and not be used afterwards.
 */
void hs_solution_free(struct HsSolution *solution);

/**
 * Gain of the schedule (the bound for the relaxation), NaN for null.
 *
 * # Safety
 *
 * `solution` must be null or a live handle.
 */
double hs_solution_gain(const struct HsSolution *solution);

/**
 * 1 when the schedule passes the feasibility check, 0 otherwise or for
 * null.
 *
 * # Safety
 *
 * `solution` must be null or a live handle.
 */
int hs_solution_feasible(const struct HsSolution *solution);

/**
 * Copies the discharges of one reservoir into `buf`, which must hold
 * exactly `horizon` values.
 *
 * # Safety
 *
 * `solution` must be a live handle and `buf` valid for `len` writes.
 */
enum HsStatus hs_solution_discharge(const struct HsSolution *solution,
                                    size_t reservoir,
                                    double *buf,
                                    size_t len);

/**
 * Copies the spillages of one reservoir; `len` must equal `horizon`.
 *
 * # Safety
 *
 * `solution` must be a live handle and `buf` valid for `len` writes.
 */
enum HsStatus hs_solution_spillage(const struct HsSolution *solution,
                                   size_t reservoir,
                                   double *buf,
                                   size_t len);

/**
 * Copies the volumes of one reservoir, initial volume first; `len` must
 * equal `horizon + 1`.
 *
 * # Safety
 *
 * `solution` must be a live handle and `buf` valid for `len` writes.
 */
enum HsStatus hs_solution_volume(const struct HsSolution *solution,
                                 size_t reservoir,
                                 double *buf,
                                 size_t len);

/**
 * Serializes the solution in the schedule file format. Free the string
 * with [`hs_string_free`].
 *
 * # Safety
 *
 * `solution` must be a live handle and `out` a valid pointer.
 */
enum HsStatus hs_solution_to_json(const struct HsSolution *solution, char **out);

/**
 * Releases a string returned by this library. Null is ignored.
 *
 * # Safety
 *
 * `s` must come from this library and not be used afterwards.
 */
void hs_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* HYDROSCHED_H */
