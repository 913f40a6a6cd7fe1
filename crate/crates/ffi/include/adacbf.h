#ifndef ADACBF_H
#define ADACBF_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Per-step series readable with [`adacbf_trajectory_column`].
 */
typedef enum AdacbfColumn {
  ADACBF_COLUMN_TIME = 0,
  ADACBF_COLUMN_POSITION = 1,
  ADACBF_COLUMN_SPEED = 2,
  ADACBF_COLUMN_LEAD_POSITION = 3,
  /**
   * Barrier value `b`.
   */
  ADACBF_COLUMN_BARRIER = 4,
  /**
   * First-order constraint value `psi_1` (NaN when absent).
   */
  ADACBF_COLUMN_PSI1 = 5,
  /**
   * Wheel force `u`.
   */
  ADACBF_COLUMN_INPUT = 6,
  /**
   * Penalty `p1` (NaN when absent).
   */
  ADACBF_COLUMN_P1 = 7,
  /**
   * Penalty `p2` (NaN when absent).
   */
  ADACBF_COLUMN_P2 = 8,
  /**
   * 1 for an optimal QP, 0 otherwise.
   */
  ADACBF_COLUMN_FEASIBLE = 9,
} AdacbfColumn;

typedef enum AdacbfMode {
  ADACBF_MODE_ADACBF = 0,
  ADACBF_MODE_HOCBF_BASELINE = 1,
} AdacbfMode;

typedef enum AdacbfPolicy {
  ADACBF_POLICY_HALT = 0,
  ADACBF_POLICY_HOLD_LAST_CONTROL = 1,
  ADACBF_POLICY_CLAMP_TO_BOUNDS = 2,
} AdacbfPolicy;

typedef enum AdacbfQpStatus {
  ADACBF_QP_STATUS_OPTIMAL = 0,
  ADACBF_QP_STATUS_INFEASIBLE = 1,
  ADACBF_QP_STATUS_MAX_ITERATIONS = 2,
} AdacbfQpStatus;

/**
 * Result codes. `ADACBF_STATUS_OK` is zero.
 */
typedef enum AdacbfStatus {
  ADACBF_STATUS_OK = 0,
  ADACBF_STATUS_NULL_POINTER = 1,
  ADACBF_STATUS_INVALID_ARGUMENT = 2,
  ADACBF_STATUS_CONFIG = 3,
  ADACBF_STATUS_SIMULATION = 4,
  ADACBF_STATUS_SOLVER = 5,
  ADACBF_STATUS_BUFFER_TOO_SMALL = 6,
  ADACBF_STATUS_PANIC = 7,
} AdacbfStatus;

/**
 * Opaque scenario configuration.
 */
typedef struct AdacbfScenario AdacbfScenario;

/**
 * Opaque simulation result.
 */
typedef struct AdacbfTrajectory AdacbfTrajectory;

/**
 * Trajectory summary. Optional quantities are NaN when undefined.
 */
typedef struct AdacbfSummary {
  size_t steps;
  double min_b;
  double argmin_b_t;
  double min_psi1;
  double min_p1;
  size_t infeasible_steps;
  double first_infeasible_t;
  double activated_at;
  bool halted;
  double mean_solve_ms;
  double max_solve_ms;
} AdacbfSummary;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or null. Valid until the
 * next call into this library from the same thread.
 */
const char *adacbf_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *adacbf_version(void);

/**
 * Creates a scenario from the built-in library by name.
 *
 * # Safety
 * `name` must be a NUL-terminated string and `out` a valid pointer.
 */
enum AdacbfStatus adacbf_scenario_from_library(const char *name, struct AdacbfScenario **out);

/**
 * Parses and validates a JSON scenario configuration.
 *
 * # Safety
 * `json` must be a NUL-terminated string and `out` a valid pointer.
 */
enum AdacbfStatus adacbf_scenario_from_json(const char *json, struct AdacbfScenario **out);

/**
 * Serializes the scenario as JSON into `buf` (NUL-terminated). `needed`
 * receives the required size including the NUL, also on
 * `BufferTooSmall`. `buf` may be null when `len` is 0.
 *
 * # Safety
 * `scn` must be a live handle, `buf` valid for `len` bytes, `needed` valid
 * or null.
 */
enum AdacbfStatus adacbf_scenario_to_json(const struct AdacbfScenario *scn,
                                          char *buf,
                                          size_t len,
                                          size_t *needed);

/**
 * # Safety
 * `scn` must be a live handle.
 */
enum AdacbfStatus adacbf_scenario_set_mode(struct AdacbfScenario *scn, enum AdacbfMode mode);

/**
 * Sets a constant braking coefficient.
 *
 * # Safety
 * `scn` must be a live handle.
 */
enum AdacbfStatus adacbf_scenario_set_cd(struct AdacbfScenario *scn, double cd);

/**
 * Sets a braking coefficient ramp started at safety-row activation.
 *
 * # Safety
 * `scn` must be a live handle.
 */
enum AdacbfStatus adacbf_scenario_set_cd_ramp(struct AdacbfScenario *scn,
                                              double start,
                                              double end,
                                              double duration);

/**
 * # Safety
 * `scn` must be a live handle.
 */
enum AdacbfStatus adacbf_scenario_set_noise_scale(struct AdacbfScenario *scn, double scale);

/**
 * # Safety
 * `scn` must be a live handle.
 */
enum AdacbfStatus adacbf_scenario_set_horizon(struct AdacbfScenario *scn,
                                              double horizon,
                                              double dt);

/**
 * # Safety
 * `scn` must be a live handle.
 */
enum AdacbfStatus adacbf_scenario_set_penalty_targets(struct AdacbfScenario *scn,
                                                      double p1_star,
                                                      double p2_star);

/**
 * # Safety
 * `scn` must be a live handle.
 */
enum AdacbfStatus adacbf_scenario_set_policy(struct AdacbfScenario *scn, enum AdacbfPolicy policy);

/**
 * # Safety
 * `scn` must be null or a handle not yet freed.
 */
void adacbf_scenario_free(struct AdacbfScenario *scn);

/**
 * Simulates the scenario with the given noise seed.
 *
 * # Safety
 * `scn` must be a live handle and `out` a valid pointer.
 */
enum AdacbfStatus adacbf_scenario_run(const struct AdacbfScenario *scn,
                                      uint64_t seed,
                                      struct AdacbfTrajectory **out);

/**
 * Number of recorded steps, 0 for a null handle.
 *
 * # Safety
 * `traj` must be null or a live handle.
 */
size_t adacbf_trajectory_len(const struct AdacbfTrajectory *traj);

/**
 * # Safety
 * `traj` must be a live handle and `out` a valid pointer.
 */
enum AdacbfStatus adacbf_trajectory_summary(const struct AdacbfTrajectory *traj,
                                            struct AdacbfSummary *out);

/**
 * Copies one per-step series into `buf`, which must hold
 * [`adacbf_trajectory_len`] values.
 *
 * # Safety
 * `traj` must be a live handle and `buf` valid for `len` doubles.
 */
enum AdacbfStatus adacbf_trajectory_column(const struct AdacbfTrajectory *traj,
                                           enum AdacbfColumn column,
                                           double *buf,
                                           size_t len);

/**
 * # Safety
 * `traj` must be null or a handle not yet freed.
 */
void adacbf_trajectory_free(struct AdacbfTrajectory *traj);

/**
 * Solves `min 1/2 w'Hw + f'w  s.t.  Aw <= b` with `H` (`dim x dim`) and `A`
 * (`rows x dim`) row-major. `a` and `b` may be null when `rows` is 0. On
 * `ADACBF_OK` the solver status is in `status`; `w` (length `dim`) holds the
 * minimizer when it is `Optimal` and the last iterate otherwise.
 *
 * # Safety
 * All non-null pointers must be valid for the stated lengths.
 */
enum AdacbfStatus adacbf_qp_solve(size_t dim,
                                  size_t rows,
                                  const double *h,
                                  const double *f,
                                  const double *a,
                                  const double *b,
                                  double *w,
                                  enum AdacbfQpStatus *status);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ADACBF_H */
