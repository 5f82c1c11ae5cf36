#ifndef EXTENT_CBF_H
#define EXTENT_CBF_H

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

typedef enum EcbfStatus {
  ECBF_STATUS_OK = 0,
  ECBF_STATUS_NULL_POINTER = 1,
  ECBF_STATUS_INVALID_ARGUMENT = 2,
  ECBF_STATUS_DIMENSION_MISMATCH = 3,
  ECBF_STATUS_CONFIG = 4,
  ECBF_STATUS_PARSE = 5,
  ECBF_STATUS_IO = 6,
  // The filter or QP has no feasible input; outputs hold a best effort.
  ECBF_STATUS_INFEASIBLE = 7,
  // The solver stopped without a certified answer.
  ECBF_STATUS_NOT_CONVERGED = 8,
  ECBF_STATUS_NUMERICAL = 9,
  ECBF_STATUS_PANIC = 10,
} EcbfStatus;

typedef enum EcbfQpMethod {
  ECBF_QP_METHOD_AUTO = 0,
  ECBF_QP_METHOD_DYKSTRA = 1,
  ECBF_QP_METHOD_ACTIVE_SET = 2,
} EcbfQpMethod;

// Projection problem: minimise |u - k|^2 over rows `a.u >= b` and `|u| <= M`.
typedef struct EcbfQp EcbfQp;

// Scenario loaded from a configuration, with its filter and controller.
typedef struct EcbfScenario EcbfScenario;

typedef struct EcbfFilterInfo {
  // The filter changed the nominal input.
  bool active;
  double solve_ms;
} EcbfFilterInfo;

typedef struct EcbfRunSummary {
  size_t steps;
  double min_boundary_h;
  double min_center_h;
  size_t active_steps;
  // Steps that ended the run early, zero or one.
  size_t halts;
  double solve_ms_median;
  double solve_ms_max;
} EcbfRunSummary;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static NUL-terminated string.
const char *ecbf_version(void);

// Copies the calling thread's last error message into `buf` (truncated and
// always NUL-terminated when `len > 0`). Returns the full message length
// including the terminator, or 0 if there is no message.
//
// # Safety
// `buf` must be null or point to `len` writable bytes.
size_t ecbf_last_error(char *buf, size_t len);

// Builds a scenario from TOML text. On success `*out` owns a new handle.
//
// # Safety
// `toml` must be a NUL-terminated string; `out` must be writable.
enum EcbfStatus ecbf_scenario_from_toml(const char *toml, struct EcbfScenario **out);

// Loads a scenario file. On success `*out` owns a new handle.
//
// # Safety
// `path` must be a NUL-terminated string; `out` must be writable.
enum EcbfStatus ecbf_scenario_load(const char *path, struct EcbfScenario **out);

// Releases a scenario handle. Null is ignored.
//
// # Safety
// `s` must come from this library and not be used afterwards.
void ecbf_scenario_free(struct EcbfScenario *s);

// State and input dimensions of the scenario's system.
//
// # Safety
// `s` must be a live handle; `n` and `m` must be writable.
enum EcbfStatus ecbf_scenario_dimensions(const struct EcbfScenario *s, size_t *n, size_t *m);

// Writes the seeded start state into `x` (length `n`).
//
// # Safety
// `s` must be a live handle; `x` must hold `n` doubles.
enum EcbfStatus ecbf_scenario_initial_state(const struct EcbfScenario *s, double *x, size_t n);

// Nominal controller input at `x`. Waypoint controllers advance their
// target as a side effect, as in a simulation step.
//
// # Safety
// `s` must be a live handle; `x` holds `n` and `u` holds `m` doubles.
enum EcbfStatus ecbf_scenario_nominal(struct EcbfScenario *s,
                                      const double *x,
                                      size_t n,
                                      double *u,
                                      size_t m);

// Filters the nominal input `k` at state `x` and writes the result to
// `u`. Returns `ECBF_STATUS_INFEASIBLE` or `ECBF_STATUS_NOT_CONVERGED` when
// the filter could not certify an input; `u` then holds the solver's last
// iterate and must not be applied as safe. `info` may be null.
//
// # Safety
// `s` must be a live handle; `x` holds `n`, `k` and `u` hold `m` doubles.
enum EcbfStatus ecbf_scenario_filter(const struct EcbfScenario *s,
                                     const double *x,
                                     size_t n,
                                     const double *k,
                                     double *u,
                                     size_t m,
                                     struct EcbfFilterInfo *info);

// One integrator step of length `dt` from `x` under input `u`.
//
// # Safety
// `s` must be a live handle; `x` and `x_next` hold `n`, `u` holds `m` doubles.
enum EcbfStatus ecbf_scenario_step(const struct EcbfScenario *s,
                                   const double *x,
                                   size_t n,
                                   const double *u,
                                   size_t m,
                                   double dt,
                                   double *x_next);

// Runs the whole closed loop and fills `out`. A run that halts on an
// uncertified step still returns `ECBF_STATUS_OK` with `halts == 1`.
//
// # Safety
// `s` must be a live handle; `out` must be writable.
enum EcbfStatus ecbf_scenario_run(struct EcbfScenario *s, struct EcbfRunSummary *out);

// New projection problem with target `k` (length `m`) and ball radius `radius`.
//
// # Safety
// `k` holds `m` doubles; `out` must be writable.
enum EcbfStatus ecbf_qp_new(const double *k, size_t m, double radius, struct EcbfQp **out);

// Appends the row `a.u >= b`.
//
// # Safety
// `q` must be a live handle; `a` holds `m` doubles.
enum EcbfStatus ecbf_qp_add_row(struct EcbfQp *q, const double *a, size_t m, double b);

// Solves the projection. `tol <= 0` and `max_iter == 0` select defaults.
// `objective` may be null.
//
// # Safety
// `q` must be a live handle; `u` holds `m` doubles.
enum EcbfStatus ecbf_qp_solve(const struct EcbfQp *q,
                              enum EcbfQpMethod method,
                              double tol,
                              size_t max_iter,
                              double *u,
                              size_t m,
                              double *objective);

// Releases a QP handle. Null is ignored.
//
// # Safety
// `q` must come from this library and not be used afterwards.
void ecbf_qp_free(struct EcbfQp *q);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* EXTENT_CBF_H */
