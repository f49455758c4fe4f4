#ifndef SWITCHOPT_H
#define SWITCHOPT_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes. Zero is success; everything else is an error.
 */
typedef enum SwoStatus {
  SWO_OK = 0,
  SWO_NULL_POINTER = 1,
  /**
   * Bad argument, dimension, grid or simplex row.
   */
  SWO_INVALID_ARGUMENT = 2,
  SWO_UNKNOWN_PROBLEM = 3,
  /**
   * Configuration, problem file, CSV or I/O failure.
   */
  SWO_IO = 4,
  /**
   * Simulation blow-up, no admissible projection order, or
   * enumeration too large.
   */
  SWO_NUMERICAL = 5,
  SWO_BUFFER_TOO_SMALL = 6,
  SWO_PANIC = 7,
} SwoStatus;

/**
 * Termination reason of [`swo_solve`], matching the CLI exit codes.
 */
typedef enum SwoSolveStatus {
  SWO_STATIONARY = 0,
  SWO_STALLED = 2,
  SWO_MAX_ITER = 3,
} SwoSolveStatus;

/**
 * Values for the `topology` argument of [`swo_solve`].
 */
typedef enum SwoTopology {
  SWO_TERMINAL_STATE = 0,
  SWO_FULL_TRAJECTORY = 1,
} SwoTopology;

typedef struct SwoProblem SwoProblem;

typedef struct SwoSignal SwoSignal;

typedef struct SwoSolveResult SwoSolveResult;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread; empty after a
 * successful call. Valid until the next `swo_*` call on the same thread.
 */
const char *swo_last_error_message(void);

/**
 * # Safety
 * `name` must be a NUL-terminated string and `out` a valid pointer.
 */
enum SwoStatus swo_problem_builtin(const char *name, struct SwoProblem **out);

/**
 * Loads a problem file (TOML).
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid pointer.
 */
enum SwoStatus swo_problem_load(const char *path, struct SwoProblem **out);

/**
 * # Safety
 * `p` must come from `swo_problem_*` and not be used afterwards.
 */
void swo_problem_free(struct SwoProblem *p);

/**
 * # Safety
 * `p` must be a live problem handle; the out pointers may be null.
 */
enum SwoStatus swo_problem_dims(const struct SwoProblem *p,
                                size_t *n_x,
                                size_t *n_sigma,
                                double *t_f);

/**
 * Relaxed signal on a uniform grid of `n_cells` cells over `[0, t_f]`.
 * `weights` holds `n_cells * n_sigma` values, one simplex row per cell.
 *
 * # Safety
 * `weights` must point to `n_cells * n_sigma` readable doubles.
 */
enum SwoStatus swo_signal_new(double t_f,
                              size_t n_cells,
                              size_t n_sigma,
                              const double *weights,
                              struct SwoSignal **out);

/**
 * The default starting signal for `problem` on `n_cells` uniform cells.
 *
 * # Safety
 * `problem` must be a live handle and `out` a valid pointer.
 */
enum SwoStatus swo_signal_initial(const struct SwoProblem *problem,
                                  size_t n_cells,
                                  struct SwoSignal **out);

/**
 * # Safety
 * `s` must come from a `swo_*` constructor and not be used afterwards.
 */
void swo_signal_free(struct SwoSignal *s);

/**
 * Number of cells, or 0 for a null handle.
 *
 * # Safety
 * `s` must be null or a live signal handle.
 */
size_t swo_signal_n_cells(const struct SwoSignal *s);

/**
 * Copies the `n_cells + 1` cell boundaries into `buf`.
 *
 * # Safety
 * `s` must be a live handle and `buf` must hold `len` doubles.
 */
enum SwoStatus swo_signal_boundaries(const struct SwoSignal *s, double *buf, size_t len);

/**
 * Copies the `n_cells * n_sigma` weights (row per cell) into `buf`.
 *
 * # Safety
 * `s` must be a live handle and `buf` must hold `len` doubles.
 */
enum SwoStatus swo_signal_weights(const struct SwoSignal *s, double *buf, size_t len);

/**
 * Simulates from the problem's initial state; writes `x(t_f)` (`n_x`
 * values) and, when `cost` is non-null, the terminal cost.
 *
 * # Safety
 * Handles must be live; `x_tf` must hold `len` doubles.
 */
enum SwoStatus swo_simulate(const struct SwoProblem *problem,
                            const struct SwoSignal *signal,
                            size_t substeps,
                            double *x_tf,
                            size_t len,
                            double *cost);

/**
 * Optimality function value; when `direction` is non-null it receives a
 * new handle for the vertex-valued descent target.
 *
 * # Safety
 * Handles must be live and `theta` a valid pointer.
 */
enum SwoStatus swo_theta(const struct SwoProblem *problem,
                         const struct SwoSignal *signal,
                         size_t substeps,
                         double *theta,
                         struct SwoSignal **direction);

/**
 * Pulse-width projection with `2^k` periods.
 *
 * # Safety
 * `signal` must be live and `out` a valid pointer.
 */
enum SwoStatus swo_project(const struct SwoSignal *signal, uint32_t k, struct SwoSignal **out);

/**
 * Runs the solver with default settings, the given [`SwoTopology`] and
 * iteration cap, on the grid of `initial` (which must be pure).
 *
 * # Safety
 * Handles must be live and `out` a valid pointer.
 */
enum SwoStatus swo_solve(const struct SwoProblem *problem,
                         const struct SwoSignal *initial,
                         uint32_t topology,
                         size_t max_iter,
                         struct SwoSolveResult **out);

/**
 * # Safety
 * `r` must come from [`swo_solve`] and not be used afterwards.
 */
void swo_result_free(struct SwoSolveResult *r);

/**
 * Termination reason, final cost and number of outer iterations.
 *
 * # Safety
 * `r` must be live; the out pointers may be null.
 */
enum SwoStatus swo_result_summary(const struct SwoSolveResult *r,
                                  enum SwoSolveStatus *status,
                                  double *cost,
                                  size_t *iterations);

/**
 * # Safety
 * `r` must be live and `buf` must hold `len` doubles.
 */
enum SwoStatus swo_result_terminal_state(const struct SwoSolveResult *r, double *buf, size_t len);

/**
 * New handle holding the final pure signal.
 *
 * # Safety
 * `r` must be live and `out` a valid pointer.
 */
enum SwoStatus swo_result_solution(const struct SwoSolveResult *r, struct SwoSignal **out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SWITCHOPT_H */
