#ifndef FSDE_H
#define FSDE_H

/* Generated by cbindgen; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes.
 */
typedef enum {
  FSDE_STATUS_OK = 0,
  FSDE_STATUS_NULL_POINTER = 1,
  FSDE_STATUS_INVALID_ARGUMENT = 2,
  /**
   * Divergence, or a tolerance that could not be met.
   */
  FSDE_STATUS_NUMERICAL = 3,
  FSDE_STATUS_IO = 4,
  FSDE_STATUS_BUFFER_TOO_SMALL = 5,
  /**
   * A Rust panic was caught at the boundary.
   */
  FSDE_STATUS_PANIC = 6,
} FsdeStatus;

/**
 * Solver selection for [`fsde_solve`].
 */
typedef enum {
  FSDE_METHOD_DIRECT = 0,
  FSDE_METHOD_FAST = 1,
} FsdeMethod;

typedef struct FsdeProblem FsdeProblem;

typedef struct FsdeSoe FsdeSoe;

typedef struct FsdeTrajectory FsdeTrajectory;

/**
 * `f(t, y)` or `g(t, y)` written to `out`; `y` and `out` hold `dim` values.
 */
typedef void (*FsdeVectorField)(double t, const double *y, double *out, size_t dim, void *user_data);

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failure on this thread, or null. The pointer stays
 * valid until the next failing call on the same thread.
 */
const char *fsde_last_error_message(void);

/**
 * Library version as a static string.
 */
const char *fsde_version(void);

/**
 * Builds a sum-of-exponentials approximation of `t^-alpha` on
 * `[delta, horizon]` with absolute error at most `epsilon`.
 */
FsdeStatus fsde_soe_build(double alpha,
                          double epsilon,
                          double delta,
                          double horizon,
                          FsdeSoe **out);

/**
 * Number of exponential terms, 0 for a null handle.
 */
size_t fsde_soe_len(const FsdeSoe *soe);

/**
 * Copies weights and exponents into caller buffers of length `capacity`.
 */
FsdeStatus fsde_soe_terms(const FsdeSoe *soe, double *weights, double *exponents, size_t capacity);

FsdeStatus fsde_soe_eval(const FsdeSoe *soe, double t, double *out);

/**
 * Maximum absolute error against `t^-alpha` over `samples` log-spaced
 * points in `[delta, horizon]`.
 */
FsdeStatus fsde_soe_validate(const FsdeSoe *soe, size_t samples, double *out);

void fsde_soe_free(FsdeSoe *soe);

/**
 * Instantiates a catalog problem by id. `horizon <= 0` keeps the default.
 */
FsdeStatus fsde_problem_from_catalog(const char *id, double horizon, FsdeProblem **out);

/**
 * Problem with caller-supplied coefficients. The callbacks may be invoked
 * concurrently from several threads when the problem is used in a study,
 * and must stay valid, together with `user_data`, until the handle is freed.
 */
FsdeStatus fsde_problem_from_callbacks(size_t dim,
                                       const double *y0,
                                       double horizon,
                                       FsdeVectorField drift,
                                       FsdeVectorField diffusion,
                                       void *user_data,
                                       FsdeProblem **out);

size_t fsde_problem_dim(const FsdeProblem *problem);

void fsde_problem_free(FsdeProblem *problem);

/**
 * Fills `increments[0..steps]` with the Brownian increments of the path
 * with this seed on the uniform grid of `steps` cells over `[0, horizon]`.
 */
FsdeStatus fsde_brownian_sample(uint64_t seed,
                                double horizon,
                                size_t steps,
                                double *increments,
                                size_t capacity);

/**
 * Path seed used by studies for path `index` under `base_seed`.
 */
uint64_t fsde_path_seed(uint64_t base_seed, size_t index);

/**
 * Solves on the grid defined by the problem horizon and `steps = n_increments`,
 * driven by the given increments. `soe_epsilon` is ignored by the direct method.
 */
FsdeStatus fsde_solve(const FsdeProblem *problem,
                      const double *alphas,
                      size_t n_alphas,
                      FsdeMethod method,
                      double soe_epsilon,
                      const double *increments,
                      size_t n_increments,
                      FsdeTrajectory **out);

/**
 * Number of time nodes, `steps + 1`.
 */
size_t fsde_trajectory_len(const FsdeTrajectory *traj);

size_t fsde_trajectory_dim(const FsdeTrajectory *traj);

/**
 * Row-major `len x dim` states, owned by the handle.
 */
const double *fsde_trajectory_values(const FsdeTrajectory *traj);

void fsde_trajectory_free(FsdeTrajectory *traj);

/**
 * Runs a convergence study described by a JSON study configuration and
 * returns the JSON report in `*out`, to be released with [`fsde_string_free`].
 */
FsdeStatus fsde_run_study_json(const char *config_json, char **out);

void fsde_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* FSDE_H */
