#ifndef MPA_H
#define MPA_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Stepsize rule of the outer iteration.
 */
typedef enum MpaStepRule {
  MPA_STEP_RULE_S = 0,
  MPA_STEP_RULE_TILDE = 1,
} MpaStepRule;

typedef enum MpaStatus {
  MPA_STATUS_OK = 0,
  MPA_STATUS_NULL_POINTER = 1,
  MPA_STATUS_INVALID_ARGUMENT = 2,
  MPA_STATUS_INVALID_INPUT = 3,
  MPA_STATUS_NUMERIC_OVERFLOW = 4,
  MPA_STATUS_NUMERIC_FAILURE = 5,
  MPA_STATUS_SPECTRAL_GAP = 6,
  MPA_STATUS_DOMAIN_VIOLATION = 7,
  MPA_STATUS_DEGENERATE_RAY = 8,
  MPA_STATUS_STEPSIZE_UNDERFLOW = 9,
  MPA_STATUS_CONFIG = 10,
  MPA_STATUS_IO = 11,
  MPA_STATUS_PANIC = 12,
} MpaStatus;

/**
 * A discretized problem with its cone family.
 */
typedef struct MpaProblem MpaProblem;

/**
 * Result of a solve.
 */
typedef struct MpaSolution MpaSolution;

/**
 * Outer iteration settings; fill with [`mpa_settings_default`].
 */
typedef struct MpaSettings {
  double eps_stop;
  double alpha;
  double s_init;
  double s_max;
  double s_min;
  size_t max_iters;
  enum MpaStepRule rule;
  uint32_t tilde_grid;
} MpaSettings;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. Valid until the
 * next call into the library on this thread.
 */
const char *mpa_last_error_message(void);

/**
 * Default settings: eps_stop 1e-4, alpha 0.5, s in [1e-12, 1e3] from 1,
 * 10000 iterations, rule S.
 */
struct MpaSettings mpa_settings_default(void);

/**
 * `−Δu + V u = |u|^{p−2}u` on an `n × n` mesh of the unit square.
 *
 * # Safety
 * `out` must be null or point to writable storage for one pointer.
 */
enum MpaStatus mpa_problem_indefinite_new(size_t n,
                                          double potential,
                                          double exponent,
                                          struct MpaProblem **out);

/**
 * Two-component cubic system with self couplings `mu1`, `mu2` and cross
 * coupling `beta`. A nonzero `drop_vanishing` freezes components whose ray
 * coordinate reaches zero instead of failing.
 *
 * # Safety
 * `out` must be null or point to writable storage for one pointer.
 */
enum MpaStatus mpa_problem_system_new(size_t n,
                                      double mu1,
                                      double mu2,
                                      double beta,
                                      int drop_vanishing,
                                      struct MpaProblem **out);

/**
 * Problem from config file text (the `mpa` command-line format).
 *
 * # Safety
 * `text` must be null or a NUL-terminated string; `out` as above.
 */
enum MpaStatus mpa_problem_from_config(const char *text, struct MpaProblem **out);

/**
 * # Safety
 * `problem` must be null or a handle from this library not yet freed.
 */
void mpa_problem_free(struct MpaProblem *problem);

/**
 * Number of field components (1 or 2), 0 for a null handle.
 *
 * # Safety
 * `problem` must be null or a live handle.
 */
size_t mpa_problem_components(const struct MpaProblem *problem);

/**
 * Mesh vertices per component, `(n + 1)²`, 0 for a null handle.
 *
 * # Safety
 * `problem` must be null or a live handle.
 */
size_t mpa_problem_vertices(const struct MpaProblem *problem);

/**
 * Dimension of the negative eigenspace (indefinite problems), -1 for
 * systems or a null handle.
 *
 * # Safety
 * `problem` must be null or a live handle.
 */
int mpa_problem_negative_dim(const struct MpaProblem *problem);

/**
 * Runs the mountain pass iteration. `settings` may be null for the
 * defaults. `u0` may be null for the configured seed; otherwise it holds
 * `components × vertices` values, component-major in vertex order, and
 * boundary entries are ignored. Reaching `max_iters` is not an error; check
 * [`mpa_solution_converged`].
 *
 * # Safety
 * Pointers must be null or valid: `u0` for `u0_len` reads, `out` for one
 * pointer write.
 */
enum MpaStatus mpa_solve(const struct MpaProblem *problem,
                         const struct MpaSettings *settings,
                         const double *u0,
                         size_t u0_len,
                         struct MpaSolution **out);

/**
 * # Safety
 * `solution` must be null or a handle from [`mpa_solve`] not yet freed.
 */
void mpa_solution_free(struct MpaSolution *solution);

/**
 * Energy at the final iterate, NaN for a null handle.
 *
 * # Safety
 * `solution` must be null or a live handle.
 */
double mpa_solution_energy(const struct MpaSolution *solution);

/**
 * `‖∇E‖_H` at the final iterate, NaN for a null handle.
 *
 * # Safety
 * `solution` must be null or a live handle.
 */
double mpa_solution_grad_norm(const struct MpaSolution *solution);

/**
 * Number of outer steps taken.
 *
 * # Safety
 * `solution` must be null or a live handle.
 */
size_t mpa_solution_steps(const struct MpaSolution *solution);

/**
 * 1 if the run stopped at `eps_stop`, 0 otherwise.
 *
 * # Safety
 * `solution` must be null or a live handle.
 */
int mpa_solution_converged(const struct MpaSolution *solution);

/**
 * Copies component `component` at every mesh vertex (vertex order, boundary
 * zeros included) into `buf`, which must hold `len >= vertices` values.
 *
 * # Safety
 * `solution` must be null or a live handle; `buf` null or valid for `len`
 * writes.
 */
enum MpaStatus mpa_solution_values(const struct MpaSolution *solution,
                                   size_t component,
                                   double *buf,
                                   size_t len);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MPA_H */
