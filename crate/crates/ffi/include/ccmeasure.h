#ifndef CCMEASURE_H
#define CCMEASURE_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum ccm_status {
  CCM_STATUS_OK = 0,
  CCM_STATUS_NULL_ARGUMENT = 1,
  CCM_STATUS_INVALID_UTF8 = 2,
  CCM_STATUS_DOMAIN = 3,
  CCM_STATUS_CONFIG = 4,
  CCM_STATUS_INFEASIBLE = 5,
  CCM_STATUS_NUMERIC = 6,
  CCM_STATUS_DEGENERATE_SUPPORT = 7,
  CCM_STATUS_IO = 8,
  CCM_STATUS_PANIC = 9,
} ccm_status;

// Result of a sample-LP solve.
typedef struct ccm_lp_solution ccm_lp_solution;

// A registered optimization problem.
typedef struct ccm_problem ccm_problem;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failing call on this thread; empty if none. The
// pointer stays valid until the next failing call on the same thread.
const char *ccm_last_error(void);

// Library version as a static NUL-terminated string.
const char *ccm_version(void);

// Looks up a registered problem (`"toy1d"`, `"quadrotor"`).
//
// # Safety
// `id` must be a NUL-terminated string; `out` must be writable.
enum ccm_status ccm_problem_new(const char *id, struct ccm_problem **out);

// # Safety
// `problem` must come from [`ccm_problem_new`] and not be used afterwards.
void ccm_problem_free(struct ccm_problem *problem);

// Replaces the risk level `alpha` of the problem.
//
// # Safety
// `problem` must be a live handle.
enum ccm_status ccm_problem_set_alpha(struct ccm_problem *problem, double alpha);

// Decision, scenario and constraint dimensions and the risk level.
//
// # Safety
// `problem` must be a live handle; the out pointers must be writable.
enum ccm_status ccm_problem_info(const struct ccm_problem *problem,
                                 size_t *n,
                                 size_t *s,
                                 size_t *m,
                                 double *alpha);

// Copies the decision box into `lower` and `upper`, each of length `n`.
//
// # Safety
// `problem` must be a live handle; both arrays must hold `n` values.
enum ccm_status ccm_problem_bounds(const struct ccm_problem *problem,
                                   double *lower,
                                   double *upper,
                                   size_t n);

// Cost `J(x)`.
//
// # Safety
// `problem` must be a live handle; `x` must hold `n` values.
enum ccm_status ccm_problem_cost(const struct ccm_problem *problem,
                                 const double *x,
                                 size_t n,
                                 double *out);

// Constraint vector `h(x, delta)` written to `out` (length `m`).
//
// # Safety
// `problem` must be a live handle; arrays must hold the stated lengths.
enum ccm_status ccm_problem_constraint(const struct ccm_problem *problem,
                                       const double *x,
                                       size_t n,
                                       const double *delta,
                                       size_t s,
                                       double *out,
                                       size_t m);

// Empirical satisfaction rate of each decision over the scenarios with
// margin `gamma`. `decisions` is `count_x * n`, `scenarios` is
// `count_delta * s`, `q` receives `count_x` values.
//
// # Safety
// `problem` must be a live handle; arrays must hold the stated lengths.
enum ccm_status ccm_problem_satisfaction(const struct ccm_problem *problem,
                                         const double *decisions,
                                         size_t count_x,
                                         const double *scenarios,
                                         size_t count_delta,
                                         double gamma,
                                         double *q);

// Solves `min c'mu` subject to `sum mu = 1`, `q'mu >= 1 - alpha`, `mu >= 0`.
// An infeasible program still yields a handle; see [`ccm_lp_is_optimal`].
//
// # Safety
// `costs` and `q` must hold `len` values; `out` must be writable.
enum ccm_status ccm_lp_solve(const double *costs,
                             const double *q,
                             size_t len,
                             double alpha,
                             struct ccm_lp_solution **out);

// Same program solved by enumerating vertex pairs; quadratic in `len`.
//
// # Safety
// As [`ccm_lp_solve`].
enum ccm_status ccm_lp_solve_oracle(const double *costs,
                                    const double *q,
                                    size_t len,
                                    double alpha,
                                    struct ccm_lp_solution **out);

// # Safety
// `solution` must come from an LP solve and not be used afterwards.
void ccm_lp_free(struct ccm_lp_solution *solution);

// 1 when the program was feasible, 0 otherwise (also for a null handle).
//
// # Safety
// `solution` must be a live handle or null.
int32_t ccm_lp_is_optimal(const struct ccm_lp_solution *solution);

// Optimal value; `Infeasible` if there is none.
//
// # Safety
// `solution` must be a live handle; `out` must be writable.
enum ccm_status ccm_lp_objective(const struct ccm_lp_solution *solution, double *out);

// Number of atoms in the optimal measure (0 when infeasible).
//
// # Safety
// `solution` must be a live handle or null.
size_t ccm_lp_support_len(const struct ccm_lp_solution *solution);

// Sample index and weight of atom `k`.
//
// # Safety
// `solution` must be a live handle; the out pointers must be writable.
enum ccm_status ccm_lp_atom(const struct ccm_lp_solution *solution,
                            size_t k,
                            size_t *index,
                            double *weight);

// Best single sample with `q_i >= 1 - epsilon`. Returns `Infeasible` when
// no sample qualifies.
//
// # Safety
// `costs` and `q` must hold `len` values; the out pointers must be writable.
enum ccm_status ccm_baseline_solve(const double *costs,
                                   const double *q,
                                   size_t len,
                                   double epsilon,
                                   size_t *index,
                                   double *objective);

// Runs a full solve from `key = value` configuration text (the same keys
// as the command-line config file) and returns the report as JSON in
// `out`, to be released with [`ccm_string_free`]. An infeasible run still
// returns `Ok` with `"status": "infeasible"` in the report.
//
// # Safety
// `config` must be a NUL-terminated string; `out` must be writable.
enum ccm_status ccm_solve_json(const char *config, char **out);

// # Safety
// `s` must come from this library and not be used afterwards.
void ccm_string_free(char *s);

// 95% Wilson score interval for `k` successes in `n` trials.
//
// # Safety
// The out pointers must be writable.
enum ccm_status ccm_wilson_interval(uint64_t k, uint64_t n, double *low, double *high);

// Standard normal CDF.
double ccm_std_normal_cdf(double z);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CCMEASURE_H */
