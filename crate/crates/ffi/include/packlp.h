#ifndef PACKLP_H
#define PACKLP_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/*
 `halt_mode` for `packlp_run`: stop at the first column that does not fit.
 */
#define PACKLP_HALT 0

/*
 `halt_mode` for `packlp_run`: reject that column and continue.
 */
#define PACKLP_SKIP 1

/*
 Result of every fallible call.
 */
typedef enum PacklpStatus {
  PACKLP_STATUS_OK = 0,
  /*
   I/O or other runtime failure.
   */
  PACKLP_STATUS_FAILURE = 1,
  /*
   Invalid instance or parameter.
   */
  PACKLP_STATUS_VALIDATION = 2,
  /*
   The LP solver could not certify an optimum.
   */
  PACKLP_STATUS_SOLVER = 3,
  PACKLP_STATUS_NULL_POINTER = 4,
  PACKLP_STATUS_INVALID_UTF8 = 5,
  /*
   A Rust panic was caught at the boundary.
   */
  PACKLP_STATUS_PANIC = 6,
  /*
   A caller buffer is too short.
   */
  PACKLP_STATUS_BUFFER_TOO_SMALL = 7,
} PacklpStatus;

typedef struct PacklpInstance PacklpInstance;

typedef struct PacklpSolution PacklpSolution;

typedef struct PacklpTrace PacklpTrace;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Message of the last failed call on this thread, or NULL. The pointer is
 valid until the next call into this library on the same thread.
 */
const char *packlp_last_error(void);

/*
 Releases a string returned by this library. NULL is ignored.

 # Safety
 `s` must come from this library and not have been freed.
 */
void packlp_string_free(char *s);

/*
 Builds an instance from `n` rewards and an `n × m` column-major matrix
 (column `t` occupies `columns[t*m .. t*m+m]`).

 # Safety
 `rewards` must hold `n` values, `columns` `n*m` values.
 */
enum PacklpStatus packlp_instance_new(const double *rewards,
                                      const double *columns,
                                      size_t n,
                                      size_t m,
                                      double budget,
                                      struct PacklpInstance **out);

/*
 Parses an instance from JSON with fields `n`, `m`, `budget`, `rewards`,
 `columns`.

 # Safety
 `json` must be a NUL-terminated string.
 */
enum PacklpStatus packlp_instance_from_json(const char *json, struct PacklpInstance **out);

/*
 Draws an instance from a generator spec such as
 `{"family":"k-subspace","k":3,"seed":7}`.

 # Safety
 `spec_json` must be a NUL-terminated string.
 */
enum PacklpStatus packlp_instance_generate(const char *spec_json,
                                           size_t n,
                                           size_t m,
                                           double budget,
                                           struct PacklpInstance **out);

/*
 # Safety
 `instance` must be a live handle and `out` writable.
 */
enum PacklpStatus packlp_instance_to_json(const struct PacklpInstance *instance, char **out);

/*
 Number of columns, or 0 for NULL.

 # Safety
 `instance` must be NULL or a live handle.
 */
size_t packlp_instance_n(const struct PacklpInstance *instance);

/*
 Number of rows, or 0 for NULL.

 # Safety
 `instance` must be NULL or a live handle.
 */
size_t packlp_instance_m(const struct PacklpInstance *instance);

/*
 # Safety
 `instance` must be NULL or a handle not yet freed.
 */
void packlp_instance_free(struct PacklpInstance *instance);

/*
 Solves the offline LP. A positive `budget` replaces the instance budget;
 pass 0 to keep it.

 # Safety
 `instance` must be a live handle and `out` writable.
 */
enum PacklpStatus packlp_solve(const struct PacklpInstance *instance,
                               double budget,
                               struct PacklpSolution **out);

/*
 Optimal objective value, or NaN for NULL.

 # Safety
 `solution` must be NULL or a live handle.
 */
double packlp_solution_value(const struct PacklpSolution *solution);

/*
 Copies the `n` primal values into `buf` of length `len`.

 # Safety
 `buf` must be writable for `len` values.
 */
enum PacklpStatus packlp_solution_primal(const struct PacklpSolution *solution,
                                         double *buf,
                                         size_t len);

/*
 Copies the `m` dual prices into `buf` of length `len`.

 # Safety
 `buf` must be writable for `len` values.
 */
enum PacklpStatus packlp_solution_prices(const struct PacklpSolution *solution,
                                         double *buf,
                                         size_t len);

/*
 # Safety
 `solution` must be a live handle and `out` writable.
 */
enum PacklpStatus packlp_solution_to_json(const struct PacklpSolution *solution, char **out);

/*
 # Safety
 `solution` must be NULL or a handle not yet freed.
 */
void packlp_solution_free(struct PacklpSolution *solution);

/*
 Runs one algorithm (`"greedy"`, `"otp"`, `"robust-otp"`, `"robust-dpa"`)
 on the arrival order drawn from `seed`.

 # Safety
 `instance` must be a live handle, `algorithm` NUL-terminated, `out` writable.
 */
enum PacklpStatus packlp_run(const struct PacklpInstance *instance,
                             const char *algorithm,
                             double epsilon,
                             uint64_t seed,
                             int halt_mode,
                             struct PacklpTrace **out);

/*
 Total reward collected, or NaN for NULL.

 # Safety
 `trace` must be NULL or a live handle.
 */
double packlp_trace_value(const struct PacklpTrace *trace);

/*
 1 if the accepted columns fit the budget, 0 if not, -1 for NULL.

 # Safety
 `trace` must be NULL or a live handle.
 */
int packlp_trace_feasible(const struct PacklpTrace *trace);

/*
 Number of accepted columns, or 0 for NULL.

 # Safety
 `trace` must be NULL or a live handle.
 */
size_t packlp_trace_accepted(const struct PacklpTrace *trace);

/*
 # Safety
 `trace` must be a live handle and `out` writable.
 */
enum PacklpStatus packlp_trace_to_json(const struct PacklpTrace *trace, char **out);

/*
 # Safety
 `trace` must be NULL or a handle not yet freed.
 */
void packlp_trace_free(struct PacklpTrace *trace);

/*
 Runs an experiment described by a JSON experiment config and returns the
 report as JSON.

 # Safety
 `config_json` must be NUL-terminated and `out` writable.
 */
enum PacklpStatus packlp_run_experiment(const char *config_json, char **out);

/*
 Bernstein tail bound; pass NaN as `sigma_sq` for the variance-free form.

 # Safety
 `out` must be writable.
 */
enum PacklpStatus packlp_bernstein_tail_bound(size_t s,
                                              double mu,
                                              double sigma_sq,
                                              double tau,
                                              double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PACKLP_H */
