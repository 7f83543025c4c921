#ifndef OPTBENCH_H
#define OPTBENCH_H

/* Generated by cbindgen from src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Stage tag of a record.
 */
#define OB_STAGE_BO 0

#define OB_STAGE_EA 1

typedef enum ObStatus {
  OB_STATUS_OK = 0,
  OB_STATUS_INVALID_ARGUMENT = 1,
  OB_STATUS_OUT_OF_BOUNDS = 2,
  OB_STATUS_DIMENSION_MISMATCH = 3,
  OB_STATUS_NUMERIC = 4,
  OB_STATUS_OBJECTIVE = 5,
  OB_STATUS_IO = 6,
  OB_STATUS_PARSE = 7,
  OB_STATUS_NULL_POINTER = 8,
  OB_STATUS_PANIC = 9,
} ObStatus;

/**
 * A finished optimizer run.
 */
typedef struct ObTrace ObTrace;

/**
 * Objective callback for [`ob_run_custom`]. Returns the value to maximize
 * at `x[0..dims]`; setting `*failed` to a nonzero value aborts the run.
 */
typedef double (*ObObjectiveFn)(const double *x, size_t dims, void *user_data, int *failed);

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or an empty string.
 * The pointer stays valid until the next failing call on this thread.
 */
const char *ob_last_error(void);

/**
 * Library version as a static string.
 */
const char *ob_version(void);

/**
 * Runs `algorithm` ("bo", "ea" or "bea") on a built-in benchmark
 * ("griewank", "rastrigin" or "schwefel") with default settings.
 *
 * # Safety
 * `function` and `algorithm` must be NUL-terminated strings; `out` must be
 * a valid pointer. On success `*out` receives a handle to free with
 * [`ob_trace_free`].
 */
enum ObStatus ob_run_benchmark(const char *function,
                               const char *algorithm,
                               size_t dims,
                               size_t iters,
                               uint64_t seed,
                               struct ObTrace **out);

/**
 * Runs `algorithm` on a caller-supplied objective over the box
 * `[lower, upper]`, maximizing. `theta` is the GP length scale in
 * normalized units.
 *
 * # Safety
 * `lower` and `upper` must point to `dims` doubles, `algorithm` must be a
 * NUL-terminated string and `out` a valid pointer. `objective` is called
 * on this thread with `user_data` passed through unchanged.
 */
enum ObStatus ob_run_custom(const char *algorithm,
                            const double *lower,
                            const double *upper,
                            size_t dims,
                            size_t iters,
                            uint64_t seed,
                            double theta,
                            ObObjectiveFn objective,
                            void *user_data,
                            struct ObTrace **out);

/**
 * Releases a trace. Null is ignored.
 *
 * # Safety
 * `trace` must be null or a handle returned by this library that has not
 * been freed.
 */
void ob_trace_free(struct ObTrace *trace);

/**
 * Number of records, or 0 for a null handle.
 *
 * # Safety
 * `trace` must be null or a live handle.
 */
size_t ob_trace_len(const struct ObTrace *trace);

/**
 * Dimension of record `i`'s solution (0 for traces read from CSV).
 *
 * # Safety
 * `trace` must be a live handle and `dims` a valid pointer.
 */
enum ObStatus ob_trace_solution_dims(const struct ObTrace *trace, size_t i, size_t *dims);

/**
 * Objective, overhead and stage ([`OB_STAGE_BO`] or [`OB_STAGE_EA`]) of
 * record `i`. Any output pointer may be null.
 *
 * # Safety
 * `trace` must be a live handle; non-null outputs must be valid.
 */
enum ObStatus ob_trace_record(const struct ObTrace *trace,
                              size_t i,
                              double *objective,
                              double *overhead_s,
                              int *stage);

/**
 * Copies record `i`'s solution into `buf`, which holds `len` doubles.
 *
 * # Safety
 * `trace` must be a live handle and `buf` must point to `len` writable
 * doubles.
 */
enum ObStatus ob_trace_solution(const struct ObTrace *trace, size_t i, double *buf, size_t len);

/**
 * Best objective among records `1..=i`.
 *
 * # Safety
 * `trace` must be a live handle and `out` a valid pointer.
 */
enum ObStatus ob_best_so_far(const struct ObTrace *trace, size_t i, double *out);

/**
 * Improvement of the best objective between iterations `k` and `i`.
 *
 * # Safety
 * `trace` must be a live handle and `out` a valid pointer.
 */
enum ObStatus ob_gain(const struct ObTrace *trace, size_t k, size_t i, double *out);

/**
 * Time spent between iterations `k` and `i` with evaluation time `te`.
 *
 * # Safety
 * `trace` must be a live handle and `out` a valid pointer.
 */
enum ObStatus ob_interval_cost(const struct ObTrace *trace,
                               size_t k,
                               size_t i,
                               double te,
                               double *out);

/**
 * Gain per second between iterations `k` and `i`.
 *
 * # Safety
 * `trace` must be a live handle and `out` a valid pointer.
 */
enum ObStatus ob_time_efficiency(const struct ObTrace *trace,
                                 size_t k,
                                 size_t i,
                                 double te,
                                 double *out);

/**
 * Writes the trace as CSV (`iter,f,f_best,overhead_s`).
 *
 * # Safety
 * `trace` must be a live handle and `path` a NUL-terminated string.
 */
enum ObStatus ob_trace_save_csv(const struct ObTrace *trace, const char *path);

/**
 * Reads a trace CSV. Solutions are not stored in the file, so records of
 * the returned trace have dimension 0 and stage BO.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid pointer.
 */
enum ObStatus ob_trace_load_csv(const char *path, struct ObTrace **out);

/**
 * One-sided Mann–Whitney U test that sample `a` tends to exceed `b`.
 * `u` may be null.
 *
 * # Safety
 * `a` and `b` must point to `na` and `nb` doubles; `p_value` must be
 * valid.
 */
enum ObStatus ob_mann_whitney_greater(const double *a,
                                      size_t na,
                                      const double *b,
                                      size_t nb,
                                      double *p_value,
                                      double *u);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* OPTBENCH_H */
