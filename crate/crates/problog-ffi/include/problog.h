#ifndef PROBLOG_H
#define PROBLOG_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

#define PROBLOG_OK 0

#define PROBLOG_ERR_INVALID_ARGUMENT 1

#define PROBLOG_ERR_PARSE 2

#define PROBLOG_ERR_QUERY 3

#define PROBLOG_ERR_NOT_CONVERGED 4

// Opaque program handle.
typedef struct ProblogProgram ProblogProgram;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the most recent failure on this thread. The pointer stays
// valid until the next failing call on the same thread.
const char *problog_last_error(void);

// Parses program text into a new handle. On success writes the handle to
// `out` and returns `PROBLOG_OK`; on failure `out` is untouched.
//
// # Safety
// `text` must be a valid NUL-terminated string; `out` must be a valid
// pointer.
int problog_program_parse(const char *text, struct ProblogProgram **out);

// Appends `p::predicate(source,target)` facts from a TSV/CSV edge list.
//
// # Safety
// `handle` must come from `problog_program_parse`; strings must be valid
// NUL-terminated.
int problog_program_load_graph(struct ProblogProgram *handle,
                               const char *edges_text,
                               const char *predicate);

// Frees a handle. A null pointer is a no-op.
//
// # Safety
// `handle` must come from `problog_program_parse` and not be used after.
void problog_program_free(struct ProblogProgram *handle);

// Exact success probability of `query`.
//
// # Safety
// Pointer arguments as for `problog_program_parse`.
int problog_exact(struct ProblogProgram *handle, const char *query, double *out_probability);

// Probability of the most likely explanation (0 when unprovable).
//
// # Safety
// Pointer arguments as for `problog_program_parse`.
int problog_explain(struct ProblogProgram *handle, const char *query, double *out_probability);

// Probability over the `k` most likely proofs (k >= 1).
//
// # Safety
// Pointer arguments as for `problog_program_parse`.
int problog_kbest(struct ProblogProgram *handle,
                  const char *query,
                  size_t k,
                  double *out_probability);

// Anytime bounds: writes `[low, high]` and returns
// `PROBLOG_ERR_NOT_CONVERGED` (with the interval still written) when the
// width goal is not met within `max_iterations`.
//
// # Safety
// Pointer arguments as for `problog_program_parse`.
int problog_bounds(struct ProblogProgram *handle,
                   const char *query,
                   double interval_width,
                   double initial_threshold,
                   double shrink_factor,
                   size_t max_iterations,
                   double *out_low,
                   double *out_high);

// Monte Carlo estimate. `out_samples` and `out_half_width` may be null.
//
// # Safety
// Pointer arguments as for `problog_program_parse`.
int problog_mc(struct ProblogProgram *handle,
               const char *query,
               double interval_width,
               uint64_t batch_size,
               uint64_t seed,
               size_t threads,
               double *out_estimate,
               uint64_t *out_samples,
               double *out_half_width);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PROBLOG_H */
