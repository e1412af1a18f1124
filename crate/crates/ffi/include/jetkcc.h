#ifndef JETKCC_H
#define JETKCC_H

#pragma once

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result codes. The first four match the command-line exit codes.
typedef enum JkStatus {
  JK_STATUS_OK = 0,
  JK_STATUS_CHECK_FAILED = 1,
  JK_STATUS_INVALID_INPUT = 2,
  JK_STATUS_NUMERIC = 3,
  JK_STATUS_NULL_POINTER = 4,
  JK_STATUS_BUFFER_TOO_SMALL = 5,
  JK_STATUS_PANIC = 6,
} JkStatus;

typedef enum JkInvariant {
  JK_INVARIANT_EPSILON = 0,
  JK_INVARIANT_P = 1,
  JK_INVARIANT_R = 2,
  JK_INVARIANT_B = 3,
  JK_INVARIANT_D = 4,
} JkInvariant;

// A loaded problem together with its invariant engine.
typedef struct JkProblem JkProblem;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the last failure on this thread, or NULL. Valid until the
// next call into the library from the same thread.
const char *jk_last_error(void);

// Library version as a static NUL-terminated string.
const char *jk_version(void);

// Loads a problem file from `path`.
//
// # Safety
// `path` must be a NUL-terminated string and `out` a valid pointer.
enum JkStatus jk_problem_load(const char *path, struct JkProblem **out);

// Parses a problem from JSON text.
//
// # Safety
// `json` must be a NUL-terminated string and `out` a valid pointer.
enum JkStatus jk_problem_from_json(const char *json, struct JkProblem **out);

// Releases a problem handle. NULL is ignored.
//
// # Safety
// `p` must come from this library and not be used afterwards.
void jk_problem_free(struct JkProblem *p);

// Writes the temporal and spatial dimensions.
//
// # Safety
// All pointers must be valid.
enum JkStatus jk_problem_dims(const struct JkProblem *p, size_t *m, size_t *n);

// Number of components of an invariant for this problem.
//
// # Safety
// All pointers must be valid.
enum JkStatus jk_invariant_len(const struct JkProblem *p, enum JkInvariant which, size_t *len);

// Evaluates an invariant at the jet point `(t[m], x[n], v[n*m])`, with `v`
// row-major by spatial index. Components are written row-major into `out`.
//
// # Safety
// `t`, `x`, `v` must hold `m`, `n` and `n*m` values; `out` must hold
// `out_len` values.
enum JkStatus jk_evaluate_invariant(const struct JkProblem *p,
                                    enum JkInvariant which,
                                    const double *t,
                                    const double *x,
                                    const double *v,
                                    double *out,
                                    size_t out_len);

// Renders the invariants report for `samples` points drawn with `seed`
// (or the problem's own points). Free the string with [`jk_string_free`].
//
// # Safety
// `p` and `out` must be valid.
enum JkStatus jk_invariants_report(const struct JkProblem *p,
                                   size_t samples,
                                   uint64_t seed,
                                   char **out);

// Releases a string returned by this library. NULL is ignored.
//
// # Safety
// `s` must come from this library and not be used afterwards.
void jk_string_free(char *s);

// Null-space dimension of the `S` constraint system for the constant
// temporal metric `h` (row-major `m*m`).
//
// # Safety
// `h` must hold `m*m` values and `dim` must be valid.
enum JkStatus jk_nullspace_dimension(const double *h, size_t m, size_t *dim);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* JETKCC_H */
