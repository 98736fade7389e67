#ifndef FREEENT_H
#define FREEENT_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result code of every fallible call.
typedef enum FeStatus {
  FE_STATUS_OK = 0,
  FE_STATUS_NULL_POINTER = 1,
  FE_STATUS_INVALID_ARGUMENT = 2,
  FE_STATUS_NUMERICAL_FAILURE = 3,
  FE_STATUS_BUFFER_TOO_SMALL = 4,
  FE_STATUS_PANIC = 5,
} FeStatus;

// Opaque square complex matrix.
typedef struct FeMatrix FeMatrix;

// A complex number, layout-compatible with C99 `double _Complex`.
typedef struct FeComplex {
  double re;
  double im;
} FeComplex;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or null. The pointer is
// valid until the next call into this library on the same thread.
const char *fe_last_error(void);

// Builds a `dim x dim` matrix from `dim * dim` row-major entries.
//
// # Safety
// `data` must point to `dim * dim` readable values and `out` must be writable.
enum FeStatus fe_matrix_new(size_t dim, const struct FeComplex *data, struct FeMatrix **out);

// Releases a matrix. Null is ignored.
//
// # Safety
// `m` must come from this library and not be used afterwards.
void fe_matrix_free(struct FeMatrix *m);

// Dimension of `m`, or 0 for null.
//
// # Safety
// `m` must be null or a live handle.
size_t fe_matrix_dim(const struct FeMatrix *m);

// Entry `(i, j)`.
//
// # Safety
// `m` must be a live handle and `out` writable.
enum FeStatus fe_matrix_get(const struct FeMatrix *m, size_t i, size_t j, struct FeComplex *out);

// Samples an ensemble given as JSON, e.g. `{"kind":"ginibre","dim":100}`.
//
// # Safety
// `ensemble_json` must be a NUL-terminated string and `out` writable.
enum FeStatus fe_ensemble_sample(const char *ensemble_json, uint64_t seed, struct FeMatrix **out);

// Writes the `dim(m)` eigenvalues to `out`, which holds `capacity` values.
//
// # Safety
// `m` must be a live handle and `out` must have room for `capacity` values.
enum FeStatus fe_eigenvalues(const struct FeMatrix *m, struct FeComplex *out, size_t capacity);

// Largest singular value.
//
// # Safety
// `m` must be a live handle and `out` writable.
enum FeStatus fe_operator_norm(const struct FeMatrix *m, double *out);

// Fuglede-Kadison determinant `|det m|^(1/N)`.
//
// # Safety
// `m` must be a live handle and `out` writable.
enum FeStatus fe_fk_determinant(const struct FeMatrix *m, double *out);

// `tr(m m*) - (1/N) sum |lambda_i|^2`.
//
// # Safety
// `m` must be a live handle and `out` writable.
enum FeStatus fe_offdiag_second_moment(const struct FeMatrix *m, double *out);

// Normalized trace of a word over `{1, *}`, e.g. `"1*1*"`.
//
// # Safety
// `m` must be a live handle, `w` a NUL-terminated string and `out` writable.
enum FeStatus fe_trace_word(const struct FeMatrix *m, const char *w, struct FeComplex *out);

// Star moment of a circular element, i.e. the number of noncrossing
// pairings of the word that match each `1` with a `*`.
//
// # Safety
// `w` must be a NUL-terminated string and `out` writable.
enum FeStatus fe_circular_moment(const char *w, uint64_t *out);

// Logarithmic energy of a measure given as JSON; `-inf` for atoms.
//
// # Safety
// `measure_json` must be a NUL-terminated string and `out` writable.
enum FeStatus fe_log_energy(const char *measure_json, double *out);

// Entropy of the diagonal part, `log_energy + 3/4 + log(pi)/2`.
//
// # Safety
// `measure_json` must be a NUL-terminated string and `out` writable.
enum FeStatus fe_diagonal_entropy(const char *measure_json, double *out);

// Entropy upper bound for Brown measure `measure_json` and offdiagonality `od`.
//
// # Safety
// `measure_json` must be a NUL-terminated string and `out` writable.
enum FeStatus fe_entropy_upper_bound(const char *measure_json, double od, double *out);

// Normalized log-volume of the offdiagonal ball at dimension `n`.
//
// # Safety
// `out` must be writable.
enum FeStatus fe_ball_log_volume(size_t n, double od, double *out);

// Schur decomposition `m = U T U*`. Both outputs are new handles.
//
// # Safety
// `m` must be a live handle; `unitary` and `triangular` must be writable.
enum FeStatus fe_schur(const struct FeMatrix *m,
                       struct FeMatrix **unitary,
                       struct FeMatrix **triangular);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* FREEENT_H */
