#ifndef QCANTOR_H
#define QCANTOR_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

// Result codes.
typedef enum QcStatus {
  QC_STATUS_OK = 0,
  QC_STATUS_NULL_POINTER = 1,
  QC_STATUS_INVALID_UTF8 = 2,
  QC_STATUS_INVALID_DESCRIPTOR = 3,
  QC_STATUS_GUARD = 4,
  QC_STATUS_INVALID_PARAMETER = 5,
  QC_STATUS_OUT_OF_RANGE = 6,
  QC_STATUS_NOT_CONVERGED = 7,
  QC_STATUS_INTERNAL = 8,
} QcStatus;

// A basic sequence `(q_n)`.
typedef struct QcSequence QcSequence;

// A digit stream `(E_n)`.
typedef struct QcStream QcStream;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// The most recent error message on this thread, or null. Free with
// [`qc_string_free`].
char *qc_last_error(void);

// Frees a string returned by this library. Null is ignored.
//
// # Safety
// `s` must come from this library and not be freed twice.
void qc_string_free(char *s);

// Library version, static storage.
const char *qc_version(void);

// Builds a sequence from a descriptor such as `xi:base=[constant:6];c=2,1,2;d=4`.
//
// # Safety
// `descriptor` must be a nul-terminated string and `out` writable.
enum QcStatus qc_sequence_new(const char *descriptor, struct QcSequence **out);

// # Safety
// `seq` must come from [`qc_sequence_new`] and not be freed twice.
void qc_sequence_free(struct QcSequence *seq);

// `q_n = mantissa * 2^shift`.
//
// # Safety
// `seq` must be a live handle; `mantissa` and `shift` writable.
enum QcStatus qc_sequence_q_at(const struct QcSequence *seq,
                               uint64_t n,
                               uint64_t *mantissa,
                               uint64_t *shift);

// Builds a digit stream from a descriptor such as `eta:preset=factorial;t=2`.
//
// # Safety
// `descriptor` must be a nul-terminated string and `out` writable.
enum QcStatus qc_stream_new(const char *descriptor, struct QcStream **out);

// # Safety
// `stream` must come from [`qc_stream_new`] and not be freed twice.
void qc_stream_free(struct QcStream *stream);

// The digit `E_n`, `n >= 1`.
//
// # Safety
// `stream` must be a live handle and `digit` writable.
enum QcStatus qc_stream_digit_at(const struct QcStream *stream, uint64_t n, uint64_t *digit);

// Counts `block` in `stream` up to `horizon` in `mode` (`plain`, `apI:m:r`,
// `apII:m:r`) and the matching denominator under `seq`.
//
// # Safety
// Handles must be live, `digits` must hold `len` values, outputs writable.
enum QcStatus qc_count(const struct QcStream *stream,
                       const struct QcSequence *seq,
                       const uint64_t *digits,
                       uintptr_t len,
                       const char *mode,
                       uint64_t horizon,
                       uint64_t *count,
                       double *denominator);

// Predicted limit of `N/Q^{(k)}` for a ψ-image under Ξ(P, c, d). `c` is a
// comma-separated list of rationals such as `2,1/2,2`. Writes the value as a
// double and, when `exact` is non-null, as a string freed with
// [`qc_string_free`].
//
// # Safety
// Strings must be nul-terminated; `value` writable; `exact` null or writable.
enum QcStatus qc_predicted_limit(const char *c,
                                 uint64_t d,
                                 uint64_t k,
                                 const char *mode,
                                 double *value,
                                 char **exact);

// Solves `S_k(c) = 1 + eps_k` inside the box. `eps` may be null for all
// zeros. `c_out` must hold `t` doubles; it is filled even when the solve
// stalls, in which case the status is `NotConverged`.
//
// # Safety
// `eps` null or `t` readable doubles; `c_out` `t` writable doubles;
// `max_residual` writable.
enum QcStatus qc_solve_box(uintptr_t t, const double *eps, double *c_out, double *max_residual);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* QCANTOR_H */
