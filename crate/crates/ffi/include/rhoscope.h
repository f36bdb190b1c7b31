#ifndef RHOSCOPE_H
#define RHOSCOPE_H

/* Generated by cbindgen; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Status codes returned by every fallible entry point. The numeric values
// of the first four match the CLI exit codes.
#define RHOSCOPE_OK 0

#define RHOSCOPE_VALIDATION 2

#define RHOSCOPE_NUMERICAL 3

#define RHOSCOPE_TOLERANCE 4

#define RHOSCOPE_NULL_ARGUMENT 10

#define RHOSCOPE_INVALID_UTF8 11

#define RHOSCOPE_OUT_OF_RANGE 12

#define RHOSCOPE_PANIC 13

// Opaque handle to a reconstructed matrix estimate plus its run report.
typedef struct RhoscopeMatrix RhoscopeMatrix;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static string; do not free.
const char *rhoscope_version(void);

// Measure the full matrix described by a JSON configuration. On success
// writes a handle to `out` and returns `RHOSCOPE_OK`.
//
// # Safety
// `config_json` must be a valid NUL-terminated string and `out` a valid
// pointer; the returned handle must be released with
// [`rhoscope_matrix_free`].
int32_t rhoscope_matrix_measure(const char *config_json, struct RhoscopeMatrix **out);

// Matrix dimension (`n_max + 1`), or 0 for a null handle.
//
// # Safety
// `handle` must be null or a live handle from [`rhoscope_matrix_measure`].
uint32_t rhoscope_matrix_dim(const struct RhoscopeMatrix *handle);

// Read one complex entry.
//
// # Safety
// `handle` must be a live handle; `out_re` and `out_im` valid pointers.
int32_t rhoscope_matrix_entry(const struct RhoscopeMatrix *handle,
                              uint32_t row,
                              uint32_t col,
                              double *out_re,
                              double *out_im);

// Number of per-element failures recorded in the run report.
//
// # Safety
// `handle` must be null or a live handle.
uint32_t rhoscope_matrix_failures(const struct RhoscopeMatrix *handle);

// The matrix in the documented JSON form; free with
// [`rhoscope_string_free`].
//
// # Safety
// `handle` must be a live handle.
char *rhoscope_matrix_to_json(const struct RhoscopeMatrix *handle);

// The full run report (config echo, conditioning, probabilities) as JSON;
// free with [`rhoscope_string_free`].
//
// # Safety
// `handle` must be a live handle.
char *rhoscope_matrix_report_json(const struct RhoscopeMatrix *handle);

// Release a matrix handle.
//
// # Safety
// `handle` must be null or a live handle; it is invalid afterwards.
void rhoscope_matrix_free(struct RhoscopeMatrix *handle);

// Measure the single element `<n+lambda| rho |n>` described by a JSON
// configuration. Writes the complex value and the conditioning figure
// (`|4c|` for off-diagonals, the diagonal divisor otherwise).
//
// # Safety
// `config_json` must be a valid NUL-terminated string; output pointers
// must be valid.
int32_t rhoscope_element_measure(const char *config_json,
                                 uint32_t n,
                                 uint32_t lambda,
                                 double *out_re,
                                 double *out_im,
                                 double *out_conditioning);

// Copy of the most recent error message on this thread, or null if none;
// free with [`rhoscope_string_free`].
char *rhoscope_last_error_message(void);

// Release a string returned by this library.
//
// # Safety
// `s` must be null or a string returned by a rhoscope function; it is
// invalid afterwards.
void rhoscope_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* RHOSCOPE_H */
