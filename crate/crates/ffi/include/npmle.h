#ifndef NPMLE_H
#define NPMLE_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Status codes returned by every fallible function.
typedef enum NpmleStatus {
  NPMLE_STATUS_OK = 0,
  NPMLE_STATUS_NULL_POINTER = 1,
  NPMLE_STATUS_INVALID_ARGUMENT = 2,
  // A parameter or observation is outside the kernel's domain.
  NPMLE_STATUS_DOMAIN = 3,
  NPMLE_STATUS_INVALID_MOMENT_SEQUENCE = 4,
  NPMLE_STATUS_CONSTRUCTION_REJECTED = 5,
  NPMLE_STATUS_UNSUPPORTED_SPEC = 6,
  NPMLE_STATUS_PARSE = 7,
  NPMLE_STATUS_IO = 8,
  NPMLE_STATUS_INTERNAL = 9,
  // A caller-provided buffer is too small.
  NPMLE_STATUS_BUFFER_TOO_SMALL = 10,
  NPMLE_STATUS_PANIC = 11,
} NpmleStatus;

// Values for the `kernel` arguments.
typedef enum NpmleKernel {
  NPMLE_KERNEL_GAUSSIAN = 0,
  NPMLE_KERNEL_POISSON = 1,
  NPMLE_KERNEL_EXPONENTIAL = 2,
} NpmleKernel;

// Opaque sorted sample.
typedef struct NpmleSample NpmleSample;

// Opaque fitted NPMLE.
typedef struct NpmleSolution NpmleSolution;

// Solver options; start from [`npmle_solve_options_default`].
typedef struct NpmleSolveOptions {
  // Nonzero to restrict atoms to `[theta_lo, theta_hi]`.
  int32_t use_window;
  double theta_lo;
  double theta_hi;
  size_t grid_size;
  double kkt_tol;
  size_t max_outer_iters;
} NpmleSolveOptions;

// Optimality certificate of a fit.
typedef struct NpmleCertificate {
  double sup_d;
  // `sup_d − 1`: bound on the per-observation log-likelihood gap.
  double gap_bound;
  double argmax_theta;
  double mean_d;
  double min_atom_d;
  double window_lo;
  double window_hi;
  size_t grid_size_used;
  size_t outer_iters;
  int32_t converged;
} NpmleCertificate;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message describing the last failure on this thread; empty after a
// success. Owned by the library and valid until the next call on the
// same thread.
const char *npmle_last_error_message(void);

// Library version as a static NUL-terminated string.
const char *npmle_version(void);

// Copies `n` observations into a new sample.
//
// # Safety
// `values` must point to `n` readable doubles; `out` must be writable.
enum NpmleStatus npmle_sample_new(const double *values, size_t n, struct NpmleSample **out);

// Draws `n` observations from the mixture described by `spec` (for
// example `"gaussian:mean=0,sd=1"`), seeded by `seed`.
//
// # Safety
// `spec` must be a NUL-terminated string; `out` must be writable.
enum NpmleStatus npmle_sample_simulate(int32_t kernel,
                                       const char *spec,
                                       size_t n,
                                       uint64_t seed,
                                       struct NpmleSample **out);

// Number of observations; 0 for a null handle.
//
// # Safety
// `sample` must be null or a live handle.
size_t npmle_sample_len(const struct NpmleSample *sample);

// Copies the sorted observations into `values`, which holds `capacity`
// doubles.
//
// # Safety
// `sample` must be a live handle and `values` writable for `capacity` doubles.
enum NpmleStatus npmle_sample_values(const struct NpmleSample *sample,
                                     double *values,
                                     size_t capacity);

// # Safety
// `sample` must be null or a handle not yet freed.
void npmle_sample_free(struct NpmleSample *sample);

// Default solver options.
struct NpmleSolveOptions npmle_solve_options_default(void);

// Fits the NPMLE. `options` may be null for the defaults.
//
// # Safety
// `sample` must be a live handle, `options` null or readable, `out` writable.
enum NpmleStatus npmle_fit(int32_t kernel,
                           const struct NpmleSample *sample,
                           const struct NpmleSolveOptions *options,
                           struct NpmleSolution **out);

// Number of atoms; 0 for a null handle.
//
// # Safety
// `solution` must be null or a live handle.
size_t npmle_solution_atom_count(const struct NpmleSolution *solution);

// Copies atoms and weights (sorted by atom) into buffers of `capacity`
// doubles each.
//
// # Safety
// `solution` must be a live handle; `atoms` and `weights` writable for
// `capacity` doubles.
enum NpmleStatus npmle_solution_atoms(const struct NpmleSolution *solution,
                                      double *atoms,
                                      double *weights,
                                      size_t capacity);

// Per-observation log-likelihood of the fit.
//
// # Safety
// `solution` must be a live handle and `out` writable.
enum NpmleStatus npmle_solution_log_likelihood(const struct NpmleSolution *solution, double *out);

// # Safety
// `solution` must be a live handle and `out` writable.
enum NpmleStatus npmle_solution_certificate(const struct NpmleSolution *solution,
                                            struct NpmleCertificate *out);

// The whole fit as a JSON document; release it with [`npmle_string_free`].
//
// # Safety
// `solution` must be a live handle and `out` writable.
enum NpmleStatus npmle_solution_to_json(const struct NpmleSolution *solution, char **out);

// # Safety
// `solution` must be null or a handle not yet freed.
void npmle_solution_free(struct NpmleSolution *solution);

// # Safety
// `s` must be null or a string returned by this library and not yet freed.
void npmle_string_free(char *s);

// Deterministic bound on the number of NPMLE atoms for `sample` under
// `kernel` (Gaussian: critical-point bound with data re-centred; Poisson:
// `max(x_max, 1)`; exponential: zero-counting bound).
//
// # Safety
// `sample` must be a live handle and `out` writable.
enum NpmleStatus npmle_atom_bound(int32_t kernel, const struct NpmleSample *sample, double *out);

// Critical-point bound for a natural-parameter kernel with data in
// `[x_min, x_max]`: writes `N₁` and the bound.
//
// # Safety
// `n1` and `bound` must be writable.
enum NpmleStatus npmle_crit_bound(int32_t kernel,
                                  double x_min,
                                  double x_max,
                                  double delta,
                                  double *n1,
                                  double *bound);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* NPMLE_H */
