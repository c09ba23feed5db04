#ifndef EDGEBARRIER_H
#define EDGEBARRIER_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every fallible call.
 */
typedef enum EbStatus {
  EB_STATUS_OK = 0,
  EB_STATUS_NULL_POINTER = 1,
  EB_STATUS_INVALID_ARGUMENT = 2,
  EB_STATUS_BARRIER_VIOLATION = 3,
  EB_STATUS_NUMERICAL = 4,
  EB_STATUS_PRECONDITION = 5,
  EB_STATUS_PANIC = 6,
} EbStatus;

/**
 * Outcome of a lower barrier walk.
 */
typedef struct EbLowerWalk EbLowerWalk;

/**
 * Eigendecomposition of a symmetric matrix.
 */
typedef struct EbSpectrum EbSpectrum;

/**
 * Outcome of an upper barrier walk.
 */
typedef struct EbUpperWalk EbUpperWalk;

/**
 * Scalar summary of a lower walk.
 */
typedef struct EbLowerWalkSummary {
  size_t n;
  size_t m;
  double eps;
  double u0;
  double u_final;
  double lambda_min;
  /**
   * u_final / (√m − √n)².
   */
  double ratio;
  double total_regularity;
  double regularity_budget;
  size_t hard_violations;
  size_t soft_violations;
} EbLowerWalkSummary;

/**
 * Scalar summary of an upper walk.
 */
typedef struct EbUpperWalkSummary {
  size_t n;
  size_t m;
  double eps;
  double alpha;
  double u0;
  double u_final;
  double lambda_max;
  /**
   * u_final / (√m + √n)².
   */
  double ratio;
  double total_regularity;
  double regularity_budget;
  double mean_delta1;
  double mean_delta2;
  size_t hard_violations;
  size_t soft_violations;
} EbUpperWalkSummary;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or "" after a success.
 * The pointer stays valid until the next call into this library on the
 * same thread.
 */
const char *eb_last_error_message(void);

/**
 * Decomposes the symmetric n×n matrix `data`.
 *
 * # Safety
 * `data` must point to n·n readable doubles and `out` to writable storage.
 */
enum EbStatus eb_spectrum_from_matrix(const double *data, size_t n, struct EbSpectrum **out);

/**
 * Releases a spectrum. Null is ignored.
 *
 * # Safety
 * `spectrum` must come from this library and not be used afterwards.
 */
void eb_spectrum_free(struct EbSpectrum *spectrum);

/**
 * Dimension n, or 0 for a null handle.
 *
 * # Safety
 * `spectrum` must be null or a live handle.
 */
size_t eb_spectrum_dim(const struct EbSpectrum *spectrum);

/**
 * Copies the eigenvalues, in descending order, into `out[0..len]`; `len`
 * must equal the dimension.
 *
 * # Safety
 * `spectrum` must be a live handle and `out` must hold `len` doubles.
 */
enum EbStatus eb_spectrum_eigenvalues(const struct EbSpectrum *spectrum, double *out, size_t len);

/**
 * Spectrum of A + xxᵀ as a new handle. `incremental` selects the secular
 * update (non-zero) or a full re-decomposition (zero).
 *
 * # Safety
 * `spectrum` must be a live handle, `x` must hold `n` doubles and `out`
 * must be writable.
 */
enum EbStatus eb_spectrum_rank_one_update(const struct EbSpectrum *spectrum,
                                          const double *x,
                                          size_t n,
                                          int32_t incremental,
                                          struct EbSpectrum **out);

/**
 * tr((A − u)⁻¹) for u below the spectrum.
 *
 * # Safety
 * `spectrum` must be a live handle and `out` writable.
 */
enum EbStatus eb_stieltjes_lower(const struct EbSpectrum *spectrum, double u, double *out);

/**
 * tr((u − A)⁻¹) for u above the spectrum.
 *
 * # Safety
 * `spectrum` must be a live handle and `out` writable.
 */
enum EbStatus eb_stieltjes_upper(const struct EbSpectrum *spectrum, double u, double *out);

/**
 * Support edges ((1 − √ρ)², (1 + √ρ)²) of the Marchenko–Pastur law.
 *
 * # Safety
 * `lower` and `upper` must be writable.
 */
enum EbStatus eb_mp_edges(double rho, double *lower, double *upper);

/**
 * Density of the continuous part of the Marchenko–Pastur law at x.
 *
 * # Safety
 * `out` must be writable.
 */
enum EbStatus eb_mp_density(double rho, double x, double *out);

/**
 * Largest admissible potential slack α for aspect γ = m/n and ε ∈ (0, 1/4].
 *
 * # Safety
 * `out` must be writable.
 */
enum EbStatus eb_select_alpha(double gamma, double eps, double *out);

/**
 * Runs the lower walk over the row-major m×n `samples`.
 *
 * # Safety
 * `samples` must hold m·n doubles and `out` must be writable.
 */
enum EbStatus eb_lower_walk_run(const double *samples,
                                size_t m,
                                size_t n,
                                double eps,
                                struct EbLowerWalk **out);

/**
 * # Safety
 * `walk` must come from this library and not be used afterwards.
 */
void eb_lower_walk_free(struct EbLowerWalk *walk);

/**
 * # Safety
 * `walk` must be a live handle and `out` writable.
 */
enum EbStatus eb_lower_walk_summary(const struct EbLowerWalk *walk, struct EbLowerWalkSummary *out);

/**
 * Copies the barrier positions u_1..u_m into `out[0..len]`; `len` must be m.
 *
 * # Safety
 * `walk` must be a live handle and `out` must hold `len` doubles.
 */
enum EbStatus eb_lower_walk_barriers(const struct EbLowerWalk *walk, double *out, size_t len);

/**
 * Runs the upper walk over the row-major m×n `samples`. `moment_bound` is
 * the bound K on sup_y E|⟨X, y⟩|³ (values below 1 are raised to 1); α is
 * selected for γ = m/n.
 *
 * # Safety
 * `samples` must hold m·n doubles and `out` must be writable.
 */
enum EbStatus eb_upper_walk_run(const double *samples,
                                size_t m,
                                size_t n,
                                double eps,
                                double moment_bound,
                                struct EbUpperWalk **out);

/**
 * # Safety
 * `walk` must come from this library and not be used afterwards.
 */
void eb_upper_walk_free(struct EbUpperWalk *walk);

/**
 * # Safety
 * `walk` must be a live handle and `out` writable.
 */
enum EbStatus eb_upper_walk_summary(const struct EbUpperWalk *walk, struct EbUpperWalkSummary *out);

/**
 * Copies the barrier positions u_1..u_m into `out[0..len]`; `len` must be m.
 *
 * # Safety
 * `walk` must be a live handle and `out` must hold `len` doubles.
 */
enum EbStatus eb_upper_walk_barriers(const struct EbUpperWalk *walk, double *out, size_t len);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* EDGEBARRIER_H */
