#ifndef STRUCTKDE_H
#define STRUCTKDE_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of every fallible call.
 */
typedef enum SkStatus {
  SK_STATUS_OK = 0,
  SK_STATUS_NULL_POINTER = 1,
  SK_STATUS_INVALID_ARGUMENT = 2,
  SK_STATUS_SAMPLE_TOO_SMALL = 3,
  SK_STATUS_CERTIFICATION = 4,
  SK_STATUS_NUMERIC = 5,
  SK_STATUS_CONFIG = 6,
  SK_STATUS_IO = 7,
  SK_STATUS_PANIC = 8,
} SkStatus;

/**
 * U-statistic evaluation strategy.
 */
typedef enum SkMode {
  SK_MODE_NAIVE = 0,
  SK_MODE_PRUNED = 1,
} SkMode;

typedef struct SkKernel SkKernel;

typedef struct SkModel SkModel;

typedef struct SkNet SkNet;

typedef struct SkSample SkSample;

/**
 * Outcome of a selection rule.
 */
typedef struct SkSelection {
  double h_hat;
  /**
   * Selected rotation angle in degrees.
   */
  double theta_q;
  size_t q_index;
  double estimate;
  /**
   * `Û_n` of the adaptive stage.
   */
  double u_hat;
} SkSelection;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread; empty if none. The
 * pointer stays valid until the next failing call on the same thread.
 */
const char *sk_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *sk_version(void);

/**
 * Legendre kernel with vanishing moments up to `2 * order_floor + 1`.
 *
 * # Safety
 * `out` must be valid for writes.
 */
enum SkStatus sk_kernel_new(size_t order_floor, struct SkKernel **out);

/**
 * # Safety
 * `k` must be null or a handle from [`sk_kernel_new`] not yet freed.
 */
void sk_kernel_free(struct SkKernel *k);

/**
 * # Safety
 * `k` must be a live kernel handle and `out` valid for writes.
 */
enum SkStatus sk_kernel_eval(const struct SkKernel *k, double u, double *out);

/**
 * Sample from `n` interleaved coordinate pairs `x0, y0, x1, y1, ...`.
 *
 * # Safety
 * `xy` must point to `2 * n` readable doubles; `out` must be valid for writes.
 */
enum SkStatus sk_sample_new(const double *xy, size_t n, struct SkSample **out);

/**
 * # Safety
 * `s` must be a live sample handle and `out` valid for writes.
 */
enum SkStatus sk_sample_len(const struct SkSample *s, size_t *out);

/**
 * # Safety
 * `s` must be null or a sample handle not yet freed.
 */
void sk_sample_free(struct SkSample *s);

/**
 * Perturbed Gaussian marginals (`ε = eps`) in `H(beta, l)`, rotated by `theta` degrees.
 *
 * # Safety
 * `out` must be valid for writes.
 */
enum SkStatus sk_model_perturbed(double beta,
                                 double l,
                                 double eps,
                                 double theta,
                                 struct SkModel **out);

/**
 * Independent Gaussian marginals with scales `sigma1`, `sigma2`, rotated by `theta` degrees.
 *
 * # Safety
 * `out` must be valid for writes.
 */
enum SkStatus sk_model_gaussian(double sigma1,
                                double sigma2,
                                double theta,
                                double beta,
                                double l,
                                struct SkModel **out);

/**
 * # Safety
 * `m` must be a live model handle and `out` valid for writes.
 */
enum SkStatus sk_model_density(const struct SkModel *m, double x, double y, double *out);

/**
 * # Safety
 * `m` must be a live model handle and `out` valid for writes.
 */
enum SkStatus sk_model_sample(const struct SkModel *m,
                              size_t n,
                              uint64_t seed,
                              struct SkSample **out);

/**
 * # Safety
 * `m` must be null or a model handle not yet freed.
 */
void sk_model_free(struct SkModel *m);

/**
 * Uniform net on `[0°, 90°)` with separation at least `delta`.
 *
 * # Safety
 * `out` must be valid for writes.
 */
enum SkStatus sk_net_new(double delta, struct SkNet **out);

/**
 * # Safety
 * `net` must be a live net handle and `out` valid for writes.
 */
enum SkStatus sk_net_len(const struct SkNet *net, size_t *out);

/**
 * Angle of member `index` in degrees.
 *
 * # Safety
 * `net` must be a live net handle and `out` valid for writes.
 */
enum SkStatus sk_net_angle(const struct SkNet *net, size_t index, double *out);

/**
 * # Safety
 * `net` must be null or a net handle not yet freed.
 */
void sk_net_free(struct SkNet *net);

/**
 * Product estimator along the rotation `theta_d` (degrees).
 *
 * # Safety
 * Handles must be live and `out` valid for writes.
 */
enum SkStatus sk_product_estimate(const struct SkKernel *k,
                                  const struct SkSample *s,
                                  double x,
                                  double y,
                                  double h,
                                  double theta_d,
                                  double *out);

/**
 * Combined estimator for the rotation pair `(theta_d, theta_q)` (degrees).
 *
 * # Safety
 * Handles must be live and `out` valid for writes.
 */
enum SkStatus sk_auxiliary_estimate(const struct SkKernel *k,
                                    const struct SkSample *s,
                                    double x,
                                    double y,
                                    double h,
                                    double theta_d,
                                    double theta_q,
                                    enum SkMode mode,
                                    double *out);

/**
 * Adaptive rule with multiplier `a_mult` on the theoretical constant.
 *
 * # Safety
 * Handles must be live and `out` valid for writes.
 */
enum SkStatus sk_adaptive_select(const struct SkKernel *k,
                                 const struct SkSample *s,
                                 const struct SkNet *net,
                                 double x,
                                 double y,
                                 double p,
                                 double a_mult,
                                 struct SkSelection *out);

/**
 * Minimax rule for known `(beta, l)` with multiplier `b_mult`.
 *
 * # Safety
 * Handles must be live and `out` valid for writes.
 */
enum SkStatus sk_minimax_select(const struct SkKernel *k,
                                const struct SkSample *s,
                                const struct SkNet *net,
                                double x,
                                double y,
                                double beta,
                                double l,
                                double p,
                                double b_mult,
                                bool no_split,
                                struct SkSelection *out);

/**
 * Runs a risk experiment from its JSON config and returns the report CSV,
 * to be released with [`sk_string_free`].
 *
 * # Safety
 * `config_json` must be a NUL-terminated string; `out` valid for writes.
 */
enum SkStatus sk_risk_report(const char *config_json, char **out);

/**
 * # Safety
 * `s` must be null or a string returned by this library and not yet freed.
 */
void sk_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* STRUCTKDE_H */
