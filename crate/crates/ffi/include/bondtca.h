#ifndef BONDTCA_H
#define BONDTCA_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

#define BONDTCA_OK 0

#define BONDTCA_NULL_POINTER 1

#define BONDTCA_INVALID_ARGUMENT 2

#define BONDTCA_DATA 3

#define BONDTCA_NUMERICAL 4

#define BONDTCA_PANIC 5

/**
 * Run configuration.
 */
typedef struct BondtcaConfig BondtcaConfig;

/**
 * Fitted regression.
 */
typedef struct BondtcaFit BondtcaFit;

/**
 * Estimated impact kernel(s) and signature plot.
 */
typedef struct BondtcaKernel BondtcaKernel;

/**
 * Signed event series of one bond.
 */
typedef struct BondtcaSeries BondtcaSeries;

/**
 * Statistic and p-value of a hypothesis test.
 */
typedef struct BondtcaTest {
  double statistic;
  double p_value;
  bool degenerate;
} BondtcaTest;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread (empty after success).
 */
const char *bondtca_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *bondtca_version(void);

/**
 * Default run configuration.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
int32_t bondtca_config_new(struct BondtcaConfig **out);

/**
 * Configuration parsed from TOML text.
 *
 * # Safety
 * `toml` must be NUL-terminated; `out` must be a valid pointer.
 */
int32_t bondtca_config_from_toml(const char *toml, struct BondtcaConfig **out);

/**
 * # Safety
 * `cfg` must be a live handle and `dir` NUL-terminated.
 */
int32_t bondtca_config_set_out_dir(struct BondtcaConfig *cfg, const char *dir);

/**
 * # Safety
 * `cfg` must be a live handle.
 */
int32_t bondtca_config_set_seed(struct BondtcaConfig *cfg, uint64_t seed);

/**
 * # Safety
 * `cfg` must be a handle from this library or null.
 */
void bondtca_config_free(struct BondtcaConfig *cfg);

/**
 * Runs one stage: generate, ingest, classify, spread, features, fit, impact,
 * report, or pipeline (all stages after generate).
 *
 * # Safety
 * `cfg` must be a live handle and `stage` NUL-terminated.
 */
int32_t bondtca_run_stage(const struct BondtcaConfig *cfg, const char *stage);

/**
 * Series from parallel arrays of signs (+1/-1), volumes and mid-prices.
 *
 * # Safety
 * Each array must hold `len` elements; `out` must be a valid pointer.
 */
int32_t bondtca_series_new(const int8_t *eps,
                           const double *volume,
                           const double *mid,
                           size_t len,
                           struct BondtcaSeries **out);

/**
 * # Safety
 * `s` must be a handle from this library or null.
 */
void bondtca_series_free(struct BondtcaSeries *s);

/**
 * Estimates the impact kernel. `model` is 1 (single event type) or 2
 * (buy/sell event types).
 *
 * # Safety
 * `series` must be a live handle; `out` must be a valid pointer.
 */
int32_t bondtca_impact_estimate(const struct BondtcaSeries *series,
                                int32_t model,
                                double alpha,
                                size_t n,
                                size_t l,
                                struct BondtcaKernel **out);

/**
 * Copies `G(0..=N)` for one event type into `buf` and stores the number of
 * values in `written`. Event type 0 for single-type kernels, +1/-1 otherwise.
 *
 * # Safety
 * `k` must be a live handle; `buf` must hold `cap` values; `written` must be valid.
 */
int32_t bondtca_kernel_values(const struct BondtcaKernel *k,
                              int32_t event_type,
                              double *buf,
                              size_t cap,
                              size_t *written);

/**
 * # Safety
 * `k` must be a live handle and `out` valid.
 */
int32_t bondtca_kernel_condition_number(const struct BondtcaKernel *k, double *out);

/**
 * Sum over lags of the squared gap between the model and empirical signature plots.
 *
 * # Safety
 * `k` must be a live handle and `out` valid.
 */
int32_t bondtca_kernel_signature_ssd(const struct BondtcaKernel *k, double *out);

/**
 * # Safety
 * `k` must be a handle from this library or null.
 */
void bondtca_kernel_free(struct BondtcaKernel *k);

/**
 * Fits `model` ("ols", "ridge", "lasso", "lslasso" or "en") to a row-major
 * `n x p` design (no intercept column) and response `y`.
 *
 * # Safety
 * `x` must hold `n * p` values, `y` `n` values; `model` NUL-terminated; `out` valid.
 */
int32_t bondtca_fit(const char *model,
                    const double *x,
                    const double *y,
                    size_t n,
                    size_t p,
                    double lambda,
                    double alpha,
                    struct BondtcaFit **out);

/**
 * Writes the intercept followed by the `p` slope coefficients into `buf`.
 *
 * # Safety
 * `f` must be a live handle and `buf` hold `cap` values.
 */
int32_t bondtca_fit_coefficients(const struct BondtcaFit *f, double *buf, size_t cap);

/**
 * # Safety
 * `f` must be a live handle and `out` valid.
 */
int32_t bondtca_fit_r2(const struct BondtcaFit *f, double *out);

/**
 * # Safety
 * `f` must be a handle from this library or null.
 */
void bondtca_fit_free(struct BondtcaFit *f);

/**
 * Welch two-sample t-test.
 *
 * # Safety
 * `x`/`y` must hold `nx`/`ny` values; `out` must be valid.
 */
int32_t bondtca_welch_t(const double *x,
                        size_t nx,
                        const double *y,
                        size_t ny,
                        struct BondtcaTest *out);

/**
 * Two-sample Kolmogorov-Smirnov test.
 *
 * # Safety
 * As [`bondtca_welch_t`].
 */
int32_t bondtca_ks(const double *x, size_t nx, const double *y, size_t ny, struct BondtcaTest *out);

/**
 * One-way ANOVA on two groups.
 *
 * # Safety
 * As [`bondtca_welch_t`].
 */
int32_t bondtca_anova2(const double *x,
                       size_t nx,
                       const double *y,
                       size_t ny,
                       struct BondtcaTest *out);

/**
 * Kruskal-Wallis H on two groups.
 *
 * # Safety
 * As [`bondtca_welch_t`].
 */
int32_t bondtca_kruskal2(const double *x,
                         size_t nx,
                         const double *y,
                         size_t ny,
                         struct BondtcaTest *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* BONDTCA_H */
