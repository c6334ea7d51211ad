#ifndef FSE_H
#define FSE_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum FseDistribution {
  FSE_DISTRIBUTION_NORMAL = 0,
  FSE_DISTRIBUTION_STUDENT_T = 1,
  FSE_DISTRIBUTION_CHI_SQUARED = 2,
  FSE_DISTRIBUTION_F = 3,
} FseDistribution;

typedef enum FseMsaeVariant {
  FSE_MSAE_VARIANT_RATIO_OF_SUMS = 0,
  FSE_MSAE_VARIANT_PAPER_LITERAL = 1,
} FseMsaeVariant;

/**
 * Result codes.
 */
typedef enum FseStatus {
  FSE_STATUS_OK = 0,
  FSE_STATUS_NULL_POINTER = 1,
  FSE_STATUS_INVALID_INPUT = 2,
  FSE_STATUS_INSUFFICIENT_DATA = 3,
  /**
   * A statistical stage failed (rank deficiency, dead states, nonstationarity, ...).
   */
  FSE_STATUS_STATISTICAL = 4,
  FSE_STATUS_IO = 5,
  FSE_STATUS_PANIC = 6,
} FseStatus;

typedef enum FseZeroPolicy {
  FSE_ZERO_POLICY_EXCLUDE = 0,
  FSE_ZERO_POLICY_ERROR = 1,
} FseZeroPolicy;

/**
 * Demand, calendar, factors and optional forecasts.
 */
typedef struct FseBundle FseBundle;

/**
 * A fitted model.
 */
typedef struct FseModel FseModel;

/**
 * An evaluation report.
 */
typedef struct FseReport FseReport;

/**
 * Hypothesis test outcome. `p_value` is NaN when the test has none (KPSS);
 * `approx_p_value` is NaN unless the test supplies one.
 */
typedef struct FseTestResult {
  double statistic;
  double p_value;
  double approx_p_value;
  bool reject_at_5pct;
  size_t lags;
  double df;
} FseTestResult;

/**
 * Message of the last failed call on this thread, or NULL. The pointer is
 * valid until the next call into this library on the same thread.
 */
const char *fse_last_error(void);

/**
 * # Safety
 * `s` must be NULL or a string returned by this library and not yet freed.
 */
void fse_string_free(char *s);

/**
 * Mean absolute error of `n` forecast/actual pairs.
 *
 * # Safety
 * `forecasts` and `actuals` must point to `n` doubles; `out` must be writable.
 */
enum FseStatus fse_mae(const double *forecasts, const double *actuals, size_t n, double *out_value);

/**
 * MAPE in percent.
 *
 * # Safety
 * As for [`fse_mae`].
 */
enum FseStatus fse_mape(const double *forecasts,
                        const double *actuals,
                        size_t n,
                        enum FseZeroPolicy zero_policy,
                        double *out_value);

/**
 * Mean scaled absolute error.
 *
 * # Safety
 * As for [`fse_mae`].
 */
enum FseStatus fse_msae(const double *forecasts,
                        const double *actuals,
                        size_t n,
                        enum FseMsaeVariant variant,
                        double *out_value);

/**
 * Improvement of `candidate_error` over `benchmark_error` in whole percent.
 *
 * # Safety
 * `out_pct` must be writable.
 */
enum FseStatus fse_improvement(double benchmark_error, double candidate_error, int64_t *out_pct);

/**
 * Upper-tail probability of `statistic`. `df2` is used by the F law only.
 *
 * # Safety
 * `out_p` must be writable.
 */
enum FseStatus fse_tail_probability(enum FseDistribution distribution,
                                    double df1,
                                    double df2,
                                    double statistic,
                                    double *out_p);

/**
 * KPSS level-stationarity test; `lags == 0` selects the default truncation.
 *
 * # Safety
 * `series` must point to `n` doubles; `out_result` must be writable.
 */
enum FseStatus fse_kpss(const double *series,
                        size_t n,
                        size_t lags,
                        struct FseTestResult *out_result);

/**
 * Ljung-Box test; degrees of freedom are `max_lag - fitted_params`.
 *
 * # Safety
 * As for [`fse_kpss`].
 */
enum FseStatus fse_ljung_box(const double *residuals,
                             size_t n,
                             size_t max_lag,
                             size_t fitted_params,
                             struct FseTestResult *out_result);

/**
 * Jarque-Bera normality test.
 *
 * # Safety
 * As for [`fse_kpss`].
 */
enum FseStatus fse_jarque_bera(const double *residuals, size_t n, struct FseTestResult *out_result);

/**
 * Fit the model of order `p` with `m` states. `states` may be NULL when
 * `m == 0`.
 *
 * # Safety
 * `series` and `states` must point to `n` values; `out_model` must be writable.
 */
enum FseStatus fse_model_fit(const double *series,
                             size_t n,
                             const int32_t *states,
                             size_t m,
                             size_t p,
                             struct FseModel **out_model);

/**
 * AICc order selection over `0..=p_max`.
 *
 * # Safety
 * As for [`fse_model_fit`]; `out_p` must be writable.
 */
enum FseStatus fse_select_order(const double *series,
                                size_t n,
                                const int32_t *states,
                                size_t m,
                                size_t p_max,
                                size_t *out_p);

/**
 * Order and state count of a fitted model.
 *
 * # Safety
 * `model` must be a live handle; `out_p` and `out_m` must be writable.
 */
enum FseStatus fse_model_shape(const struct FseModel *model, size_t *out_p, size_t *out_m);

/**
 * Copy `alpha0, alpha_1..alpha_p, beta_1..beta_m` into `buffer`. The
 * required length `1 + p + m` is written to `out_len` even when `capacity`
 * is too small, in which case nothing is copied and the call fails.
 *
 * # Safety
 * `model` must be a live handle; `buffer` must have room for `capacity`
 * doubles; `out_len` must be writable.
 */
enum FseStatus fse_model_coefficients(const struct FseModel *model,
                                      double *buffer,
                                      size_t capacity,
                                      size_t *out_len);

/**
 * Recursive forecasts for `h` weeks after `last_observations`.
 *
 * # Safety
 * `last_observations` must point to `n_last` doubles, `future_states` to
 * `h` labels (or NULL when the model has no states) and `out_forecasts`
 * to room for `h` doubles.
 */
enum FseStatus fse_model_forecast(const struct FseModel *model,
                                  const double *last_observations,
                                  size_t n_last,
                                  const int32_t *future_states,
                                  size_t h,
                                  double *out_forecasts);

/**
 * The full fit as JSON; free with [`fse_string_free`].
 *
 * # Safety
 * `model` must be a live handle; `out_json` must be writable.
 */
enum FseStatus fse_model_to_json(const struct FseModel *model, char **out_json);

/**
 * # Safety
 * `model` must be NULL or a handle not yet freed.
 */
void fse_model_free(struct FseModel *model);

/**
 * Load CSV files; `forecasts` may be NULL.
 *
 * # Safety
 * Paths must be NUL-terminated strings; `out_bundle` must be writable.
 */
enum FseStatus fse_bundle_load(const char *demand,
                               const char *calendar,
                               const char *factors,
                               const char *forecasts,
                               struct FseBundle **out_bundle);

/**
 * Synthetic bundle shaped like case `shape` (`'A'` or `'B'`).
 *
 * # Safety
 * `out_bundle` must be writable.
 */
enum FseStatus fse_bundle_simulate(char shape, uint64_t seed, struct FseBundle **out_bundle);

/**
 * Number of weeks in the bundle.
 *
 * # Safety
 * `bundle` must be a live handle; `out_len` must be writable.
 */
enum FseStatus fse_bundle_len(const struct FseBundle *bundle, size_t *out_len);

/**
 * Write the bundle's CSV files into `dir`.
 *
 * # Safety
 * `bundle` must be a live handle; `dir` a NUL-terminated string.
 */
enum FseStatus fse_bundle_save(const struct FseBundle *bundle, const char *dir);

/**
 * # Safety
 * `bundle` must be NULL or a handle not yet freed.
 */
void fse_bundle_free(struct FseBundle *bundle);

/**
 * Evaluate a bundle. `config` is NULL or the text of a `key = value` file.
 *
 * # Safety
 * `bundle` must be a live handle, `config` NULL or NUL-terminated and
 * `out_report` writable.
 */
enum FseStatus fse_case_run(const struct FseBundle *bundle,
                            const char *config,
                            struct FseReport **out_report);

/**
 * Human-readable report tables; free with [`fse_string_free`].
 *
 * # Safety
 * `report` must be a live handle; `out_text` must be writable.
 */
enum FseStatus fse_report_text(const struct FseReport *report, char **out_text);

/**
 * The report as JSON; free with [`fse_string_free`].
 *
 * # Safety
 * As for [`fse_report_text`].
 */
enum FseStatus fse_report_json(const struct FseReport *report, char **out_json);

/**
 * # Safety
 * `report` must be NULL or a handle not yet freed.
 */
void fse_report_free(struct FseReport *report);

#endif  /* FSE_H */
