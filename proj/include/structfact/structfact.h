/*
 * structfact: structural-factor modeling of high-dimensional time series.
 *
 * C API over the core library: opaque handles, integer status codes, and a
 * thread-local error message. All matrix buffers are row-major double arrays
 * sized by the documented dimensions; JSON results are returned as
 * heap-allocated strings released with sf_string_free().
 */
#ifndef STRUCTFACT_H
#define STRUCTFACT_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define SF_API __declspec(dllexport)
#else
#define SF_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum sf_status {
  SF_OK = 0,
  SF_ERR_INVALID_ARGUMENT = 1, /* bad option, order, or dimension */
  SF_ERR_FILE = 2,             /* missing file or I/O failure */
  SF_ERR_PARSE = 3,            /* malformed CSV */
  SF_ERR_INSUFFICIENT_SAMPLE = 4,
  SF_ERR_RANK_DEFICIENT = 5,
  SF_ERR_NUMERIC = 6, /* eigensolver failure, floored spectrum, ... */
  SF_ERR_INTERNAL = 7
} sf_status;

typedef struct sf_panel sf_panel;
typedef struct sf_decomposition sf_decomposition;
typedef struct sf_factor_model sf_factor_model;
typedef struct sf_var_model sf_var_model;

SF_API const char* sf_version(void);

/* Message for the most recent failing call on this thread. */
SF_API const char* sf_last_error(void);

SF_API void sf_string_free(char* s);

/* Canonical number rendering used by every CSV artifact: fixed (never
 * scientific) notation, 12 significant digits, byte-deterministic. */
SF_API sf_status sf_format_number(double x, char* buf, size_t buflen);

/* ---- panels ------------------------------------------------------------ */

/* Wide CSV: header row, first column = time label, one column per series.
 * periodicity is the known period s (>= 2). */
SF_API sf_status sf_panel_read_csv(const char* path, int periodicity, sf_panel** out);
SF_API sf_status sf_panel_create(int p, int t_count, const double* values_row_major,
                                 const char* const* series_names /* may be NULL */,
                                 const char* const* time_labels /* may be NULL */,
                                 int periodicity, sf_panel** out);
SF_API sf_status sf_panel_write_csv(const sf_panel* panel, const char* path);
SF_API int sf_panel_series_count(const sf_panel* panel);
SF_API int sf_panel_time_count(const sf_panel* panel);
SF_API int sf_panel_periodicity(const sf_panel* panel);
SF_API const char* sf_panel_series_name(const sf_panel* panel, int i);
SF_API const char* sf_panel_time_label(const sf_panel* panel, int t);
/* out must hold p * T doubles. */
SF_API sf_status sf_panel_values(const sf_panel* panel, double* out);
SF_API void sf_panel_free(sf_panel* panel);

/* ---- trend/seasonal decomposition -------------------------------------- */

/* Fixed orders: polynomial trend degree d, k harmonic pairs at 2*pi*j/s. */
SF_API sf_status sf_decompose(const sf_panel* panel, int trend_degree, int num_harmonics,
                              sf_decomposition** out);
/* Orders selected by the marginal BIC over k in 0..k_max, d in 0..d_max;
 * penalty_ct <= 0 uses the default log(log T). */
SF_API sf_status sf_decompose_select(const sf_panel* panel, int k_max, int d_max,
                                     double penalty_ct, sf_decomposition** out);
SF_API int sf_decomposition_trend_degree(const sf_decomposition* d);
SF_API int sf_decomposition_num_harmonics(const sf_decomposition* d);
SF_API int sf_decomposition_theta_cols(const sf_decomposition* d);
/* which: "trend", "seasonal" or "irregular"; returns a new panel handle. */
SF_API sf_status sf_decomposition_component(const sf_decomposition* d, const char* which,
                                            sf_panel** out);
/* out must hold p * theta_cols doubles. */
SF_API sf_status sf_decomposition_theta(const sf_decomposition* d, double* out);
/* Selected orders plus the per-series BIC table (when selection ran). */
SF_API sf_status sf_decomposition_bic_report_json(const sf_decomposition* d, char** out);
SF_API void sf_decomposition_free(sf_decomposition* d);

/* ---- canonical-correlation factor model -------------------------------- */

/* m: lag depth of the stacked past vector; alpha: level of the sequential
 * tests; regime: "auto", "chi2" or "normal"; fixed_r < 0 selects the factor
 * count by the sequential test. */
SF_API sf_status sf_factor_analyze(const sf_decomposition* d, int m, double alpha,
                                   const char* regime, int fixed_r, sf_factor_model** out);
SF_API int sf_factor_model_num_factors(const sf_factor_model* f);
SF_API int sf_factor_model_dimension(const sf_factor_model* f);
/* Buffers sized p*p (loadings, whitener) and p (eigenvalues). */
SF_API sf_status sf_factor_model_loadings(const sf_factor_model* f, double* out);
SF_API sf_status sf_factor_model_whitener(const sf_factor_model* f, double* out);
SF_API sf_status sf_factor_model_eigenvalues(const sf_factor_model* f, double* out);
/* Factor / noise-variate series as panels (r x T and (p-r) x T). */
SF_API sf_status sf_factor_model_factors(const sf_factor_model* f, sf_panel** out);
SF_API sf_status sf_factor_model_noise(const sf_factor_model* f, sf_panel** out);
/* Per-v S_T, C_T and p-values plus the selected v and r. */
SF_API sf_status sf_factor_model_test_report_json(const sf_factor_model* f, char** out);
SF_API void sf_factor_model_free(sf_factor_model* f);

/* ---- factor dynamics and forecasting ----------------------------------- */

SF_API sf_status sf_var_fit(const sf_factor_model* f, int order, sf_var_model** out);
SF_API int sf_var_stationarity_warning(const sf_var_model* v);
SF_API sf_status sf_var_spectral_radius(const sf_var_model* v, double* out);
/* Forecast panels: p x h (series) and r x h (factors), labeled T+1..T+h. */
SF_API sf_status sf_forecast(const sf_var_model* v, const sf_decomposition* d,
                             const sf_factor_model* f, int horizon, sf_panel** panel_forecast,
                             sf_panel** factor_forecast);
SF_API void sf_var_model_free(sf_var_model* v);

/* ---- rolling out-of-sample evaluation ----------------------------------
 * config JSON keys: origin_start (1-based), horizon, var_order,
 * variant ("GT1"|"GT2"|"VEC"), trend_degree, num_harmonics, m, alpha,
 * regime, fixed_r (-1 = re-select per origin).
 * Result JSON: fe_h, standard_error, num_origins, per_origin[]. */
SF_API sf_status sf_rolling_evaluate_json(const sf_panel* panel, const char* config_json,
                                          char** result_json);

/* ---- simulation harness -------------------------------------------------
 * config JSON keys: experiment ("table1"|"table2"|"theta_error"|
 * "loading_discrepancy"|"null_calibration"), replications, seed, workers,
 * cells: [{p, T, r, k0, d0, s, k_max, known_orders, m, alpha, regime}, ...].
 * Result JSON: experiment, seed, replications, cells with per-cell stats,
 * failures and raw samples. */
SF_API sf_status sf_run_experiment_json(const char* config_json, char** result_json);

#ifdef __cplusplus
}
#endif

#endif /* STRUCTFACT_H */
