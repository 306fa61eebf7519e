#pragma once

#include <vector>

#include "core/cca.hpp"
#include "core/detrend.hpp"

namespace structfact {

struct VarModel {
  int order = 1;
  std::vector<Matrix> coefficients;  // order matrices, each r x r
  Vector intercept;                  // r
  Matrix innovation_cov;             // r x r (divisor T - order)
  double companion_spectral_radius = 0.0;
  bool stationarity_warning = false;  // radius >= 1
};

// Equation-by-equation least squares on lagged regressors plus an intercept.
VarModel fit_var(const Matrix& factors, int order);

// Iterated VAR recursion with future innovations at zero; returns the next
// h factor values given the series history (r x T, needs T >= order).
Matrix var_forecast(const VarModel& model, const Matrix& factors, int horizon);

// Model-implied unconditional mean (I - sum Phi_i)^{-1} c.
Vector var_unconditional_mean(const VarModel& model);

struct ForecastResult {
  int horizon = 0;
  Matrix panel_forecast;   // p x h, trend + seasonal + mapped factor forecast
  Matrix factor_forecast;  // r x h
};

// Full structural reconstruction: trend/seasonal evaluated at t = T+1..T+h
// from theta, irregular forecast mapped back through Sigma^{1/2} L1 (noise
// variates forecast to their zero conditional mean).
ForecastResult forecast(const VarModel& model, const Decomposition& decomposition,
                        const FactorModel& factor_model, int horizon);

enum class PipelineVariant { GT1, GT2, VEC };

struct RollingConfig {
  int origin_start = 0;   // 1-based tau0; origins run tau0 .. T-h
  int horizon = 1;        // h
  int var_order = 1;
  PipelineVariant variant = PipelineVariant::GT2;
  int trend_degree = 0;
  int num_harmonics = 0;  // ignored by GT1 (no seasonal part) and VEC
  int m = 2;
  double alpha = 0.05;
  TestRegime regime = TestRegime::Auto;
  int fixed_r = -1;  // < 0: re-select r by the sequential test at every origin
};

struct RollingResult {
  double fe_h = 0.0;               // mean over origins of p^{-1/2} ||err||_2
  double standard_error = 0.0;     // sample std dev of the per-origin errors
  std::vector<double> per_origin;  // in origin order
  int num_origins = 0;
};

// Refits the configured pipeline on [1, tau] for every origin tau and
// accumulates the h-step-ahead forecast errors.
RollingResult rolling_evaluate(const TimePanel& panel, const RollingConfig& config);

}  // namespace structfact
