#include "core/dynamics.hpp"

#include <cmath>

#include "core/error.hpp"

namespace structfact {

VarModel fit_var(const Matrix& factors, int order) {
  if (order < 1) {
    raise(ErrorCode::InvalidArgument, "fit_var: order must be >= 1");
  }
  const Eigen::Index r = factors.rows();
  const Eigen::Index t_count = factors.cols();
  if (t_count <= static_cast<Eigen::Index>(r) * order + 1) {
    raise(ErrorCode::InsufficientSample,
          "fit_var: need T > r*order + 1, got T = " + std::to_string(t_count));
  }

  VarModel model;
  model.order = order;
  if (r == 0) {
    model.intercept = Vector::Zero(0);
    model.innovation_cov = Matrix::Zero(0, 0);
    return model;
  }

  const Eigen::Index rows = t_count - order;
  const Eigen::Index q = static_cast<Eigen::Index>(r) * order + 1;
  Matrix design(rows, q);
  Matrix response(rows, r);
  for (Eigen::Index t = order; t < t_count; ++t) {
    design(t - order, 0) = 1.0;
    for (int lag = 1; lag <= order; ++lag) {
      design.block(t - order, 1 + static_cast<Eigen::Index>(lag - 1) * r, 1, r) =
          factors.col(t - lag).transpose();
    }
    response.row(t - order) = factors.col(t).transpose();
  }

  LeastSquaresMulti ls = qr_least_squares_multi(design, response);
  Matrix coef = ls.coef;  // q x r
  model.intercept = coef.row(0).transpose();
  model.coefficients.reserve(static_cast<size_t>(order));
  for (int lag = 1; lag <= order; ++lag) {
    // Equation i reads f_{i,t} = c_i + sum_lag phi_i' f_{t-lag}; block rows
    // of coef hold those phi vectors per equation.
    model.coefficients.push_back(
        coef.middleRows(1 + static_cast<Eigen::Index>(lag - 1) * r, r).transpose());
  }
  model.innovation_cov =
      ls.residuals.transpose() * ls.residuals / static_cast<double>(t_count - order);

  // Companion matrix for the stationarity diagnostic.
  Matrix companion = Matrix::Zero(static_cast<Eigen::Index>(r) * order,
                                  static_cast<Eigen::Index>(r) * order);
  for (int lag = 1; lag <= order; ++lag) {
    companion.block(0, static_cast<Eigen::Index>(lag - 1) * r, r, r) =
        model.coefficients[static_cast<size_t>(lag - 1)];
  }
  if (order > 1) {
    companion.block(r, 0, static_cast<Eigen::Index>(order - 1) * r,
                    static_cast<Eigen::Index>(order - 1) * r) =
        Matrix::Identity(static_cast<Eigen::Index>(order - 1) * r,
                         static_cast<Eigen::Index>(order - 1) * r);
  }
  model.companion_spectral_radius = spectral_radius(companion);
  model.stationarity_warning = model.companion_spectral_radius >= 1.0;
  return model;
}

Matrix var_forecast(const VarModel& model, const Matrix& factors, int horizon) {
  if (horizon < 1) {
    raise(ErrorCode::InvalidArgument, "var_forecast: horizon must be >= 1");
  }
  const Eigen::Index r = factors.rows();
  if (r == 0) return Matrix::Zero(0, horizon);
  if (factors.cols() < model.order) {
    raise(ErrorCode::InsufficientSample, "var_forecast: history shorter than VAR order");
  }

  // history holds the model.order most recent values, newest last.
  Matrix history = factors.rightCols(model.order);
  Matrix out(r, horizon);
  for (int step = 0; step < horizon; ++step) {
    Vector next = model.intercept;
    for (int lag = 1; lag <= model.order; ++lag) {
      next += model.coefficients[static_cast<size_t>(lag - 1)] *
              history.col(model.order - lag);
    }
    out.col(step) = next;
    if (model.order > 1) {
      history.leftCols(model.order - 1) = history.rightCols(model.order - 1).eval();
    }
    history.col(model.order - 1) = next;
  }
  return out;
}

Vector var_unconditional_mean(const VarModel& model) {
  const Eigen::Index r = model.intercept.size();
  if (r == 0) return Vector::Zero(0);
  Matrix sum = Matrix::Identity(r, r);
  for (const Matrix& phi : model.coefficients) sum -= phi;
  return sum.colPivHouseholderQr().solve(model.intercept);
}

ForecastResult forecast(const VarModel& model, const Decomposition& decomposition,
                        const FactorModel& factor_model, int horizon) {
  if (horizon < 1) {
    raise(ErrorCode::InvalidArgument, "forecast: horizon must be >= 1");
  }
  const Eigen::Index p = decomposition.theta.rows();
  const int t_count = static_cast<int>(decomposition.irregular.cols());

  ForecastResult out;
  out.horizon = horizon;
  out.factor_forecast = var_forecast(model, factor_model.factors, horizon);

  out.panel_forecast.resize(p, horizon);
  const Matrix irregular_map =
      factor_model.sigma_sqrt * factor_model.loadings.leftCols(factor_model.r);  // p x r
  for (int step = 1; step <= horizon; ++step) {
    Vector deterministic = decomposition.theta * design_row(t_count + step, decomposition.order);
    Vector irregular = (factor_model.r > 0)
                           ? Vector(irregular_map * out.factor_forecast.col(step - 1))
                           : Vector(Vector::Zero(p));
    out.panel_forecast.col(step - 1) = deterministic + irregular;
  }
  return out;
}

namespace {

// One full pipeline fit + h-step forecast on the first tau columns.
Vector pipeline_forecast_at(const TimePanel& panel, const RollingConfig& config, int tau) {
  TimePanel window;
  window.values = panel.values.leftCols(tau);
  window.series_names = panel.series_names;
  window.time_labels.assign(panel.time_labels.begin(), panel.time_labels.begin() + tau);
  window.periodicity_s = panel.periodicity_s;

  if (config.variant == PipelineVariant::VEC) {
    VarModel var = fit_var(window.values, config.var_order);
    Matrix path = var_forecast(var, window.values, config.horizon);
    return path.col(config.horizon - 1);
  }

  OrderSpec order{config.trend_degree,
                  config.variant == PipelineVariant::GT1 ? 0 : config.num_harmonics,
                  panel.periodicity_s};
  Decomposition decomposition = fit(window, order);
  FactorAnalysis analysis = analyze_factors(decomposition.irregular, config.m, config.alpha,
                                            config.regime, config.fixed_r);
  if (analysis.model.r == 0) {
    // No dynamics: forecast is the deterministic part alone.
    Matrix deterministic(panel.num_series(), config.horizon);
    for (int step = 1; step <= config.horizon; ++step) {
      deterministic.col(step - 1) = decomposition.theta * design_row(tau + step, order);
    }
    return deterministic.col(config.horizon - 1);
  }
  VarModel var = fit_var(analysis.model.factors, config.var_order);
  ForecastResult fc = forecast(var, decomposition, analysis.model, config.horizon);
  return fc.panel_forecast.col(config.horizon - 1);
}

}  // namespace

RollingResult rolling_evaluate(const TimePanel& panel, const RollingConfig& config) {
  panel.validate();
  const int t_count = panel.num_times();
  const int h = config.horizon;
  if (h < 1) {
    raise(ErrorCode::InvalidArgument, "rolling_evaluate: horizon must be >= 1");
  }
  if (config.origin_start < 2 || config.origin_start + h > t_count) {
    raise(ErrorCode::InvalidArgument,
          "rolling_evaluate: origin_start must satisfy 2 <= tau0 and tau0 + h <= T");
  }

  RollingResult result;
  const double inv_sqrt_p = 1.0 / std::sqrt(static_cast<double>(panel.num_series()));
  for (int tau = config.origin_start; tau + h <= t_count; ++tau) {
    Vector prediction;
    try {
      prediction = pipeline_forecast_at(panel, config, tau);
    } catch (const Error& e) {
      raise(e.code(), "rolling_evaluate: origin tau = " + std::to_string(tau) + ": " + e.what(),
            tau);
    }
    Vector actual = panel.values.col(tau + h - 1);
    result.per_origin.push_back(inv_sqrt_p * (prediction - actual).norm());
  }

  result.num_origins = static_cast<int>(result.per_origin.size());
  double sum = 0.0;
  for (double v : result.per_origin) sum += v;
  result.fe_h = sum / result.num_origins;
  if (result.num_origins > 1) {
    double ss = 0.0;
    for (double v : result.per_origin) ss += (v - result.fe_h) * (v - result.fe_h);
    result.standard_error = std::sqrt(ss / (result.num_origins - 1));
  }
  return result;
}

}  // namespace structfact
