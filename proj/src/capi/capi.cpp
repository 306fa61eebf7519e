#include "structfact/structfact.h"

#include <cstring>
#include <memory>
#include <optional>
#include <string>

#include <json.hpp>

#include "core/cca.hpp"
#include "core/detrend.hpp"
#include "core/dynamics.hpp"
#include "core/error.hpp"
#include "core/panel.hpp"
#include "core/simlab.hpp"

using nlohmann::json;
namespace sf = structfact;

namespace {

thread_local std::string g_last_error;

sf_status status_from(sf::ErrorCode code) {
  switch (code) {
    case sf::ErrorCode::InvalidArgument:
    case sf::ErrorCode::InvalidOrder:
    case sf::ErrorCode::DomainFailure:
      return SF_ERR_INVALID_ARGUMENT;
    case sf::ErrorCode::MissingFile:
    case sf::ErrorCode::IoFailure:
      return SF_ERR_FILE;
    case sf::ErrorCode::ParseFailure:
    case sf::ErrorCode::RaggedRows:
      return SF_ERR_PARSE;
    case sf::ErrorCode::InsufficientSample:
      return SF_ERR_INSUFFICIENT_SAMPLE;
    case sf::ErrorCode::RankDeficient:
      return SF_ERR_RANK_DEFICIENT;
    case sf::ErrorCode::NonFiniteInput:
    case sf::ErrorCode::ConvergenceFailure:
    case sf::ErrorCode::AllEigenvaluesFloored:
    case sf::ErrorCode::NotOrthonormal:
    case sf::ErrorCode::DegenerateSpectrum:
    case sf::ErrorCode::DegenerateDraw:
      return SF_ERR_NUMERIC;
  }
  return SF_ERR_INTERNAL;
}

template <typename Fn>
sf_status wrap(Fn&& fn) {
  try {
    fn();
    return SF_OK;
  } catch (const sf::Error& e) {
    g_last_error = e.what();
    return status_from(e.code());
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return SF_ERR_INTERNAL;
  } catch (...) {
    g_last_error = "unknown failure";
    return SF_ERR_INTERNAL;
  }
}

sf_status invalid(const char* message) {
  g_last_error = message;
  return SF_ERR_INVALID_ARGUMENT;
}

char* dup_string(const std::string& s) {
  char* out = new char[s.size() + 1];
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

sf::TestRegime parse_regime(const std::string& name) {
  if (name == "auto") return sf::TestRegime::Auto;
  if (name == "chi2") return sf::TestRegime::ChiSquare;
  if (name == "normal") return sf::TestRegime::Normal;
  sf::raise(sf::ErrorCode::InvalidArgument, "regime must be auto, chi2 or normal: " + name);
}

std::string regime_name(sf::TestRegime regime) {
  switch (regime) {
    case sf::TestRegime::Auto: return "auto";
    case sf::TestRegime::ChiSquare: return "chi2";
    case sf::TestRegime::Normal: return "normal";
  }
  return "auto";
}

}  // namespace

struct sf_panel {
  sf::TimePanel impl;
};

struct sf_decomposition {
  sf::Decomposition impl;
  std::vector<std::string> series_names;
  std::vector<std::string> time_labels;
  std::string time_column;
  int periodicity = 2;
  std::optional<sf::BicTable> bic;
  double penalty_ct = 0.0;
};

struct sf_factor_model {
  sf::FactorModel model;
  sf::TestReport report;
  int m = 2;
  sf::TestRegime requested_regime = sf::TestRegime::Auto;
  bool r_fixed = false;
  std::vector<std::string> time_labels;
  int periodicity = 2;
};

struct sf_var_model {
  sf::VarModel impl;
};

namespace {

sf_decomposition* make_decomposition(const sf_panel& panel, sf::Decomposition impl) {
  auto d = std::make_unique<sf_decomposition>();
  d->impl = std::move(impl);
  d->series_names = panel.impl.series_names;
  d->time_labels = panel.impl.time_labels;
  d->time_column = panel.impl.time_column;
  d->periodicity = panel.impl.periodicity_s;
  return d.release();
}

sf_status copy_matrix(const sf::Matrix& m, double* out, const char* who) {
  if (out == nullptr) return invalid(who);
  return wrap([&] {
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      for (Eigen::Index j = 0; j < m.cols(); ++j) {
        out[static_cast<size_t>(i) * m.cols() + j] = m(i, j);
      }
    }
  });
}

sf_panel* series_panel(const sf::Matrix& values, const std::string& prefix,
                       const std::vector<std::string>& time_labels, int periodicity) {
  auto panel = std::make_unique<sf_panel>();
  panel->impl.values = values;
  panel->impl.time_labels = time_labels;
  panel->impl.periodicity_s = periodicity;
  for (Eigen::Index i = 0; i < values.rows(); ++i) {
    panel->impl.series_names.push_back(prefix + std::to_string(i + 1));
  }
  return panel.release();
}

}  // namespace

extern "C" {

const char* sf_version(void) { return "0.1.0"; }

const char* sf_last_error(void) { return g_last_error.c_str(); }

void sf_string_free(char* s) { delete[] s; }

sf_status sf_format_number(double x, char* buf, size_t buflen) {
  if (buf == nullptr) return invalid("sf_format_number: null buffer");
  return wrap([&] {
    std::string s = sf::format_number(x);
    if (s.size() + 1 > buflen) {
      sf::raise(sf::ErrorCode::InvalidArgument, "sf_format_number: buffer too small");
    }
    std::memcpy(buf, s.c_str(), s.size() + 1);
  });
}

/* ---- panels ------------------------------------------------------------ */

sf_status sf_panel_read_csv(const char* path, int periodicity, sf_panel** out) {
  if (path == nullptr || out == nullptr) return invalid("sf_panel_read_csv: null argument");
  return wrap([&] {
    auto panel = std::make_unique<sf_panel>();
    panel->impl = sf::read_csv(path);
    panel->impl.periodicity_s = periodicity;
    panel->impl.validate();
    *out = panel.release();
  });
}

sf_status sf_panel_create(int p, int t_count, const double* values_row_major,
                          const char* const* series_names, const char* const* time_labels,
                          int periodicity, sf_panel** out) {
  if (values_row_major == nullptr || out == nullptr) return invalid("sf_panel_create: null argument");
  if (p < 1 || t_count < 2) return invalid("sf_panel_create: need p >= 1 and T >= 2");
  return wrap([&] {
    sf::Matrix values(p, t_count);
    for (int i = 0; i < p; ++i) {
      for (int t = 0; t < t_count; ++t) {
        values(i, t) = values_row_major[static_cast<size_t>(i) * t_count + t];
      }
    }
    auto panel = std::make_unique<sf_panel>();
    panel->impl = sf::make_panel(values, periodicity);
    if (series_names != nullptr) {
      for (int i = 0; i < p; ++i) panel->impl.series_names[static_cast<size_t>(i)] = series_names[i];
    }
    if (time_labels != nullptr) {
      for (int t = 0; t < t_count; ++t) panel->impl.time_labels[static_cast<size_t>(t)] = time_labels[t];
    }
    panel->impl.validate();
    *out = panel.release();
  });
}

sf_status sf_panel_write_csv(const sf_panel* panel, const char* path) {
  if (panel == nullptr || path == nullptr) return invalid("sf_panel_write_csv: null argument");
  return wrap([&] { sf::write_csv(panel->impl, path); });
}

int sf_panel_series_count(const sf_panel* panel) { return panel ? panel->impl.num_series() : 0; }
int sf_panel_time_count(const sf_panel* panel) { return panel ? panel->impl.num_times() : 0; }
int sf_panel_periodicity(const sf_panel* panel) { return panel ? panel->impl.periodicity_s : 0; }

const char* sf_panel_series_name(const sf_panel* panel, int i) {
  if (panel == nullptr || i < 0 || i >= panel->impl.num_series()) return nullptr;
  return panel->impl.series_names[static_cast<size_t>(i)].c_str();
}

const char* sf_panel_time_label(const sf_panel* panel, int t) {
  if (panel == nullptr || t < 0 || t >= panel->impl.num_times()) return nullptr;
  return panel->impl.time_labels[static_cast<size_t>(t)].c_str();
}

sf_status sf_panel_values(const sf_panel* panel, double* out) {
  if (panel == nullptr || out == nullptr) return invalid("sf_panel_values: null argument");
  return wrap([&] {
    const int p = panel->impl.num_series();
    const int t_count = panel->impl.num_times();
    for (int i = 0; i < p; ++i) {
      for (int t = 0; t < t_count; ++t) {
        out[static_cast<size_t>(i) * t_count + t] = panel->impl.values(i, t);
      }
    }
  });
}

void sf_panel_free(sf_panel* panel) { delete panel; }

/* ---- decomposition ------------------------------------------------------ */

sf_status sf_decompose(const sf_panel* panel, int trend_degree, int num_harmonics,
                       sf_decomposition** out) {
  if (panel == nullptr || out == nullptr) return invalid("sf_decompose: null argument");
  return wrap([&] {
    sf::OrderSpec order{trend_degree, num_harmonics, panel->impl.periodicity_s};
    *out = make_decomposition(*panel, sf::fit(panel->impl, order));
  });
}

sf_status sf_decompose_select(const sf_panel* panel, int k_max, int d_max, double penalty_ct,
                              sf_decomposition** out) {
  if (panel == nullptr || out == nullptr) return invalid("sf_decompose_select: null argument");
  return wrap([&] {
    double c_t = penalty_ct > 0.0 ? penalty_ct : sf::default_penalty_ct(panel->impl.num_times());
    sf::BicTable table = sf::select_orders(panel->impl, k_max, d_max, c_t);
    sf::OrderSpec order{table.selected_d, table.selected_k, panel->impl.periodicity_s};
    sf_decomposition* d = make_decomposition(*panel, sf::fit(panel->impl, order));
    d->bic = std::move(table);
    d->penalty_ct = c_t;
    *out = d;
  });
}

int sf_decomposition_trend_degree(const sf_decomposition* d) {
  return d ? d->impl.order.trend_degree : -1;
}
int sf_decomposition_num_harmonics(const sf_decomposition* d) {
  return d ? d->impl.order.num_harmonics : -1;
}
int sf_decomposition_theta_cols(const sf_decomposition* d) {
  return d ? static_cast<int>(d->impl.theta.cols()) : 0;
}

sf_status sf_decomposition_component(const sf_decomposition* d, const char* which, sf_panel** out) {
  if (d == nullptr || which == nullptr || out == nullptr) {
    return invalid("sf_decomposition_component: null argument");
  }
  return wrap([&] {
    const sf::Matrix* values = nullptr;
    std::string name(which);
    if (name == "trend") values = &d->impl.trend;
    else if (name == "seasonal") values = &d->impl.seasonal;
    else if (name == "irregular") values = &d->impl.irregular;
    else sf::raise(sf::ErrorCode::InvalidArgument, "unknown component: " + name);

    auto panel = std::make_unique<sf_panel>();
    panel->impl.values = *values;
    panel->impl.series_names = d->series_names;
    panel->impl.time_labels = d->time_labels;
    panel->impl.time_column = d->time_column;
    panel->impl.periodicity_s = d->periodicity;
    *out = panel.release();
  });
}

sf_status sf_decomposition_theta(const sf_decomposition* d, double* out) {
  if (d == nullptr || out == nullptr) return invalid("sf_decomposition_theta: null argument");
  return wrap([&] {
    const auto& theta = d->impl.theta;
    for (Eigen::Index i = 0; i < theta.rows(); ++i) {
      for (Eigen::Index j = 0; j < theta.cols(); ++j) {
        out[static_cast<size_t>(i) * theta.cols() + j] = theta(i, j);
      }
    }
  });
}

sf_status sf_decomposition_bic_report_json(const sf_decomposition* d, char** out) {
  if (d == nullptr || out == nullptr) return invalid("sf_decomposition_bic_report_json: null argument");
  return wrap([&] {
    json report;
    report["selection"] = d->bic.has_value() ? "bic" : "fixed";
    report["selected"] = {{"k", d->impl.order.num_harmonics}, {"d", d->impl.order.trend_degree}};
    report["period"] = d->periodicity;
    if (d->bic.has_value()) {
      const sf::BicTable& table = *d->bic;
      report["penalty_ct"] = d->penalty_ct;
      report["k_grid"] = table.k_grid;
      report["d_grid"] = table.d_grid;
      report["exact_fit_warning"] = table.exact_fit;
      json per_series = json::array();
      for (size_t i = 0; i < table.selected_per_series.size(); ++i) {
        auto [k_i, d_i] = table.selected_per_series[i];
        int ki = 0, di = 0;
        for (size_t g = 0; g < table.k_grid.size(); ++g) {
          if (table.k_grid[g] == k_i) ki = static_cast<int>(g);
        }
        for (size_t g = 0; g < table.d_grid.size(); ++g) {
          if (table.d_grid[g] == d_i) di = static_cast<int>(g);
        }
        per_series.push_back({{"series", d->series_names[i]},
                              {"k", k_i},
                              {"d", d_i},
                              {"min_bic", table.bic(di, ki, static_cast<int>(i))}});
      }
      report["per_series"] = per_series;
    }
    *out = dup_string(report.dump(2));
  });
}

void sf_decomposition_free(sf_decomposition* d) { delete d; }

/* ---- factor model -------------------------------------------------------- */

sf_status sf_factor_analyze(const sf_decomposition* d, int m, double alpha, const char* regime,
                            int fixed_r, sf_factor_model** out) {
  if (d == nullptr || regime == nullptr || out == nullptr) {
    return invalid("sf_factor_analyze: null argument");
  }
  return wrap([&] {
    sf::TestRegime parsed = parse_regime(regime);
    sf::FactorAnalysis analysis =
        sf::analyze_factors(d->impl.irregular, m, alpha, parsed, fixed_r);
    auto f = std::make_unique<sf_factor_model>();
    f->model = std::move(analysis.model);
    f->report = std::move(analysis.report);
    f->m = m;
    f->requested_regime = parsed;
    f->r_fixed = fixed_r >= 0;
    f->time_labels = d->time_labels;
    f->periodicity = d->periodicity;
    *out = f.release();
  });
}

int sf_factor_model_num_factors(const sf_factor_model* f) { return f ? f->model.r : -1; }
int sf_factor_model_dimension(const sf_factor_model* f) {
  return f ? static_cast<int>(f->model.loadings.rows()) : 0;
}

sf_status sf_factor_model_loadings(const sf_factor_model* f, double* out) {
  if (f == nullptr) return invalid("sf_factor_model_loadings: null handle");
  return copy_matrix(f->model.loadings, out, "sf_factor_model_loadings: null buffer");
}

sf_status sf_factor_model_whitener(const sf_factor_model* f, double* out) {
  if (f == nullptr) return invalid("sf_factor_model_whitener: null handle");
  return copy_matrix(f->model.whitener, out, "sf_factor_model_whitener: null buffer");
}

sf_status sf_factor_model_eigenvalues(const sf_factor_model* f, double* out) {
  if (f == nullptr || out == nullptr) return invalid("sf_factor_model_eigenvalues: null argument");
  return wrap([&] {
    for (Eigen::Index i = 0; i < f->model.eigenvalues.size(); ++i) out[i] = f->model.eigenvalues(i);
  });
}

sf_status sf_factor_model_factors(const sf_factor_model* f, sf_panel** out) {
  if (f == nullptr || out == nullptr) return invalid("sf_factor_model_factors: null argument");
  return wrap([&] { *out = series_panel(f->model.factors, "f", f->time_labels, f->periodicity); });
}

sf_status sf_factor_model_noise(const sf_factor_model* f, sf_panel** out) {
  if (f == nullptr || out == nullptr) return invalid("sf_factor_model_noise: null argument");
  return wrap(
      [&] { *out = series_panel(f->model.noise_variates, "e", f->time_labels, f->periodicity); });
}

sf_status sf_factor_model_test_report_json(const sf_factor_model* f, char** out) {
  if (f == nullptr || out == nullptr) {
    return invalid("sf_factor_model_test_report_json: null argument");
  }
  return wrap([&] {
    json report;
    report["m"] = f->m;
    report["alpha"] = f->report.alpha;
    report["regime_requested"] = regime_name(f->requested_regime);
    report["regime_used"] = regime_name(f->report.regime_used);
    report["selected_v"] = f->report.selected_v;
    report["selected_r"] = f->report.selected_r;
    report["num_factors"] = f->model.r;
    report["r_fixed"] = f->r_fixed;
    json rows = json::array();
    for (const sf::TestRow& row : f->report.rows) {
      rows.push_back({{"v", row.v},
                      {"s_t", row.s_t},
                      {"df", row.df},
                      {"chi_square_p_value", row.chi_square_p_value},
                      {"c_t", row.c_t},
                      {"normal_p_value", row.normal_p_value},
                      {"rejected", row.rejected}});
    }
    report["rows"] = rows;
    *out = dup_string(report.dump(2));
  });
}

void sf_factor_model_free(sf_factor_model* f) { delete f; }

/* ---- dynamics ------------------------------------------------------------ */

sf_status sf_var_fit(const sf_factor_model* f, int order, sf_var_model** out) {
  if (f == nullptr || out == nullptr) return invalid("sf_var_fit: null argument");
  return wrap([&] {
    auto v = std::make_unique<sf_var_model>();
    v->impl = sf::fit_var(f->model.factors, order);
    *out = v.release();
  });
}

int sf_var_stationarity_warning(const sf_var_model* v) {
  return (v != nullptr && v->impl.stationarity_warning) ? 1 : 0;
}

sf_status sf_var_spectral_radius(const sf_var_model* v, double* out) {
  if (v == nullptr || out == nullptr) return invalid("sf_var_spectral_radius: null argument");
  *out = v->impl.companion_spectral_radius;
  return SF_OK;
}

sf_status sf_forecast(const sf_var_model* v, const sf_decomposition* d, const sf_factor_model* f,
                      int horizon, sf_panel** panel_forecast, sf_panel** factor_forecast) {
  if (v == nullptr || d == nullptr || f == nullptr || panel_forecast == nullptr) {
    return invalid("sf_forecast: null argument");
  }
  return wrap([&] {
    sf::ForecastResult result = sf::forecast(v->impl, d->impl, f->model, horizon);
    const int t_count = static_cast<int>(d->impl.irregular.cols());
    std::vector<std::string> labels;
    for (int step = 1; step <= horizon; ++step) labels.push_back(std::to_string(t_count + step));

    auto make = [&](const sf::Matrix& values, const std::vector<std::string>& names) {
      auto panel = std::make_unique<sf_panel>();
      panel->impl.values = values;
      panel->impl.series_names = names;
      panel->impl.time_labels = labels;
      panel->impl.periodicity_s = d->periodicity;
      return panel.release();
    };
    *panel_forecast = make(result.panel_forecast, d->series_names);
    if (factor_forecast != nullptr) {
      std::vector<std::string> factor_names;
      for (int i = 1; i <= f->model.r; ++i) factor_names.push_back("f" + std::to_string(i));
      *factor_forecast = make(result.factor_forecast, factor_names);
    }
  });
}

void sf_var_model_free(sf_var_model* v) { delete v; }

/* ---- rolling evaluation --------------------------------------------------- */

sf_status sf_rolling_evaluate_json(const sf_panel* panel, const char* config_json,
                                   char** result_json) {
  if (panel == nullptr || config_json == nullptr || result_json == nullptr) {
    return invalid("sf_rolling_evaluate_json: null argument");
  }
  return wrap([&] {
    json config = json::parse(config_json, nullptr, /*allow_exceptions=*/true);
    sf::RollingConfig rolling;
    rolling.origin_start = config.at("origin_start").get<int>();
    rolling.horizon = config.value("horizon", 1);
    rolling.var_order = config.value("var_order", 1);
    std::string variant = config.value("variant", std::string("GT2"));
    if (variant == "GT1") rolling.variant = sf::PipelineVariant::GT1;
    else if (variant == "GT2") rolling.variant = sf::PipelineVariant::GT2;
    else if (variant == "VEC") rolling.variant = sf::PipelineVariant::VEC;
    else sf::raise(sf::ErrorCode::InvalidArgument, "variant must be GT1, GT2 or VEC: " + variant);
    rolling.trend_degree = config.value("trend_degree", 0);
    rolling.num_harmonics = config.value("num_harmonics", 0);
    rolling.m = config.value("m", 2);
    rolling.alpha = config.value("alpha", 0.05);
    rolling.regime = parse_regime(config.value("regime", std::string("auto")));
    rolling.fixed_r = config.value("fixed_r", -1);

    sf::RollingResult result = sf::rolling_evaluate(panel->impl, rolling);
    json out;
    out["variant"] = variant;
    out["horizon"] = rolling.horizon;
    out["var_order"] = rolling.var_order;
    out["origin_start"] = rolling.origin_start;
    out["trend_degree"] = rolling.trend_degree;
    out["num_harmonics"] = rolling.num_harmonics;
    out["fixed_r"] = rolling.fixed_r;
    out["fe_h"] = result.fe_h;
    out["standard_error"] = result.standard_error;
    out["num_origins"] = result.num_origins;
    out["per_origin"] = result.per_origin;
    *result_json = dup_string(out.dump(2));
  });
}

/* ---- simulation ------------------------------------------------------------ */

sf_status sf_run_experiment_json(const char* config_json, char** result_json) {
  if (config_json == nullptr || result_json == nullptr) {
    return invalid("sf_run_experiment_json: null argument");
  }
  return wrap([&] {
    json config = json::parse(config_json);
    sf::Experiment experiment = sf::experiment_from_name(config.at("experiment").get<std::string>());
    int replications = config.value("replications", 500);
    std::uint64_t seed = config.value("seed", static_cast<std::uint64_t>(0));
    int workers = config.value("workers", 0);

    std::vector<sf::CellConfig> cells;
    for (const json& cell_json : config.at("cells")) {
      sf::CellConfig cell;
      cell.dgp.p = cell_json.value("p", cell.dgp.p);
      cell.dgp.num_times = cell_json.value("T", cell.dgp.num_times);
      cell.dgp.r = cell_json.value("r", cell.dgp.r);
      cell.dgp.k0 = cell_json.value("k0", cell.dgp.k0);
      cell.dgp.d0 = cell_json.value("d0", cell.dgp.d0);
      cell.dgp.period = cell_json.value("s", cell.dgp.period);
      cell.k_max = cell_json.value("k_max", cell.k_max);
      cell.known_orders = cell_json.value("known_orders", cell.known_orders);
      cell.m = cell_json.value("m", cell.m);
      cell.alpha = cell_json.value("alpha", cell.alpha);
      cell.regime = parse_regime(cell_json.value("regime", std::string("auto")));
      cells.push_back(cell);
    }

    sf::RunResult result = sf::run_table(experiment, cells, replications, seed, workers);
    json out;
    out["experiment"] = sf::experiment_name(result.experiment);
    out["seed"] = result.seed;
    out["replications"] = result.replications;
    json cells_json = json::array();
    for (const sf::CellResult& cell : result.cells) {
      json cell_json;
      cell_json["config"] = {{"p", cell.cell.dgp.p},
                             {"T", cell.cell.dgp.num_times},
                             {"r", cell.cell.dgp.r},
                             {"k0", cell.cell.dgp.k0},
                             {"d0", cell.cell.dgp.d0},
                             {"s", cell.cell.dgp.period},
                             {"k_max", cell.cell.k_max},
                             {"known_orders", cell.cell.known_orders},
                             {"m", cell.cell.m},
                             {"alpha", cell.cell.alpha},
                             {"regime", regime_name(cell.cell.regime)}};
      cell_json["failures"] = cell.failures;
      cell_json["stats"] = cell.stats;
      cell_json["samples"] = cell.samples;
      cells_json.push_back(cell_json);
    }
    out["cells"] = cells_json;
    *result_json = dup_string(out.dump(2));
  });
}

}  // extern "C"
