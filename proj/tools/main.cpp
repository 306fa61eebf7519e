// Command-line frontend for the structfact shared library. Talks to the
// library exclusively through the C API in structfact/structfact.h.
//
// Exit codes: 0 success, 2 user/validation error, 3 numeric failure.

#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "structfact/structfact.h"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitUser = 2;
constexpr int kExitNumeric = 3;

struct CliFailure {
  int exit_code;
  std::string message;
};

int exit_code_for(sf_status status) {
  switch (status) {
    case SF_OK:
      return 0;
    case SF_ERR_INVALID_ARGUMENT:
    case SF_ERR_FILE:
    case SF_ERR_PARSE:
    case SF_ERR_INSUFFICIENT_SAMPLE:
      return kExitUser;
    default:
      return kExitNumeric;
  }
}

void check(sf_status status, const std::string& context) {
  if (status != SF_OK) {
    throw CliFailure{exit_code_for(status), context + ": " + sf_last_error()};
  }
}

template <typename T, void (*Free)(T*)>
using Handle = std::unique_ptr<T, std::integral_constant<void (*)(T*), Free>>;

using PanelHandle = Handle<sf_panel, sf_panel_free>;
using DecompositionHandle = Handle<sf_decomposition, sf_decomposition_free>;
using FactorHandle = Handle<sf_factor_model, sf_factor_model_free>;
using VarHandle = Handle<sf_var_model, sf_var_model_free>;

std::string take_string(char* s) {
  std::string out(s);
  sf_string_free(s);
  return out;
}

std::string format_value(double x) {
  char buf[512];
  check(sf_format_number(x, buf, sizeof(buf)), "format");
  return buf;
}

// All artifacts are written to temporaries and renamed after every write
// succeeded, so a failing run never leaves a partial artifact set behind.
class ArtifactSet {
 public:
  explicit ArtifactSet(fs::path dir) : dir_(std::move(dir)) {
    std::error_code ec;
    fs::create_directories(dir_, ec);
    if (ec) {
      throw CliFailure{kExitUser, "cannot create output directory " + dir_.string()};
    }
  }

  ~ArtifactSet() {
    for (const auto& [temp, final_path] : staged_) {
      std::error_code ec;
      fs::remove(temp, ec);
    }
  }

  fs::path stage(const std::string& name) {
    fs::path final_path = dir_ / name;
    fs::path temp = dir_ / (name + ".tmp-" + std::to_string(::getpid()));
    staged_.emplace_back(temp, final_path);
    return temp;
  }

  void write_text(const std::string& name, const std::string& content) {
    fs::path temp = stage(name);
    std::ofstream out(temp, std::ios::binary);
    out << content;
    if (!out) {
      throw CliFailure{kExitUser, "cannot write " + temp.string()};
    }
  }

  void commit() {
    for (const auto& [temp, final_path] : staged_) {
      std::error_code ec;
      fs::rename(temp, final_path, ec);
      if (ec) {
        throw CliFailure{kExitUser, "cannot move " + temp.string() + " to " + final_path.string()};
      }
    }
    staged_.clear();
  }

 private:
  fs::path dir_;
  std::vector<std::pair<fs::path, fs::path>> staged_;
};

fs::path default_output_dir() {
  if (const char* env = std::getenv("STRUCTFACT_OUTPUT_DIR")) return fs::path(env);
  return fs::path(".");
}

// Options shared by the pipeline subcommands.
struct PipelineOptions {
  std::string input;
  int period = 0;
  int k_max = -1;  // -1: ceil(s/2)-1
  int d_max = 2;
  double penalty_ct = 0.0;  // <= 0: log(log T)
  int fixed_d = -1;
  int fixed_k = -1;
  std::string output_dir = default_output_dir().string();
};

void add_pipeline_options(CLI::App* cmd, PipelineOptions& opts) {
  cmd->add_option("--input", opts.input, "input panel CSV (wide layout)")->required();
  cmd->add_option("--period", opts.period, "known periodicity s (>= 2)")->required();
  cmd->add_option("--k-max", opts.k_max, "harmonic search bound (default ceil(s/2)-1)");
  cmd->add_option("--d-max", opts.d_max, "trend degree search bound (default 2)");
  cmd->add_option("--ct", opts.penalty_ct, "BIC penalty constant (default log(log T))");
  cmd->add_option("--d", opts.fixed_d, "fixed trend degree (skips selection; needs --k)");
  cmd->add_option("--k", opts.fixed_k, "fixed harmonic count (skips selection; needs --d)");
  cmd->add_option("--output-dir", opts.output_dir,
                  "artifact directory (default $STRUCTFACT_OUTPUT_DIR or .)");
}

void validate_pipeline_options(const PipelineOptions& opts) {
  if (opts.period < 2) {
    throw CliFailure{kExitUser, "--period must be >= 2"};
  }
  if ((opts.fixed_d >= 0) != (opts.fixed_k >= 0)) {
    throw CliFailure{kExitUser, "--d and --k must be given together"};
  }
}

int resolved_k_max(const PipelineOptions& opts) {
  return opts.k_max >= 0 ? opts.k_max : (opts.period + 1) / 2 - 1;
}

PanelHandle read_panel(const PipelineOptions& opts) {
  sf_panel* panel = nullptr;
  check(sf_panel_read_csv(opts.input.c_str(), opts.period, &panel), "reading " + opts.input);
  return PanelHandle(panel);
}

DecompositionHandle run_decomposition(const sf_panel* panel, const PipelineOptions& opts) {
  sf_decomposition* d = nullptr;
  if (opts.fixed_d >= 0) {
    check(sf_decompose(panel, opts.fixed_d, opts.fixed_k, &d), "decomposition");
  } else {
    check(sf_decompose_select(panel, resolved_k_max(opts), opts.d_max, opts.penalty_ct, &d),
          "order selection");
  }
  return DecompositionHandle(d);
}

void write_component(ArtifactSet& artifacts, const sf_decomposition* d, const char* which,
                     const std::string& name) {
  sf_panel* component = nullptr;
  check(sf_decomposition_component(d, which, &component), name);
  PanelHandle guard(component);
  check(sf_panel_write_csv(component, artifacts.stage(name).string().c_str()), "writing " + name);
}

void write_panel_artifact(ArtifactSet& artifacts, const sf_panel* panel, const std::string& name) {
  check(sf_panel_write_csv(panel, artifacts.stage(name).string().c_str()), "writing " + name);
}

void write_theta(ArtifactSet& artifacts, const sf_panel* panel, const sf_decomposition* d) {
  const int p = sf_panel_series_count(panel);
  const int cols = sf_decomposition_theta_cols(d);
  const int degree = sf_decomposition_trend_degree(d);
  const int harmonics = sf_decomposition_num_harmonics(d);
  std::vector<double> theta(static_cast<size_t>(p) * cols);
  check(sf_decomposition_theta(d, theta.data()), "theta");

  std::ostringstream out;
  out << "series";
  for (int j = 0; j <= degree; ++j) out << ",alpha" << j;
  for (int j = 1; j <= harmonics; ++j) out << ",beta" << j;
  for (int j = 1; j <= harmonics; ++j) out << ",gamma" << j;
  out << '\n';
  for (int i = 0; i < p; ++i) {
    out << sf_panel_series_name(panel, i);
    for (int j = 0; j < cols; ++j) {
      out << ',' << format_value(theta[static_cast<size_t>(i) * cols + j]);
    }
    out << '\n';
  }
  artifacts.write_text("theta.csv", out.str());
}

void write_matrix(ArtifactSet& artifacts, const std::vector<double>& values, int rows, int cols,
                  const std::string& name) {
  std::ostringstream out;
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < cols; ++j) {
      if (j > 0) out << ',';
      out << format_value(values[static_cast<size_t>(i) * cols + j]);
    }
    out << '\n';
  }
  artifacts.write_text(name, out.str());
}

struct FactorOptions {
  int m = 2;
  double alpha = 0.05;
  std::string regime = "auto";
  int fixed_r = -1;
};

void add_factor_options(CLI::App* cmd, FactorOptions& opts) {
  cmd->add_option("--m", opts.m, "lag depth of the stacked past vector (default 2)");
  cmd->add_option("--alpha", opts.alpha, "significance level of the sequential test");
  cmd->add_option("--regime", opts.regime, "test regime: auto, chi2 or normal")
      ->check(CLI::IsMember({"auto", "chi2", "normal"}));
  cmd->add_option("--r", opts.fixed_r, "fix the factor count instead of testing");
}

void validate_factor_options(const FactorOptions& opts) {
  if (opts.m < 1) throw CliFailure{kExitUser, "--m must be >= 1"};
  if (!(opts.alpha > 0.0 && opts.alpha < 1.0)) {
    throw CliFailure{kExitUser, "--alpha must lie in (0, 1)"};
  }
}

FactorHandle run_factor_analysis(const sf_decomposition* d, const FactorOptions& opts) {
  sf_factor_model* f = nullptr;
  check(sf_factor_analyze(d, opts.m, opts.alpha, opts.regime.c_str(), opts.fixed_r, &f),
        "factor analysis");
  return FactorHandle(f);
}

/* ---- subcommand drivers -------------------------------------------------- */

int cmd_decompose(const PipelineOptions& opts) {
  validate_pipeline_options(opts);
  PanelHandle panel = read_panel(opts);
  DecompositionHandle d = run_decomposition(panel.get(), opts);

  ArtifactSet artifacts{fs::path(opts.output_dir)};
  write_component(artifacts, d.get(), "trend", "trend.csv");
  write_component(artifacts, d.get(), "seasonal", "seasonal.csv");
  write_component(artifacts, d.get(), "irregular", "irregular.csv");
  write_theta(artifacts, panel.get(), d.get());
  char* report = nullptr;
  check(sf_decomposition_bic_report_json(d.get(), &report), "bic report");
  artifacts.write_text("bic_report.json", take_string(report) + "\n");
  artifacts.commit();

  std::cout << "decompose: d=" << sf_decomposition_trend_degree(d.get())
            << " k=" << sf_decomposition_num_harmonics(d.get()) << " -> " << opts.output_dir
            << '\n';
  return 0;
}

int cmd_factors(const PipelineOptions& opts, const FactorOptions& factor_opts) {
  validate_pipeline_options(opts);
  validate_factor_options(factor_opts);
  PanelHandle panel = read_panel(opts);
  DecompositionHandle d = run_decomposition(panel.get(), opts);
  FactorHandle f = run_factor_analysis(d.get(), factor_opts);

  const int p = sf_factor_model_dimension(f.get());
  std::vector<double> loadings(static_cast<size_t>(p) * p);
  std::vector<double> whitener(static_cast<size_t>(p) * p);
  check(sf_factor_model_loadings(f.get(), loadings.data()), "loadings");
  check(sf_factor_model_whitener(f.get(), whitener.data()), "whitener");

  sf_panel* factors = nullptr;
  sf_panel* noise = nullptr;
  check(sf_factor_model_factors(f.get(), &factors), "factors");
  PanelHandle factors_guard(factors);
  check(sf_factor_model_noise(f.get(), &noise), "noise variates");
  PanelHandle noise_guard(noise);

  ArtifactSet artifacts{fs::path(opts.output_dir)};
  write_matrix(artifacts, loadings, p, p, "loadings.csv");
  write_matrix(artifacts, whitener, p, p, "whitener.csv");
  write_panel_artifact(artifacts, factors, "factors.csv");
  write_panel_artifact(artifacts, noise, "noise_variates.csv");
  char* report = nullptr;
  check(sf_factor_model_test_report_json(f.get(), &report), "test report");
  artifacts.write_text("test_report.json", take_string(report) + "\n");
  artifacts.commit();

  std::cout << "factors: r=" << sf_factor_model_num_factors(f.get()) << " -> " << opts.output_dir
            << '\n';
  return 0;
}

int cmd_forecast(const PipelineOptions& opts, const FactorOptions& factor_opts, int horizon,
                 int var_order) {
  validate_pipeline_options(opts);
  validate_factor_options(factor_opts);
  if (horizon < 1) throw CliFailure{kExitUser, "--horizon must be >= 1"};
  if (var_order < 1) throw CliFailure{kExitUser, "--var-order must be >= 1"};

  PanelHandle panel = read_panel(opts);
  DecompositionHandle d = run_decomposition(panel.get(), opts);
  FactorHandle f = run_factor_analysis(d.get(), factor_opts);
  sf_var_model* var = nullptr;
  check(sf_var_fit(f.get(), var_order, &var), "VAR fit");
  VarHandle var_guard(var);
  if (sf_var_stationarity_warning(var)) {
    double radius = 0.0;
    sf_var_spectral_radius(var, &radius);
    std::cerr << "warning: fitted VAR is non-stationary (spectral radius " << radius << ")\n";
  }

  sf_panel* panel_forecast = nullptr;
  sf_panel* factor_forecast = nullptr;
  check(sf_forecast(var, d.get(), f.get(), horizon, &panel_forecast, &factor_forecast),
        "forecast");
  PanelHandle panel_fc_guard(panel_forecast);
  PanelHandle factor_fc_guard(factor_forecast);

  ArtifactSet artifacts{fs::path(opts.output_dir)};
  write_panel_artifact(artifacts, panel_forecast, "forecast.csv");
  write_panel_artifact(artifacts, factor_forecast, "factor_forecast.csv");
  artifacts.commit();

  std::cout << "forecast: h=" << horizon << " r=" << sf_factor_model_num_factors(f.get()) << " -> "
            << opts.output_dir << '\n';
  return 0;
}

struct EvaluateOptions {
  std::string variant = "GT2";
  int horizon = 1;
  int var_order = 1;
  int origin_start = 0;
  double train_fraction = 0.0;
};

int cmd_evaluate(const PipelineOptions& opts, const FactorOptions& factor_opts,
                 const EvaluateOptions& eval_opts) {
  validate_pipeline_options(opts);
  validate_factor_options(factor_opts);
  if (opts.fixed_d < 0) {
    throw CliFailure{kExitUser, "evaluate needs fixed orders: pass --d and --k"};
  }
  if (eval_opts.origin_start <= 0 && eval_opts.train_fraction <= 0.0) {
    throw CliFailure{kExitUser, "pass --origin-start or --train-fraction"};
  }

  PanelHandle panel = read_panel(opts);
  int origin_start = eval_opts.origin_start;
  if (origin_start <= 0) {
    origin_start = static_cast<int>(eval_opts.train_fraction * sf_panel_time_count(panel.get()));
  }

  json config;
  config["origin_start"] = origin_start;
  config["horizon"] = eval_opts.horizon;
  config["var_order"] = eval_opts.var_order;
  config["variant"] = eval_opts.variant;
  config["trend_degree"] = opts.fixed_d;
  config["num_harmonics"] = opts.fixed_k;
  config["m"] = factor_opts.m;
  config["alpha"] = factor_opts.alpha;
  config["regime"] = factor_opts.regime;
  config["fixed_r"] = factor_opts.fixed_r;

  char* result = nullptr;
  check(sf_rolling_evaluate_json(panel.get(), config.dump().c_str(), &result), "evaluation");
  std::string result_str = take_string(result);

  ArtifactSet artifacts{fs::path(opts.output_dir)};
  artifacts.write_text("evaluation.json", result_str + "\n");
  artifacts.commit();

  json parsed = json::parse(result_str);
  std::cout << "evaluate: variant=" << eval_opts.variant << " h=" << eval_opts.horizon
            << " FE=" << parsed["fe_h"].get<double>() << " (se "
            << parsed["standard_error"].get<double>() << ") over "
            << parsed["num_origins"].get<int>() << " origins -> " << opts.output_dir << '\n';
  return 0;
}

struct SimulateOptions {
  std::string experiment;
  std::vector<std::string> cells;
  int replications = 500;
  std::uint64_t seed = 0;
  int workers = 0;
  bool emit_samples = false;
  std::string output_dir = default_output_dir().string();
};

json parse_cell_spec(const std::string& spec) {
  json cell = json::object();
  std::stringstream stream(spec);
  std::string item;
  while (std::getline(stream, item, ',')) {
    auto eq = item.find('=');
    if (eq == std::string::npos) {
      throw CliFailure{kExitUser, "--cell entries must be key=value, got '" + item + "'"};
    }
    std::string key = item.substr(0, eq);
    std::string value = item.substr(eq + 1);
    if (key == "regime") {
      cell[key] = value;
    } else if (key == "known_orders") {
      cell[key] = (value == "1" || value == "true");
    } else if (key == "alpha") {
      cell[key] = std::stod(value);
    } else if (key == "p" || key == "T" || key == "r" || key == "k0" || key == "d0" ||
               key == "s" || key == "k_max" || key == "m") {
      cell[key] = std::stoi(value);
    } else {
      throw CliFailure{kExitUser, "unknown cell key '" + key + "'"};
    }
  }
  return cell;
}

int cmd_simulate(const SimulateOptions& opts) {
  if (opts.replications < 1) throw CliFailure{kExitUser, "--reps must be >= 1"};

  json config;
  config["experiment"] = opts.experiment;
  config["replications"] = opts.replications;
  config["seed"] = opts.seed;
  config["workers"] = opts.workers;
  json cells = json::array();
  for (const std::string& spec : opts.cells) cells.push_back(parse_cell_spec(spec));
  config["cells"] = cells;

  char* result = nullptr;
  check(sf_run_experiment_json(config.dump().c_str(), &result), "simulation");
  std::string result_str = take_string(result);
  json parsed = json::parse(result_str);

  // Flat CSV: one row per cell, config columns then stats (keys are sorted
  // by construction, so the layout is deterministic).
  std::ostringstream csv;
  csv << "experiment,p,T,r,k0,d0,s,k_max,known_orders,m,alpha,regime,failures";
  if (!parsed["cells"].empty()) {
    for (auto& [key, value] : parsed["cells"][0]["stats"].items()) csv << ',' << key;
  }
  csv << '\n';
  for (const json& cell : parsed["cells"]) {
    const json& cfg = cell["config"];
    csv << parsed["experiment"].get<std::string>() << ',' << cfg["p"].get<int>() << ','
        << cfg["T"].get<int>() << ',' << cfg["r"].get<int>() << ',' << cfg["k0"].get<int>() << ','
        << cfg["d0"].get<int>() << ',' << cfg["s"].get<int>() << ',' << cfg["k_max"].get<int>()
        << ',' << (cfg["known_orders"].get<bool>() ? 1 : 0) << ',' << cfg["m"].get<int>() << ','
        << format_value(cfg["alpha"].get<double>()) << ',' << cfg["regime"].get<std::string>()
        << ',' << cell["failures"].get<int>();
    for (auto& [key, value] : cell["stats"].items()) {
      csv << ',' << format_value(value.get<double>());
    }
    csv << '\n';
  }

  ArtifactSet artifacts{fs::path(opts.output_dir)};
  artifacts.write_text("simulation.json", result_str + "\n");
  artifacts.write_text("simulation.csv", csv.str());
  if (opts.emit_samples) {
    std::ostringstream samples;
    samples << "cell,replication,value\n";
    int cell_index = 0;
    for (const json& cell : parsed["cells"]) {
      int rep = 0;
      for (const json& value : cell["samples"]) {
        samples << cell_index << ',' << rep++ << ',' << format_value(value.get<double>()) << '\n';
      }
      ++cell_index;
    }
    artifacts.write_text("samples.csv", samples.str());
  }
  artifacts.commit();

  std::cout << "simulate: " << opts.experiment << " cells=" << parsed["cells"].size()
            << " reps=" << opts.replications << " -> " << opts.output_dir << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"structural-factor modeling of high-dimensional time series"};
  app.require_subcommand(1);

  PipelineOptions pipeline;
  FactorOptions factor;
  EvaluateOptions evaluate;
  SimulateOptions simulate;
  int horizon = 1;
  int var_order = 1;

  CLI::App* decompose_cmd =
      app.add_subcommand("decompose", "trend + seasonal extraction with BIC order selection");
  add_pipeline_options(decompose_cmd, pipeline);

  CLI::App* factors_cmd =
      app.add_subcommand("factors", "canonical-correlation factor analysis of the irregulars");
  add_pipeline_options(factors_cmd, pipeline);
  add_factor_options(factors_cmd, factor);

  CLI::App* forecast_cmd = app.add_subcommand("forecast", "VAR factor forecast with reconstruction");
  add_pipeline_options(forecast_cmd, pipeline);
  add_factor_options(forecast_cmd, factor);
  forecast_cmd->add_option("--horizon", horizon, "forecast horizon h")->required();
  forecast_cmd->add_option("--var-order", var_order, "VAR order for the factor process");

  CLI::App* evaluate_cmd = app.add_subcommand("evaluate", "rolling out-of-sample forecast errors");
  add_pipeline_options(evaluate_cmd, pipeline);
  add_factor_options(evaluate_cmd, factor);
  evaluate_cmd->add_option("--variant", evaluate.variant, "pipeline variant: GT1, GT2 or VEC")
      ->check(CLI::IsMember({"GT1", "GT2", "VEC"}));
  evaluate_cmd->add_option("--h,--horizon", evaluate.horizon, "forecast horizon h");
  evaluate_cmd->add_option("--var-order", evaluate.var_order, "VAR order");
  evaluate_cmd->add_option("--origin-start", evaluate.origin_start, "first forecast origin (1-based)");
  evaluate_cmd->add_option("--train-fraction", evaluate.train_fraction,
                           "origin start as a fraction of T");

  CLI::App* simulate_cmd = app.add_subcommand("simulate", "seeded Monte Carlo experiments");
  simulate_cmd
      ->add_option("--experiment", simulate.experiment,
                   "table1, table2, theta_error, loading_discrepancy or null_calibration")
      ->required();
  simulate_cmd->add_option("--cell", simulate.cells, "cell spec, e.g. p=10,k0=5,T=500")->required();
  simulate_cmd->add_option("--reps", simulate.replications, "replications per cell (default 500)");
  simulate_cmd->add_option("--seed", simulate.seed, "master seed");
  simulate_cmd->add_option("--workers", simulate.workers, "worker threads (0 = hardware)");
  simulate_cmd->add_flag("--emit-samples", simulate.emit_samples, "also write per-replication samples");
  simulate_cmd->add_option("--output-dir", simulate.output_dir,
                           "artifact directory (default $STRUCTFACT_OUTPUT_DIR or .)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (decompose_cmd->parsed()) return cmd_decompose(pipeline);
    if (factors_cmd->parsed()) return cmd_factors(pipeline, factor);
    if (forecast_cmd->parsed()) return cmd_forecast(pipeline, factor, horizon, var_order);
    if (evaluate_cmd->parsed()) return cmd_evaluate(pipeline, factor, evaluate);
    if (simulate_cmd->parsed()) return cmd_simulate(simulate);
  } catch (const CliFailure& failure) {
    std::cerr << "error: " << failure.message << '\n';
    return failure.exit_code;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitNumeric;
  }
  return 0;
}
