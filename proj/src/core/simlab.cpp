#include "core/simlab.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <thread>

#include "core/error.hpp"
#include "core/rng.hpp"

namespace structfact {

void DgpConfig::validate() const {
  if (p < 1 || num_times < 2) {
    raise(ErrorCode::InvalidArgument, "DgpConfig: need p >= 1 and T >= 2");
  }
  if (r < 0 || r > p) {
    raise(ErrorCode::InvalidArgument, "DgpConfig: need 0 <= r <= p");
  }
  if (k0 < 0 || d0 < 0) {
    raise(ErrorCode::InvalidArgument, "DgpConfig: orders must be nonnegative");
  }
  OrderSpec order{d0, k0, period};
  order.validate(num_times);
  if (!(phi_lo <= phi_hi) || !(coef_lo <= coef_hi)) {
    raise(ErrorCode::InvalidArgument, "DgpConfig: ranges must be ordered");
  }
}

namespace {

Matrix draw_uniform_matrix(Rng& rng, Eigen::Index rows, Eigen::Index cols, double lo, double hi) {
  Matrix out(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) {
      out(i, j) = rng.uniform(lo, hi);
    }
  }
  return out;
}

double condition_number(const Matrix& a) {
  Eigen::JacobiSVD<Matrix> svd(a);
  double smallest = svd.singularValues().tail(1)(0);
  if (smallest <= 0.0) return std::numeric_limits<double>::infinity();
  return svd.singularValues()(0) / smallest;
}

}  // namespace

DgpInstance generate(const DgpConfig& config) {
  config.validate();
  Rng rng(config.seed);
  const int p = config.p;
  const int t_count = config.num_times;
  const int r = config.r;
  OrderSpec order{config.d0, config.k0, config.period};

  DgpInstance out;
  // Fixed draw order: Theta, Ltilde (with condition-number rejection), Phi,
  // factor innovations (burn-in then sample), noise variates.
  out.theta_true = draw_uniform_matrix(rng, p, order.num_columns(), config.coef_lo, config.coef_hi);

  constexpr double kMaxCondition = 1e8;
  constexpr int kMaxRedraws = 100;
  int attempts = 0;
  for (;;) {
    out.l_tilde_true = draw_uniform_matrix(rng, p, p, config.coef_lo, config.coef_hi);
    if (condition_number(out.l_tilde_true) <= kMaxCondition) break;
    if (++attempts >= kMaxRedraws) {
      raise(ErrorCode::DegenerateDraw,
            "generate: transformation matrix stayed ill-conditioned after " +
                std::to_string(kMaxRedraws) + " redraws");
    }
  }

  out.phi_true.resize(r);
  for (int i = 0; i < r; ++i) out.phi_true(i) = rng.uniform(config.phi_lo, config.phi_hi);

  constexpr int kBurnIn = 200;
  out.factors_true = Matrix::Zero(r, t_count);
  if (r > 0) {
    Vector state = Vector::Zero(r);
    for (int t = 0; t < kBurnIn + t_count; ++t) {
      for (int i = 0; i < r; ++i) {
        state(i) = out.phi_true(i) * state(i) + rng.normal();
      }
      if (t >= kBurnIn) out.factors_true.col(t - kBurnIn) = state;
    }
  }

  Matrix noise(p - r, t_count);
  for (Eigen::Index t = 0; t < t_count; ++t) {
    for (Eigen::Index i = 0; i < p - r; ++i) noise(i, t) = rng.normal();
  }

  Matrix variates(p, t_count);
  variates.topRows(r) = out.factors_true;
  variates.bottomRows(p - r) = noise;
  out.irregular_true = out.l_tilde_true * variates;

  Matrix design = build_design(t_count, order);  // T x q
  Matrix values = out.theta_true * design.transpose() + out.irregular_true;
  out.panel = make_panel(values, config.period);

  // Scoring target: the true loadings whitened with the sample covariance of
  // the generated irregular series (recomputed per replication).
  if (r > 0) {
    Matrix centered = out.irregular_true.colwise() - out.irregular_true.rowwise().mean();
    Matrix sigma = centered * centered.transpose() / static_cast<double>(t_count);
    out.l1_true_whitened = inv_sqrt_spd(sigma) * out.l_tilde_true.leftCols(r);
  } else {
    out.l1_true_whitened = Matrix::Zero(p, 0);
  }
  return out;
}

namespace {

void require_orthonormal(const Matrix& h, const char* who) {
  Matrix gram = h.transpose() * h;
  double err = (gram - Matrix::Identity(h.cols(), h.cols())).cwiseAbs().maxCoeff();
  if (err > 1e-8) {
    raise(ErrorCode::NotOrthonormal, std::string(who) + ": columns are not orthonormal");
  }
}

double clamped_root(double one_minus_ratio) {
  return std::sqrt(std::clamp(one_minus_ratio, 0.0, 1.0));
}

}  // namespace

double discrepancy_d(const Matrix& h1, const Matrix& h2) {
  if (h1.cols() != h2.cols() || h1.rows() != h2.rows()) {
    raise(ErrorCode::InvalidArgument, "discrepancy_d: dimensions must match");
  }
  if (h1.cols() == 0) {
    raise(ErrorCode::InvalidArgument, "discrepancy_d: need at least one column");
  }
  require_orthonormal(h1, "discrepancy_d");
  require_orthonormal(h2, "discrepancy_d");
  double trace = (h1.transpose() * h2).squaredNorm();  // tr(H1 H1' H2 H2')
  return clamped_root(1.0 - trace / static_cast<double>(h1.cols()));
}

double discrepancy_d_tilde(const Matrix& h1, const Matrix& h2) {
  if (h1.rows() != h2.rows()) {
    raise(ErrorCode::InvalidArgument, "discrepancy_d_tilde: row counts must match");
  }
  if (h1.cols() == 0 || h2.cols() == 0) {
    raise(ErrorCode::InvalidArgument, "discrepancy_d_tilde: need at least one column");
  }
  require_orthonormal(h1, "discrepancy_d_tilde");
  require_orthonormal(h2, "discrepancy_d_tilde");
  double trace = (h1.transpose() * h2).squaredNorm();
  double denom = static_cast<double>(std::min(h1.cols(), h2.cols()));
  return clamped_root(1.0 - trace / denom);
}

double discrepancy_d_bar(const Matrix& h1, const Matrix& h2) {
  if (h1.rows() != h2.rows()) {
    raise(ErrorCode::InvalidArgument, "discrepancy_d_bar: row counts must match");
  }
  if (h1.cols() == 0 || h2.cols() == 0) {
    raise(ErrorCode::InvalidArgument, "discrepancy_d_bar: need at least one column");
  }
  auto orthobasis = [](const Matrix& h, const char* who) -> Matrix {
    Eigen::ColPivHouseholderQR<Matrix> qr(h);
    qr.setThreshold(1e-10);
    if (qr.rank() < h.cols()) {
      raise(ErrorCode::RankDeficient,
            std::string(who) + ": input has rank " + std::to_string(qr.rank()) + " < " +
                std::to_string(h.cols()) + " columns",
            qr.rank());
    }
    Matrix q = qr.householderQ();
    return q.leftCols(h.cols());
  };
  // tr(P1 P2) = ||Q1' Q2||_F^2 for orthonormal bases of the column spaces.
  Matrix q1 = orthobasis(h1, "discrepancy_d_bar");
  Matrix q2 = orthobasis(h2, "discrepancy_d_bar");
  double trace = (q1.transpose() * q2).squaredNorm();
  double denom = static_cast<double>(std::min(h1.cols(), h2.cols()));
  return clamped_root(1.0 - trace / denom);
}

Experiment experiment_from_name(const std::string& name) {
  if (name == "table1") return Experiment::Table1;
  if (name == "table2") return Experiment::Table2;
  if (name == "theta_error") return Experiment::ThetaError;
  if (name == "loading_discrepancy") return Experiment::LoadingDiscrepancy;
  if (name == "null_calibration") return Experiment::NullCalibration;
  raise(ErrorCode::InvalidArgument, "unknown experiment: " + name);
}

std::string experiment_name(Experiment experiment) {
  switch (experiment) {
    case Experiment::Table1: return "table1";
    case Experiment::Table2: return "table2";
    case Experiment::ThetaError: return "theta_error";
    case Experiment::LoadingDiscrepancy: return "loading_discrepancy";
    case Experiment::NullCalibration: return "null_calibration";
  }
  raise(ErrorCode::InvalidArgument, "unknown experiment enum");
}

namespace {

struct RepOutcome {
  bool ok = false;
  // Generic value slots; meaning depends on the experiment.
  double a = 0.0, b = 0.0, c = 0.0, d = 0.0;
};

int resolved_k_max(const CellConfig& cell) {
  if (cell.k_max >= 0) return cell.k_max;
  return OrderSpec{0, 0, cell.dgp.period}.max_harmonics();
}

// Fits the deterministic part with either the true orders or BIC-selected k
// (trend degree treated as known), returning the residual panel.
Decomposition decompose_for_cell(const CellConfig& cell, const DgpInstance& instance) {
  int k = cell.dgp.k0;
  if (!cell.known_orders) {
    std::vector<int> k_grid;
    for (int kk = 0; kk <= resolved_k_max(cell); ++kk) k_grid.push_back(kk);
    BicTable table = select_orders_grid(instance.panel, k_grid, {cell.dgp.d0},
                                        default_penalty_ct(cell.dgp.num_times));
    k = table.selected_k;
  }
  return fit(instance.panel, OrderSpec{cell.dgp.d0, k, cell.dgp.period});
}

RepOutcome run_replication(Experiment experiment, const CellConfig& cell, std::uint64_t seed) {
  DgpConfig dgp = cell.dgp;
  dgp.seed = seed;
  RepOutcome outcome;

  switch (experiment) {
    case Experiment::Table1: {
      DgpInstance instance = generate(dgp);
      std::vector<int> k_grid;
      for (int k = 0; k <= resolved_k_max(cell); ++k) k_grid.push_back(k);
      BicTable table = select_orders_grid(instance.panel, k_grid, {dgp.d0},
                                          default_penalty_ct(dgp.num_times));
      outcome.a = (table.selected_k == dgp.k0) ? 1.0 : 0.0;
      break;
    }
    case Experiment::Table2: {
      DgpInstance instance = generate(dgp);
      Decomposition decomposition = decompose_for_cell(cell, instance);
      LaggedCov cov = lagged_covariances(decomposition.irregular, cell.m);
      MHat m_hat = build_m_hat(cov);
      SymEig eig = sym_eig(m_hat.m_hat);
      Vector clamped = eig.eigenvalues.cwiseMax(0.0).cwiseMin(1.0);
      TestReport report = select_num_factors(clamped, dgp.num_times, cell.m, dgp.p, cell.alpha,
                                             cell.regime);
      outcome.a = (report.selected_r == dgp.r) ? 1.0 : 0.0;
      outcome.b = (ratio_estimator(clamped) == dgp.r) ? 1.0 : 0.0;
      break;
    }
    case Experiment::ThetaError: {
      DgpInstance instance = generate(dgp);
      Decomposition decomposition = decompose_for_cell(cell, instance);
      outcome.a = (decomposition.theta - instance.theta_true).norm() /
                  std::sqrt(static_cast<double>(dgp.p));
      break;
    }
    case Experiment::LoadingDiscrepancy: {
      DgpInstance instance = generate(dgp);
      Decomposition decomposition = decompose_for_cell(cell, instance);
      FactorAnalysis analysis = analyze_factors(decomposition.irregular, cell.m, cell.alpha,
                                                cell.regime, /*fixed_r=*/dgp.r);
      Matrix l1_hat = analysis.model.loadings.leftCols(dgp.r);
      outcome.a = discrepancy_d_bar(l1_hat, instance.l1_true_whitened);
      break;
    }
    case Experiment::NullCalibration: {
      DgpConfig null_dgp = dgp;
      null_dgp.r = 0;
      DgpInstance instance = generate(null_dgp);
      CellConfig null_cell = cell;
      null_cell.dgp = null_dgp;
      Decomposition decomposition = decompose_for_cell(null_cell, instance);
      LaggedCov cov = lagged_covariances(decomposition.irregular, cell.m);
      MHat m_hat = build_m_hat(cov);
      SymEig eig = sym_eig(m_hat.m_hat);
      Vector clamped = eig.eigenvalues.cwiseMax(0.0).cwiseMin(1.0);
      TestStatistic stat = s_t_statistic(clamped, dgp.p, dgp.num_times, cell.m);
      outcome.a = stat.s_t;
      outcome.b =
          (chi_squared_upper_tail(stat.s_t, static_cast<double>(stat.df)) < cell.alpha) ? 1.0 : 0.0;
      outcome.c = c_t_statistic(stat.s_t, stat.df);
      break;
    }
  }
  outcome.ok = true;
  return outcome;
}

double mean_of(const std::vector<double>& xs) {
  double sum = 0.0;
  for (double x : xs) sum += x;
  return xs.empty() ? 0.0 : sum / static_cast<double>(xs.size());
}

double quantile_of(std::vector<double> xs, double q) {
  if (xs.empty()) return 0.0;
  std::sort(xs.begin(), xs.end());
  double pos = q * static_cast<double>(xs.size() - 1);
  size_t lo = static_cast<size_t>(pos);
  size_t hi = std::min(lo + 1, xs.size() - 1);
  double frac = pos - static_cast<double>(lo);
  return xs[lo] * (1.0 - frac) + xs[hi] * frac;
}

void summarize_cell(Experiment experiment, CellResult& cell,
                    const std::vector<RepOutcome>& outcomes) {
  std::vector<double> a, b, c;
  for (const RepOutcome& o : outcomes) {
    if (!o.ok) continue;
    a.push_back(o.a);
    b.push_back(o.b);
    c.push_back(o.c);
  }
  const double n = static_cast<double>(a.size());
  switch (experiment) {
    case Experiment::Table1: {
      double prob = mean_of(a);
      cell.stats["prob_correct_k"] = prob;
      cell.stats["mc_standard_error"] = std::sqrt(std::max(prob * (1.0 - prob), 0.0) / n);
      cell.samples = a;
      break;
    }
    case Experiment::Table2: {
      double test = mean_of(a);
      double ratio = mean_of(b);
      cell.stats["prob_test"] = test;
      cell.stats["prob_ratio"] = ratio;
      cell.stats["mc_standard_error_test"] = std::sqrt(std::max(test * (1.0 - test), 0.0) / n);
      cell.stats["mc_standard_error_ratio"] = std::sqrt(std::max(ratio * (1.0 - ratio), 0.0) / n);
      cell.samples = a;
      break;
    }
    case Experiment::ThetaError:
    case Experiment::LoadingDiscrepancy: {
      cell.stats["median"] = quantile_of(a, 0.5);
      cell.stats["q1"] = quantile_of(a, 0.25);
      cell.stats["q3"] = quantile_of(a, 0.75);
      cell.stats["mean"] = mean_of(a);
      cell.samples = a;
      break;
    }
    case Experiment::NullCalibration: {
      cell.stats["mean_s_t"] = mean_of(a);
      cell.stats["rejection_rate"] = mean_of(b);
      double c_mean = mean_of(c);
      double ss = 0.0;
      for (double x : c) ss += (x - c_mean) * (x - c_mean);
      cell.stats["c_t_mean"] = c_mean;
      cell.stats["c_t_variance"] = (c.size() > 1) ? ss / (n - 1.0) : 0.0;
      cell.samples = a;
      break;
    }
  }
}

}  // namespace

RunResult run_table(Experiment experiment, const std::vector<CellConfig>& cells, int replications,
                    std::uint64_t seed, int workers) {
  if (replications < 1) {
    raise(ErrorCode::InvalidArgument, "run_table: need at least one replication");
  }
  for (const CellConfig& cell : cells) cell.dgp.validate();
  if (workers <= 0) {
    workers = static_cast<int>(std::thread::hardware_concurrency());
    if (workers <= 0) workers = 1;
  }

  RunResult result;
  result.experiment = experiment;
  result.seed = seed;
  result.replications = replications;

  for (size_t cell_index = 0; cell_index < cells.size(); ++cell_index) {
    const CellConfig& cell = cells[cell_index];
    std::vector<RepOutcome> outcomes(static_cast<size_t>(replications));

    // Replication seeds depend only on (master seed, cell, replication), so
    // the outcome slots are identical for any worker count.
    std::atomic<int> next{0};
    auto worker = [&]() {
      for (;;) {
        int rep = next.fetch_add(1);
        if (rep >= replications) break;
        std::uint64_t rep_seed = derive_seed(seed, cell_index, static_cast<std::uint64_t>(rep));
        try {
          outcomes[static_cast<size_t>(rep)] = run_replication(experiment, cell, rep_seed);
        } catch (const Error&) {
          outcomes[static_cast<size_t>(rep)].ok = false;
        }
      }
    };
    std::vector<std::thread> pool;
    int thread_count = std::min(workers, replications);
    pool.reserve(static_cast<size_t>(thread_count));
    for (int i = 0; i < thread_count; ++i) pool.emplace_back(worker);
    for (std::thread& t : pool) t.join();

    CellResult cell_result;
    cell_result.cell = cell;
    cell_result.replications = replications;
    for (const RepOutcome& o : outcomes) {
      if (!o.ok) ++cell_result.failures;
    }
    if (cell_result.failures * 100 > replications) {
      raise(ErrorCode::DegenerateDraw,
            "run_table: cell " + std::to_string(cell_index) + " had " +
                std::to_string(cell_result.failures) + "/" + std::to_string(replications) +
                " failed replications (> 1%)",
            static_cast<long>(cell_index), cell_result.failures);
    }
    summarize_cell(experiment, cell_result, outcomes);
    result.cells.push_back(std::move(cell_result));
  }
  return result;
}

}  // namespace structfact
