#include "core/cca.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "core/error.hpp"

namespace structfact {

LaggedCov lagged_covariances(const Matrix& irregular, int m) {
  if (m < 1) {
    raise(ErrorCode::InvalidArgument, "lagged_covariances: m must be >= 1");
  }
  if (!irregular.allFinite()) {
    raise(ErrorCode::NonFiniteInput, "lagged_covariances: input contains NaN or infinity");
  }
  const Eigen::Index p = irregular.rows();
  const Eigen::Index t_count = irregular.cols();
  if (t_count <= static_cast<Eigen::Index>(m) * p + p) {
    raise(ErrorCode::InsufficientSample,
          "lagged_covariances: need T > (m+1)p, got T = " + std::to_string(t_count) +
              " with p = " + std::to_string(p) + ", m = " + std::to_string(m));
  }

  Matrix centered = irregular.colwise() - irregular.rowwise().mean();
  const double inv_t = 1.0 / static_cast<double>(t_count);

  // Block (a, b), a, b in {0..m}, is (1/T) sum_t e_{t-a} e_{t-b}' with
  // out-of-range terms dropped (the zero-fill convention): the surviving
  // products are e_u e_{u+a-b}' for u = 1..T-max(a,b).
  auto block = [&](int a, int b) -> Matrix {
    const Eigen::Index n = t_count - std::max(a, b);
    Matrix left = centered.middleCols(std::max(a, b) - a, n);
    Matrix right = centered.middleCols(std::max(a, b) - b, n);
    return inv_t * (left * right.transpose());
  };

  LaggedCov out;
  out.m = m;
  out.sigma_eta = block(0, 0);
  out.sigma_eta_etam.resize(p, static_cast<Eigen::Index>(m) * p);
  for (int j = 1; j <= m; ++j) {
    out.sigma_eta_etam.middleCols(static_cast<Eigen::Index>(j - 1) * p, p) = block(0, j);
  }
  out.sigma_etam.resize(static_cast<Eigen::Index>(m) * p, static_cast<Eigen::Index>(m) * p);
  for (int a = 1; a <= m; ++a) {
    for (int b = 1; b <= m; ++b) {
      out.sigma_etam.block(static_cast<Eigen::Index>(a - 1) * p, static_cast<Eigen::Index>(b - 1) * p,
                           p, p) = block(a, b);
    }
  }
  out.sigma_etam = 0.5 * (out.sigma_etam + out.sigma_etam.transpose()).eval();
  return out;
}

MHat build_m_hat(const LaggedCov& cov, double floor_rel) {
  MHat out;
  out.whitener = inv_sqrt_spd(cov.sigma_eta, floor_rel);
  out.sigma_sqrt = sqrt_spd(cov.sigma_eta, floor_rel);
  Matrix sigma_etam_inv = inv_spd(cov.sigma_etam, floor_rel);
  Matrix half = out.whitener * cov.sigma_eta_etam;  // p x mp
  Matrix m_hat = half * sigma_etam_inv * half.transpose();
  out.m_hat = 0.5 * (m_hat + m_hat.transpose());
  return out;
}

FactorModel estimate_loadings(const MHat& m_hat, const Matrix& irregular, int r) {
  const Eigen::Index p = m_hat.m_hat.rows();
  if (r < 0 || r > p) {
    raise(ErrorCode::InvalidArgument, "estimate_loadings: r must lie in [0, p]");
  }
  SymEig eig = sym_eig(m_hat.m_hat);

  FactorModel model;
  model.whitener = m_hat.whitener;
  model.sigma_sqrt = m_hat.sigma_sqrt;
  model.loadings = eig.eigenvectors;
  model.eigenvalues = eig.eigenvalues.cwiseMax(0.0).cwiseMin(1.0);
  model.r = r;

  Matrix centered = irregular.colwise() - irregular.rowwise().mean();
  Matrix variates = model.loadings.transpose() * (model.whitener * centered);  // p x T
  model.factors = variates.topRows(r);
  model.noise_variates = variates.bottomRows(p - r);
  return model;
}

TestStatistic s_t_statistic(const Vector& eigenvalues, int v, int num_times, int m) {
  const int p = static_cast<int>(eigenvalues.size());
  if (v < 1 || v > p) {
    raise(ErrorCode::InvalidArgument, "s_t_statistic: v must lie in [1, p]");
  }
  constexpr double kClampHigh = 1.0 - 1e-12;
  double sum = 0.0;
  for (int i = 1; i <= v; ++i) {
    double lambda_sq = eigenvalues(p - i);  // the i-th smallest
    lambda_sq = std::clamp(lambda_sq, 0.0, kClampHigh);
    if (lambda_sq >= 1.0) {
      raise(ErrorCode::DomainFailure, "s_t_statistic: eigenvalue at 1 after clamping");
    }
    sum += std::log1p(-lambda_sq);
  }
  TestStatistic out;
  out.s_t = -static_cast<double>(num_times - m + 1) * sum;
  out.df = static_cast<long>(v) * (static_cast<long>(m - 1) * p + v);
  return out;
}

double c_t_statistic(double s_t, long df) {
  if (df < 1) {
    raise(ErrorCode::InvalidArgument, "c_t_statistic: df must be >= 1");
  }
  return (s_t - static_cast<double>(df)) / std::sqrt(2.0 * static_cast<double>(df));
}

TestReport select_num_factors(const Vector& eigenvalues, int num_times, int m, int p, double alpha,
                              TestRegime regime, int regime_threshold) {
  if (p != static_cast<int>(eigenvalues.size())) {
    raise(ErrorCode::InvalidArgument, "select_num_factors: p does not match eigenvalue count");
  }
  if (!(alpha > 0.0 && alpha < 1.0)) {
    raise(ErrorCode::InvalidArgument, "select_num_factors: alpha must lie in (0, 1)");
  }
  TestRegime resolved = regime;
  if (regime == TestRegime::Auto) {
    resolved = (p <= regime_threshold) ? TestRegime::ChiSquare : TestRegime::Normal;
  }

  TestReport report;
  report.alpha = alpha;
  report.regime_used = resolved;
  report.rows.reserve(static_cast<size_t>(p));

  int first_rejection = 0;  // 0 = none
  for (int v = 1; v <= p; ++v) {
    TestStatistic stat = s_t_statistic(eigenvalues, v, num_times, m);
    TestRow row;
    row.v = v;
    row.s_t = stat.s_t;
    row.df = stat.df;
    row.chi_square_p_value = chi_squared_upper_tail(stat.s_t, static_cast<double>(stat.df));
    row.c_t = c_t_statistic(stat.s_t, stat.df);
    row.normal_p_value = normal_upper_tail(row.c_t);
    double p_value =
        (resolved == TestRegime::ChiSquare) ? row.chi_square_p_value : row.normal_p_value;
    row.rejected = p_value < alpha;
    if (row.rejected && first_rejection == 0) first_rejection = v;
    report.rows.push_back(row);
  }

  report.selected_v = (first_rejection == 0) ? p : first_rejection - 1;
  report.selected_r = p - report.selected_v;
  return report;
}

int ratio_estimator(const Vector& eigenvalues) {
  const int p = static_cast<int>(eigenvalues.size());
  if (p < 2) {
    raise(ErrorCode::InvalidArgument, "ratio_estimator: need p >= 2");
  }
  if (eigenvalues.maxCoeff() <= 1e-14) {
    raise(ErrorCode::DegenerateSpectrum, "ratio_estimator: all eigenvalues are numerically zero");
  }
  int best_j = 1;
  double best_ratio = std::numeric_limits<double>::infinity();
  for (int j = 1; j <= p - 1; ++j) {
    double denom = std::sqrt(std::max(eigenvalues(j - 1), 0.0));
    double numer = std::sqrt(std::max(eigenvalues(j), 0.0));
    if (denom == 0.0) continue;  // treat as +infinity
    double ratio = numer / denom;
    if (ratio < best_ratio) {
      best_ratio = ratio;
      best_j = j;
    }
  }
  return best_j;
}

FactorAnalysis analyze_factors(const Matrix& irregular, int m, double alpha, TestRegime regime,
                               int fixed_r, double floor_rel) {
  FactorAnalysis out;
  out.m = m;
  LaggedCov cov = lagged_covariances(irregular, m);
  MHat m_hat = build_m_hat(cov, floor_rel);
  SymEig eig = sym_eig(m_hat.m_hat);
  Vector clamped = eig.eigenvalues.cwiseMax(0.0).cwiseMin(1.0);
  out.report = select_num_factors(clamped, static_cast<int>(irregular.cols()), m,
                                  static_cast<int>(irregular.rows()), alpha, regime);
  int r = (fixed_r >= 0) ? fixed_r : out.report.selected_r;
  out.model = estimate_loadings(m_hat, irregular, r);
  return out;
}

}  // namespace structfact
