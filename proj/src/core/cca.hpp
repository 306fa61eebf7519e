#pragma once

#include <vector>

#include "core/numerics.hpp"

namespace structfact {

// Sample covariances of the irregular panel and its stacked lag vector
// eta_{t,m} = (eta_{t-1}', ..., eta_{t-m}')'. All sums run t = 1..T with
// divisor T; centered values whose lag index falls outside 1..T enter as
// zero vectors.
struct LaggedCov {
  Matrix sigma_eta;       // p x p
  Matrix sigma_eta_etam;  // p x mp
  Matrix sigma_etam;      // mp x mp
  int m = 1;
};

LaggedCov lagged_covariances(const Matrix& irregular, int m);

// Whitened lag-covariance matrix
//   M = W * Sigma_{eta eta_m} * Sigma_{eta_m}^{-1} * Sigma_{eta_m eta} * W,
// W the symmetric inverse square root of Sigma_eta. Its eigenvalues are the
// squared canonical correlations between eta_t and its lags.
struct MHat {
  Matrix m_hat;       // p x p, symmetrized
  Matrix whitener;    // W = Sigma_eta^{-1/2}
  Matrix sigma_sqrt;  // Sigma_eta^{1/2}, from the same floored spectrum
};

MHat build_m_hat(const LaggedCov& cov, double floor_rel = 1e-10);

struct FactorModel {
  Matrix whitener;      // p x p
  Matrix sigma_sqrt;    // p x p, inverse of the whitener
  Matrix loadings;      // p x p orthonormal, [L1 | L2]
  Vector eigenvalues;   // squared canonical correlations, descending, in [0,1]
  int r = 0;            // number of common factors
  Matrix factors;         // r x T
  Matrix noise_variates;  // (p-r) x T
};

// L-hat columns are the eigenvectors of M-hat (descending eigenvalues,
// deterministic sign); factors are f_t = L1' W (eta_t - eta_bar).
FactorModel estimate_loadings(const MHat& m_hat, const Matrix& irregular, int r);

// S_T(v) = -(T-m+1) * sum_{i=1..v} log(1 - lambda^2_{p-i+1}) over the v
// smallest squared canonical correlations; chi-square df = v[(m-1)p+v].
struct TestStatistic {
  double s_t = 0.0;
  long df = 0;
};

TestStatistic s_t_statistic(const Vector& eigenvalues, int v, int num_times, int m);

// Standardized version for diverging p: (S_T - df) / sqrt(2 df).
double c_t_statistic(double s_t, long df);

enum class TestRegime { Auto, ChiSquare, Normal };

struct TestRow {
  int v = 0;
  double s_t = 0.0;
  long df = 0;
  double chi_square_p_value = 1.0;
  double c_t = 0.0;
  double normal_p_value = 1.0;
  bool rejected = false;
};

struct TestReport {
  std::vector<TestRow> rows;  // v = 1..p
  int selected_v = 0;         // largest v not rejected before the first rejection
  int selected_r = 0;         // p - selected_v
  double alpha = 0.05;
  TestRegime regime_used = TestRegime::ChiSquare;  // resolved regime
};

// Sequential testing v = 1, 2, ... until the first rejection. Regime Auto
// uses the chi-square reference for p <= regime_threshold and the normal
// approximation otherwise.
TestReport select_num_factors(const Vector& eigenvalues, int num_times, int m, int p, double alpha,
                              TestRegime regime = TestRegime::Auto, int regime_threshold = 10);

// Competitor baseline: r = argmin_{1<=j<=p-1} lambda_{j+1}/lambda_j on the
// square-rooted eigenvalues (canonical correlations). Ties take the smallest
// j; ratios with zero denominator are skipped.
int ratio_estimator(const Vector& eigenvalues);

// Convenience pipeline: covariances -> M-hat -> loadings (+ test report when
// r < 0, i.e. r selected by the sequential test).
struct FactorAnalysis {
  FactorModel model;
  TestReport report;
  int m = 2;
};

FactorAnalysis analyze_factors(const Matrix& irregular, int m, double alpha = 0.05,
                               TestRegime regime = TestRegime::Auto, int fixed_r = -1,
                               double floor_rel = 1e-10);

}  // namespace structfact
