#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "core/cca.hpp"
#include "core/error.hpp"
#include "core/rng.hpp"
#include "core/simlab.hpp"

using namespace structfact;

namespace {

Matrix random_matrix(Rng& rng, int rows, int cols) {
  Matrix out(rows, cols);
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < cols; ++j) out(i, j) = rng.normal();
  }
  return out;
}

// Brute-force oracle for the sample covariances: explicit loops over the
// centered panel with zero vectors outside 1..T.
struct CovOracle {
  Matrix sigma_eta;
  Matrix sigma_eta_etam;
  Matrix sigma_etam;
};

CovOracle cov_oracle(const Matrix& irregular, int m) {
  const int p = static_cast<int>(irregular.rows());
  const int t_count = static_cast<int>(irregular.cols());
  Vector mean = irregular.rowwise().mean();
  auto centered_at = [&](int t) -> Vector {  // t is 1-based; zero outside range
    if (t < 1 || t > t_count) return Vector::Zero(p);
    return irregular.col(t - 1) - mean;
  };
  auto stacked_at = [&](int t) -> Vector {
    Vector out(m * p);
    for (int lag = 1; lag <= m; ++lag) out.segment((lag - 1) * p, p) = centered_at(t - lag);
    return out;
  };
  CovOracle oracle;
  oracle.sigma_eta = Matrix::Zero(p, p);
  oracle.sigma_eta_etam = Matrix::Zero(p, m * p);
  oracle.sigma_etam = Matrix::Zero(m * p, m * p);
  for (int t = 1; t <= t_count; ++t) {
    Vector e = centered_at(t);
    Vector s = stacked_at(t);
    oracle.sigma_eta += e * e.transpose();
    oracle.sigma_eta_etam += e * s.transpose();
    oracle.sigma_etam += s * s.transpose();
  }
  oracle.sigma_eta /= t_count;
  oracle.sigma_eta_etam /= t_count;
  oracle.sigma_etam /= t_count;
  return oracle;
}

}  // namespace

TEST_CASE("lagged_covariances: synthetically whitened input has identity covariance") {
  Rng rng(5);
  Matrix raw = random_matrix(rng, 4, 200);
  Matrix centered = raw.colwise() - raw.rowwise().mean();
  Matrix sigma = centered * centered.transpose() / 200.0;
  Matrix whitened = inv_sqrt_spd(sigma) * centered;
  LaggedCov cov = lagged_covariances(whitened, 1);
  CHECK((cov.sigma_eta - Matrix::Identity(4, 4)).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("lagged_covariances: constant series gives a zero covariance") {
  Matrix constant = Matrix::Constant(2, 50, 7.5);
  LaggedCov cov = lagged_covariances(constant, 1);
  CHECK(cov.sigma_eta.cwiseAbs().maxCoeff() == 0.0);
  CHECK(cov.sigma_eta_etam.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("lagged_covariances: matches the double-loop oracle entrywise") {
  Rng rng(71);
  for (int m : {1, 2, 3}) {
    Matrix irregular = random_matrix(rng, 3, 50);
    LaggedCov cov = lagged_covariances(irregular, m);
    CovOracle oracle = cov_oracle(irregular, m);
    CHECK((cov.sigma_eta - oracle.sigma_eta).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK((cov.sigma_eta_etam - oracle.sigma_eta_etam).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK((cov.sigma_etam - oracle.sigma_etam).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK((cov.sigma_eta - cov.sigma_eta.transpose()).cwiseAbs().maxCoeff() <= 1e-10);
    CHECK((cov.sigma_etam - cov.sigma_etam.transpose()).cwiseAbs().maxCoeff() <= 1e-10);
  }
}

TEST_CASE("lagged_covariances: sample-size guard") {
  Rng rng(1);
  Matrix small = random_matrix(rng, 4, 12);  // T <= (m+1)p
  CHECK_THROWS_AS(lagged_covariances(small, 2), Error);
}

TEST_CASE("build_m_hat: symmetric with eigenvalues inside [0,1] bands") {
  Rng rng(31);
  for (int trial = 0; trial < 10; ++trial) {
    Matrix irregular = random_matrix(rng, 4, 150);
    LaggedCov cov = lagged_covariances(irregular, 2);
    MHat m_hat = build_m_hat(cov);
    CHECK((m_hat.m_hat - m_hat.m_hat.transpose()).cwiseAbs().maxCoeff() <= 1e-12);
    SymEig eig = sym_eig(m_hat.m_hat);
    CHECK(eig.eigenvalues.minCoeff() >= -1e-10);
    CHECK(eig.eigenvalues.maxCoeff() <= 1.0 + 1e-10);
  }
}

TEST_CASE("build_m_hat: eigenvalues match an independent SVD oracle") {
  Rng rng(32);
  for (int trial = 0; trial < 8; ++trial) {
    int p = 2 + trial % 4;  // p <= 5
    int m = 1 + trial % 3;  // m <= 3
    Matrix irregular = random_matrix(rng, p, 80 + 20 * m * p);
    LaggedCov cov = lagged_covariances(irregular, m);
    MHat m_hat = build_m_hat(cov);
    SymEig eig = sym_eig(m_hat.m_hat);

    // Oracle: squared singular values of W * Sigma_{eta eta_m} * Sigma_{eta_m}^{-1/2}.
    Matrix half = inv_sqrt_spd(cov.sigma_eta) * cov.sigma_eta_etam * inv_sqrt_spd(cov.sigma_etam);
    Eigen::JacobiSVD<Matrix> svd(half);
    Vector squared = svd.singularValues().cwiseAbs2();
    for (int j = 0; j < p; ++j) {
      CHECK(eig.eigenvalues(j) == doctest::Approx(squared(j)).epsilon(1e-8));
    }
  }
}

TEST_CASE("build_m_hat: white-noise eigenvalues are small at large T") {
  int ok = 0;
  const int reps = 20;
  for (int rep = 0; rep < reps; ++rep) {
    Rng rng(derive_seed(404, static_cast<std::uint64_t>(rep)));
    Matrix irregular = random_matrix(rng, 4, 5000);
    MHat m_hat = build_m_hat(lagged_covariances(irregular, 2));
    if (sym_eig(m_hat.m_hat).eigenvalues.maxCoeff() <= 0.02) ++ok;
  }
  CHECK(static_cast<double>(ok) / reps >= 0.95);
}

TEST_CASE("build_m_hat: r strong factors give exactly r separated eigenvalues") {
  // Strong factors: population lambda^2 = phi^2 for a diagonal VAR(1), so
  // phi >= 0.5 keeps every factor eigenvalue above 0.25 while the noise
  // eigenvalues stay near (sqrt(p) + sqrt(mp))^2 / T ~ 0.03.
  int ok = 0;
  const int reps = 10;
  for (int rep = 0; rep < reps; ++rep) {
    DgpConfig config;
    config.p = 10;
    config.num_times = 2000;
    config.phi_lo = 0.5;
    config.seed = derive_seed(405, static_cast<std::uint64_t>(rep));
    DgpInstance instance = generate(config);
    Decomposition decomposition =
        fit(instance.panel, OrderSpec{config.d0, config.k0, config.period});
    MHat m_hat = build_m_hat(lagged_covariances(decomposition.irregular, 2));
    Vector eigenvalues = sym_eig(m_hat.m_hat).eigenvalues;
    int above = 0;
    for (int j = 0; j < 10; ++j) {
      if (eigenvalues(j) > 0.1) ++above;
    }
    if (above == 3) ++ok;
  }
  CHECK(ok >= 9);
}

TEST_CASE("estimate_loadings: boundaries r = 0 and r = p") {
  Rng rng(55);
  Matrix irregular = random_matrix(rng, 4, 100);
  MHat m_hat = build_m_hat(lagged_covariances(irregular, 2));

  FactorModel all = estimate_loadings(m_hat, irregular, 4);
  CHECK(all.factors.rows() == 4);
  CHECK(all.noise_variates.rows() == 0);

  FactorModel none = estimate_loadings(m_hat, irregular, 0);
  CHECK(none.factors.rows() == 0);
  CHECK(none.noise_variates.rows() == 4);
}

TEST_CASE("estimate_loadings: orthonormal loadings and unit variate covariance") {
  Rng rng(56);
  for (int trial = 0; trial < 5; ++trial) {
    Matrix irregular = random_matrix(rng, 5, 300);
    MHat m_hat = build_m_hat(lagged_covariances(irregular, 2));
    FactorModel model = estimate_loadings(m_hat, irregular, 2);

    Matrix gram = model.loadings.transpose() * model.loadings;
    CHECK((gram - Matrix::Identity(5, 5)).cwiseAbs().maxCoeff() <= 1e-8);

    Matrix variates(5, 300);
    variates.topRows(2) = model.factors;
    variates.bottomRows(3) = model.noise_variates;
    Matrix centered = variates.colwise() - variates.rowwise().mean();
    Matrix cov = centered * centered.transpose() / 300.0;
    CHECK((cov - Matrix::Identity(5, 5)).cwiseAbs().maxCoeff() <= 1e-6);

    for (int j = 0; j < 5; ++j) {
      CHECK(model.eigenvalues(j) >= 0.0);
      CHECK(model.eigenvalues(j) <= 1.0);
    }
  }
}

TEST_CASE("estimate_loadings: loading-space error shrinks with T") {
  auto median_discrepancy = [](int t_count, int reps, std::uint64_t seed_base) {
    std::vector<double> values;
    for (int rep = 0; rep < reps; ++rep) {
      DgpConfig config;
      config.p = 10;
      config.num_times = t_count;
      config.seed = derive_seed(seed_base, static_cast<std::uint64_t>(rep));
      DgpInstance instance = generate(config);
      Decomposition decomposition =
          fit(instance.panel, OrderSpec{config.d0, config.k0, config.period});
      FactorAnalysis analysis =
          analyze_factors(decomposition.irregular, 2, 0.05, TestRegime::Auto, /*fixed_r=*/3);
      values.push_back(
          discrepancy_d_bar(analysis.model.loadings.leftCols(3), instance.l1_true_whitened));
    }
    std::sort(values.begin(), values.end());
    return values[values.size() / 2];
  };
  double at_500 = median_discrepancy(500, 60, 81);
  double at_2000 = median_discrepancy(2000, 60, 82);
  CHECK(at_2000 < at_500);
}

TEST_CASE("s_t_statistic: zero eigenvalues give a zero statistic") {
  Vector eigenvalues = Vector::Zero(6);
  TestStatistic stat = s_t_statistic(eigenvalues, 3, 100, 2);
  CHECK(stat.s_t == 0.0);
}

TEST_CASE("s_t_statistic: direct formula and degrees of freedom") {
  // v = 1 uses only the smallest eigenvalue; lambda^2 = 0.5, T = 101, m = 2.
  Vector eigenvalues(6);
  eigenvalues << 0.9, 0.9, 0.9, 0.9, 0.9, 0.5;
  TestStatistic stat = s_t_statistic(eigenvalues, 1, 101, 2);
  CHECK(stat.s_t == doctest::Approx(-100.0 * std::log(0.5)).epsilon(1e-12));
  CHECK(stat.s_t == doctest::Approx(69.3147).epsilon(1e-4));
  CHECK(stat.df == 7);  // 1 * ((2-1)*6 + 1)
}

TEST_CASE("s_t_statistic: monotone in v") {
  Rng rng(61);
  Vector eigenvalues(8);
  for (int i = 0; i < 8; ++i) eigenvalues(i) = rng.uniform01() * 0.9;
  std::sort(eigenvalues.data(), eigenvalues.data() + 8, std::greater<double>());
  double previous = 0.0;
  for (int v = 1; v <= 8; ++v) {
    TestStatistic stat = s_t_statistic(eigenvalues, v, 500, 2);
    CHECK(stat.s_t >= previous);
    previous = stat.s_t;
  }
}

TEST_CASE("c_t_statistic: standardization formula") {
  CHECK(c_t_statistic(32.0, 32) == 0.0);
  long df = 18;
  double s = static_cast<double>(df) + 2.0 * std::sqrt(2.0 * df);
  CHECK(c_t_statistic(s, df) == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("select_num_factors: all-zero spectrum keeps every null") {
  Vector eigenvalues = Vector::Zero(5);
  TestReport report = select_num_factors(eigenvalues, 400, 2, 5, 0.05);
  CHECK(report.selected_v == 5);
  CHECK(report.selected_r == 0);
  for (const TestRow& row : report.rows) CHECK_FALSE(row.rejected);
}

TEST_CASE("select_num_factors: sequential stop at the first rejection") {
  // Three tiny eigenvalues, then a jump: expect v = 3, r = p - 3.
  Vector eigenvalues(6);
  eigenvalues << 0.9, 0.85, 0.6, 1e-4, 8e-5, 5e-5;
  TestReport report = select_num_factors(eigenvalues, 2000, 2, 6, 0.05);
  CHECK(report.selected_v == 3);
  CHECK(report.selected_r == 3);
  CHECK(report.rows.size() == 6);
  CHECK_FALSE(report.rows[0].rejected);
  CHECK_FALSE(report.rows[2].rejected);
  CHECK(report.rows[3].rejected);
}

TEST_CASE("select_num_factors: immediate rejection means r = p") {
  Vector eigenvalues(4);
  eigenvalues << 0.9, 0.8, 0.7, 0.5;  // even the smallest is huge
  TestReport report = select_num_factors(eigenvalues, 1000, 2, 4, 0.05);
  CHECK(report.selected_v == 0);
  CHECK(report.selected_r == 4);
}

TEST_CASE("select_num_factors: regime resolution") {
  Vector eigenvalues = Vector::Zero(12);
  TestReport normal = select_num_factors(eigenvalues, 400, 2, 12, 0.05, TestRegime::Auto);
  CHECK(normal.regime_used == TestRegime::Normal);  // p = 12 > 10
  TestReport chi = select_num_factors(eigenvalues, 400, 2, 12, 0.05, TestRegime::ChiSquare);
  CHECK(chi.regime_used == TestRegime::ChiSquare);

  Vector small = Vector::Zero(6);
  TestReport auto_small = select_num_factors(small, 400, 2, 6, 0.05, TestRegime::Auto);
  CHECK(auto_small.regime_used == TestRegime::ChiSquare);
}

TEST_CASE("ratio_estimator: arithmetic example") {
  Vector eigenvalues(5);
  eigenvalues << 4.0, 2.0, 1.0, 0.01, 0.005;
  CHECK(ratio_estimator(eigenvalues) == 3);
}

TEST_CASE("ratio_estimator: equal spectrum picks j = 1") {
  Vector eigenvalues = Vector::Constant(4, 0.3);
  CHECK(ratio_estimator(eigenvalues) == 1);
}

TEST_CASE("ratio_estimator: zero denominators are skipped") {
  Vector eigenvalues(4);
  eigenvalues << 1.0, 0.25, 0.0, 0.0;
  CHECK(ratio_estimator(eigenvalues) == 2);
  CHECK_THROWS_AS(ratio_estimator(Vector::Zero(3)), Error);
}

TEST_CASE("chi-square calibration of S_T(p) under the null (reduced)") {
  // Reduced-size version; the full 500-replication run is in the acceptance
  // suite.
  const int reps = 100;
  double sum = 0.0;
  for (int rep = 0; rep < reps; ++rep) {
    Rng rng(derive_seed(73, static_cast<std::uint64_t>(rep)));
    Matrix irregular = random_matrix(rng, 4, 2000);
    MHat m_hat = build_m_hat(lagged_covariances(irregular, 2));
    Vector eigenvalues = sym_eig(m_hat.m_hat).eigenvalues.cwiseMax(0.0).cwiseMin(1.0);
    TestStatistic stat = s_t_statistic(eigenvalues, 4, 2000, 2);
    CHECK(stat.df == 32);
    sum += stat.s_t;
  }
  double mean = sum / reps;
  CHECK(mean == doctest::Approx(32.0).epsilon(0.10));  // 10% slack at 100 reps
}
