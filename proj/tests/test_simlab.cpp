#include <doctest.h>

#include <cmath>

#include "core/error.hpp"
#include "core/rng.hpp"
#include "core/simlab.hpp"

using namespace structfact;

TEST_CASE("generate: same seed is bit-identical") {
  DgpConfig config;
  config.p = 6;
  config.num_times = 300;
  config.seed = 314159;
  DgpInstance first = generate(config);
  DgpInstance second = generate(config);
  CHECK((first.panel.values - second.panel.values).cwiseAbs().maxCoeff() == 0.0);
  CHECK((first.theta_true - second.theta_true).cwiseAbs().maxCoeff() == 0.0);
  CHECK((first.l_tilde_true - second.l_tilde_true).cwiseAbs().maxCoeff() == 0.0);

  config.seed = 314160;
  DgpInstance third = generate(config);
  CHECK((first.panel.values - third.panel.values).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("generate: r=0 branch produces serially uncorrelated irregulars") {
  DgpConfig config;
  config.p = 6;
  config.r = 0;
  config.num_times = 2000;
  config.seed = 77;
  DgpInstance instance = generate(config);
  CHECK(instance.factors_true.rows() == 0);

  const Matrix& eta = instance.irregular_true;
  Matrix centered = eta.colwise() - eta.rowwise().mean();
  Matrix lag0 = centered * centered.transpose() / 2000.0;
  Matrix lag1 = centered.rightCols(1999) * centered.leftCols(1999).transpose() / 2000.0;
  CHECK(lag1.cwiseAbs().maxCoeff() <= 0.2 * lag0.cwiseAbs().maxCoeff());
}

TEST_CASE("generate: shapes, target loading dimensions and factor persistence") {
  DgpConfig config;
  config.p = 10;
  config.num_times = 500;
  config.seed = 4242;
  DgpInstance instance = generate(config);
  CHECK(instance.panel.num_series() == 10);
  CHECK(instance.panel.num_times() == 500);
  CHECK(instance.theta_true.cols() == 12);  // d0=1, k0=5
  CHECK(instance.l1_true_whitened.rows() == 10);
  CHECK(instance.l1_true_whitened.cols() == 3);
  for (int i = 0; i < 3; ++i) {
    CHECK(instance.phi_true(i) >= 0.2);
    CHECK(instance.phi_true(i) <= 0.9);
  }
}

TEST_CASE("discrepancy_d: identical, orthogonal and angled spaces") {
  Matrix h1 = Matrix::Zero(3, 1);
  h1(0, 0) = 1.0;
  CHECK(discrepancy_d(h1, h1) == 0.0);

  Matrix h2 = Matrix::Zero(3, 1);
  h2(1, 0) = 1.0;
  CHECK(discrepancy_d(h1, h2) == 1.0);

  double theta = M_PI / 4.0;
  Matrix h3 = Matrix::Zero(3, 1);
  h3(0, 0) = std::cos(theta);
  h3(1, 0) = std::sin(theta);
  CHECK(discrepancy_d(h1, h3) == doctest::Approx(0.70711).epsilon(1e-5));
  CHECK(discrepancy_d(h1, h3) == doctest::Approx(std::sqrt(1.0 - std::cos(theta) * std::cos(theta)))
                                     .epsilon(1e-12));
}

TEST_CASE("discrepancy_d: rejects non-orthonormal input") {
  Matrix h = Matrix::Constant(3, 1, 2.0);
  CHECK_THROWS_AS(discrepancy_d(h, h), Error);
}

TEST_CASE("discrepancy_d_tilde: nested column inside a larger space") {
  Matrix h1 = Matrix::Zero(4, 1);
  h1(0, 0) = 1.0;
  Matrix h2 = Matrix::Zero(4, 2);
  h2(0, 0) = 1.0;
  h2(1, 1) = 1.0;
  CHECK(discrepancy_d_tilde(h1, h2) <= 1e-12);
  CHECK(discrepancy_d_tilde(h2, h2) == 0.0);
}

TEST_CASE("discrepancy_d_tilde: projector-trace oracle on random spaces") {
  Rng rng(606);
  for (int trial = 0; trial < 10; ++trial) {
    int p = 6;
    int r1 = 1 + static_cast<int>(rng.uniform01() * 3);
    int r2 = 1 + static_cast<int>(rng.uniform01() * 3);
    Matrix a(p, r1), b(p, r2);
    for (int i = 0; i < p; ++i) {
      for (int j = 0; j < r1; ++j) a(i, j) = rng.normal();
      for (int j = 0; j < r2; ++j) b(i, j) = rng.normal();
    }
    Matrix q1 = Eigen::HouseholderQR<Matrix>(a).householderQ() * Matrix::Identity(p, r1);
    Matrix q2 = Eigen::HouseholderQR<Matrix>(b).householderQ() * Matrix::Identity(p, r2);

    // Oracle: explicit projectors.
    Matrix p1 = q1 * q1.transpose();
    Matrix p2 = q2 * q2.transpose();
    double expected = std::sqrt(
        std::max(0.0, 1.0 - (p1 * p2).trace() / static_cast<double>(std::min(r1, r2))));
    CHECK(discrepancy_d_tilde(q1, q2) == doctest::Approx(expected).epsilon(1e-10));
  }
}

TEST_CASE("discrepancy_d_bar: nested, orthogonal and basis-invariant") {
  Matrix h1 = Matrix::Zero(4, 1);
  h1(0, 0) = 3.0;  // full rank but not normalized
  Matrix h2 = Matrix::Zero(4, 2);
  h2(0, 0) = 1.0;
  h2(1, 1) = 2.0;
  CHECK(discrepancy_d_bar(h1, h2) <= 1e-12);  // nested spaces

  Matrix h3 = Matrix::Zero(4, 1);
  h3(2, 0) = -1.5;
  CHECK(discrepancy_d_bar(h1, h3) == 1.0);  // orthogonal

  // Right-multiplying by an invertible matrix leaves the value unchanged.
  Rng rng(909);
  Matrix basis(4, 2);
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 2; ++j) basis(i, j) = rng.normal();
  }
  Matrix mix(2, 2);
  mix << 2.0, 1.0, -1.0, 0.5;
  CHECK(discrepancy_d_bar(basis, h2) ==
        doctest::Approx(discrepancy_d_bar(basis * mix, h2)).epsilon(1e-10));
}

TEST_CASE("discrepancy_d_bar: agrees with discrepancy_d on orthonormal equal dims") {
  Rng rng(910);
  for (int trial = 0; trial < 10; ++trial) {
    Matrix a(5, 2), b(5, 2);
    for (int i = 0; i < 5; ++i) {
      for (int j = 0; j < 2; ++j) {
        a(i, j) = rng.normal();
        b(i, j) = rng.normal();
      }
    }
    Matrix q1 = Eigen::HouseholderQR<Matrix>(a).householderQ() * Matrix::Identity(5, 2);
    Matrix q2 = Eigen::HouseholderQR<Matrix>(b).householderQ() * Matrix::Identity(5, 2);
    CHECK(std::abs(discrepancy_d_bar(q1, q2) - discrepancy_d(q1, q2)) <= 1e-10);
  }
}

TEST_CASE("discrepancy_d_bar: rank-deficient input is rejected") {
  Matrix h(4, 2);
  h.col(0) = Vector::Ones(4);
  h.col(1) = 2.0 * Vector::Ones(4);
  Matrix other = Matrix::Identity(4, 2);
  CHECK_THROWS_AS(discrepancy_d_bar(h, other), Error);
}

TEST_CASE("all discrepancies stay within [0,1] on random input") {
  Rng rng(911);
  for (int trial = 0; trial < 20; ++trial) {
    Matrix a(6, 2), b(6, 3);
    for (int i = 0; i < 6; ++i) {
      for (int j = 0; j < 2; ++j) a(i, j) = rng.normal();
      for (int j = 0; j < 3; ++j) b(i, j) = rng.normal();
    }
    double value = discrepancy_d_bar(a, b);
    CHECK(value >= 0.0);
    CHECK(value <= 1.0);
  }
}

TEST_CASE("run_table: replication seeding is worker-count invariant") {
  CellConfig cell;
  cell.dgp.p = 6;
  cell.dgp.num_times = 200;
  cell.dgp.k0 = 2;
  RunResult one = run_table(Experiment::Table1, {cell}, 24, 99, /*workers=*/1);
  RunResult four = run_table(Experiment::Table1, {cell}, 24, 99, /*workers=*/4);
  CHECK(one.cells[0].stats.at("prob_correct_k") == four.cells[0].stats.at("prob_correct_k"));
  REQUIRE(one.cells[0].samples.size() == four.cells[0].samples.size());
  for (size_t i = 0; i < one.cells[0].samples.size(); ++i) {
    CHECK(one.cells[0].samples[i] == four.cells[0].samples[i]);
  }
}

TEST_CASE("run_table: single replication degenerates to an indicator") {
  CellConfig cell;
  cell.dgp.p = 5;
  cell.dgp.num_times = 150;
  cell.dgp.k0 = 1;
  RunResult result = run_table(Experiment::Table1, {cell}, 1, 3, 1);
  double prob = result.cells[0].stats.at("prob_correct_k");
  CHECK((prob == 0.0 || prob == 1.0));
  CHECK(result.cells[0].stats.at("mc_standard_error") == 0.0);
}

TEST_CASE("run_table: table1 quick cell tracks the expected selection rate") {
  CellConfig cell;
  cell.dgp.p = 10;
  cell.dgp.num_times = 500;
  cell.dgp.k0 = 5;
  cell.k_max = 14;
  RunResult result = run_table(Experiment::Table1, {cell}, 60, 2718, 0);
  // Population value is about 0.986.
  CHECK(result.cells[0].stats.at("prob_correct_k") >= 0.9);
  CHECK(result.cells[0].failures == 0);
}

TEST_CASE("run_table: selection consistency improves with T") {
  auto rate_at = [](int t_count) {
    CellConfig cell;
    cell.dgp.p = 10;
    cell.dgp.num_times = t_count;
    cell.dgp.k0 = 5;
    cell.k_max = 14;
    RunResult result = run_table(Experiment::Table1, {cell}, 100, 1111, 0);
    return result.cells[0].stats.at("prob_correct_k");
  };
  double at_200 = rate_at(200);
  double at_1000 = rate_at(1000);
  // Population values 0.912 -> 0.998; allow Monte Carlo slack.
  CHECK(at_1000 >= at_200 - 0.03);
  CHECK(at_1000 >= 0.95);
}

TEST_CASE("run_table: null calibration statistics are sane at modest size") {
  CellConfig cell;
  cell.dgp.p = 4;
  cell.dgp.num_times = 1000;
  cell.dgp.k0 = 2;
  RunResult result = run_table(Experiment::NullCalibration, {cell}, 100, 515, 0);
  const auto& stats = result.cells[0].stats;
  // df = m p^2 = 32 under the null.
  CHECK(stats.at("mean_s_t") == doctest::Approx(32.0).epsilon(0.15));
  CHECK(stats.at("rejection_rate") <= 0.15);
}
