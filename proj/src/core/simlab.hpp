#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "core/cca.hpp"
#include "core/detrend.hpp"
#include "core/panel.hpp"

namespace structfact {

// Data generating process: y_t = Theta d_t + eta_t with eta_t = Ltilde (f_t', eps_t')',
// f_t a diagonal VAR(1) with coefficients U(phi_range), innovations standard
// normal, Theta and Ltilde entries U(coef_range). All draws are redrawn per
// replication and are fully determined by the seed.
struct DgpConfig {
  int p = 10;
  int num_times = 500;  // T
  int r = 3;
  int k0 = 5;
  int d0 = 1;
  int period = 30;  // s
  double phi_lo = 0.2, phi_hi = 0.9;
  double coef_lo = -2.0, coef_hi = 2.0;
  std::uint64_t seed = 0;

  void validate() const;
};

struct DgpInstance {
  TimePanel panel;
  Matrix theta_true;        // p x (d0+1+2k0)
  Matrix l_tilde_true;      // p x p
  Matrix l1_true_whitened;  // p x r: sample-whitened Ltilde_1, the scoring target
  Vector phi_true;          // diagonal of Phi
  Matrix factors_true;      // r x T
  Matrix irregular_true;    // p x T
};

DgpInstance generate(const DgpConfig& config);

// Subspace discrepancies, all in [0, 1]; 0 = aligned (or nested for the bar
// variant), 1 = orthogonal column spaces.
double discrepancy_d(const Matrix& h1, const Matrix& h2);        // equal dims, orthonormal
double discrepancy_d_tilde(const Matrix& h1, const Matrix& h2);  // min-dim normalizer
double discrepancy_d_bar(const Matrix& h1, const Matrix& h2);    // full-rank inputs, projectors

enum class Experiment { Table1, Table2, ThetaError, LoadingDiscrepancy, NullCalibration };

Experiment experiment_from_name(const std::string& name);
std::string experiment_name(Experiment experiment);

struct CellConfig {
  DgpConfig dgp;
  int k_max = -1;            // harmonic-count search bound; < 0 -> ceil(s/2)-1
  bool known_orders = true;  // false: re-select k by BIC (d fixed at d0) first
  int m = 2;
  double alpha = 0.05;
  TestRegime regime = TestRegime::Auto;
};

struct CellResult {
  CellConfig cell;
  int replications = 0;
  int failures = 0;
  std::map<std::string, double> stats;
  std::vector<double> samples;  // per-replication raw values (boxplot export)
};

struct RunResult {
  Experiment experiment = Experiment::Table1;
  std::uint64_t seed = 0;
  int replications = 0;
  std::vector<CellResult> cells;
};

// Runs `replications` seeded replications per cell; per-replication seeds
// derive from (seed, cell index, replication index), so results do not
// depend on the worker count. A cell fails if more than 1% of its
// replications error.
RunResult run_table(Experiment experiment, const std::vector<CellConfig>& cells, int replications,
                    std::uint64_t seed, int workers = 0);

}  // namespace structfact
