#pragma once

#include <utility>
#include <vector>

#include "core/panel.hpp"

namespace structfact {

// Orders of the deterministic part: polynomial trend degree d and number of
// harmonic (cos/sin) pairs k at Fourier frequencies 2*pi*j/s.
struct OrderSpec {
  int trend_degree = 0;   // d >= 0
  int num_harmonics = 0;  // k >= 0
  int period = 2;         // s >= 2 whenever k >= 1

  int num_columns() const { return trend_degree + 1 + 2 * num_harmonics; }
  int max_harmonics() const { return (period + 1) / 2 - 1; }  // ceil(s/2) - 1

  // k <= ceil(s/2)-1 and d+1+2k <= T must hold before fitting.
  void validate(int num_times) const;
};

// T x (d+1+2k) regressor matrix; row t (t = 1..T) is
// (1, t, ..., t^d, cos(rho_1 t), ..., cos(rho_k t), sin(rho_1 t), ..., sin(rho_k t)).
Matrix build_design(int num_times, const OrderSpec& order);

// Evaluates the trend and seasonal parts of fitted coefficients at an
// arbitrary (possibly out-of-sample) time index t >= 1.
Vector design_row(int t, const OrderSpec& order);

struct Decomposition {
  Matrix theta;      // p x (d+1+2k); row i = (alpha_i0..alpha_id, beta_i1..ik, gamma_i1..ik)
  Matrix trend;      // p x T
  Matrix seasonal;   // p x T
  Matrix irregular;  // p x T (least-squares residuals)
  OrderSpec order;
};

// Equation-by-equation least squares of every series on the shared design.
Decomposition fit(const TimePanel& panel, const OrderSpec& order);

// Marginal BIC: log(rss/T) + ((d+k)/T) * c_T * log(max(p,T)).
double bic_value(double rss, int num_times, int k, int d, int p, double c_t);

// Default penalty constant C_T = log(log T).
double default_penalty_ct(int num_times);

struct BicTable {
  std::vector<int> k_grid;
  std::vector<int> d_grid;
  std::vector<double> values;  // indexed [d][k][series], see bic()
  std::vector<std::pair<int, int>> selected_per_series;  // (k_i, d_i)
  int selected_k = 0;  // max_i k_i
  int selected_d = 0;  // max_i d_i
  bool exact_fit = false;  // some cell had rss == 0 (selected immediately)

  double bic(int d_index, int k_index, int series) const {
    return values[(static_cast<size_t>(d_index) * k_grid.size() + static_cast<size_t>(k_index)) *
                      num_series_ +
                  static_cast<size_t>(series)];
  }

  size_t num_series_ = 0;
};

// Full-grid selection over k in {0..k_max}, d in {0..d_max}; ties broken
// toward smaller k, then smaller d. Panel-level orders are the
// component-wise maxima of the per-series argmins.
BicTable select_orders(const TimePanel& panel, int k_max, int d_max, double c_t);

// Grid with explicit axes; used with a single fixed d when the trend degree
// is treated as known.
BicTable select_orders_grid(const TimePanel& panel, const std::vector<int>& k_grid,
                            const std::vector<int>& d_grid, double c_t);

}  // namespace structfact
