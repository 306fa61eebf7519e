#include "core/detrend.hpp"

#include <cmath>
#include <limits>

#include "core/error.hpp"

namespace structfact {

void OrderSpec::validate(int num_times) const {
  if (trend_degree < 0 || num_harmonics < 0) {
    raise(ErrorCode::InvalidOrder, "orders must be nonnegative");
  }
  if (num_harmonics >= 1) {
    if (period < 2) {
      raise(ErrorCode::InvalidOrder, "harmonic terms require periodicity >= 2");
    }
    if (num_harmonics > max_harmonics()) {
      raise(ErrorCode::InvalidOrder,
            "k = " + std::to_string(num_harmonics) + " exceeds ceil(s/2)-1 = " +
                std::to_string(max_harmonics()) + " for s = " + std::to_string(period));
    }
  }
  if (num_columns() > num_times) {
    raise(ErrorCode::InvalidOrder,
          "design has " + std::to_string(num_columns()) + " columns but only " +
              std::to_string(num_times) + " time points");
  }
}

Vector design_row(int t, const OrderSpec& order) {
  Vector row(order.num_columns());
  double power = 1.0;
  for (int j = 0; j <= order.trend_degree; ++j) {
    row(j) = power;
    power *= static_cast<double>(t);
  }
  const int k = order.num_harmonics;
  for (int j = 1; j <= k; ++j) {
    double rho = 2.0 * M_PI * static_cast<double>(j) / static_cast<double>(order.period);
    row(order.trend_degree + j) = std::cos(rho * t);
    row(order.trend_degree + k + j) = std::sin(rho * t);
  }
  return row;
}

Matrix build_design(int num_times, const OrderSpec& order) {
  // The T >= d+1+2k requirement belongs to fitting; the design itself may be
  // wider than it is tall (exact-interpolation corner cases).
  order.validate(std::max(num_times, order.num_columns()));
  Matrix design(num_times, order.num_columns());
  for (int t = 1; t <= num_times; ++t) {
    design.row(t - 1) = design_row(t, order).transpose();
  }
  return design;
}

Decomposition fit(const TimePanel& panel, const OrderSpec& order) {
  panel.validate();
  const int t_count = panel.num_times();
  order.validate(t_count);
  Matrix design = build_design(t_count, order);

  // One QR factorization shared across all p right-hand sides.
  LeastSquaresMulti ls = qr_least_squares_multi(design, panel.values.transpose());

  Decomposition out;
  out.order = order;
  out.theta = ls.coef.transpose();  // p x q
  const int d_cols = order.trend_degree + 1;
  const int s_cols = 2 * order.num_harmonics;
  out.trend = out.theta.leftCols(d_cols) * design.leftCols(d_cols).transpose();
  if (s_cols > 0) {
    out.seasonal = out.theta.rightCols(s_cols) * design.rightCols(s_cols).transpose();
  } else {
    out.seasonal = Matrix::Zero(panel.num_series(), t_count);
  }
  out.irregular = ls.residuals.transpose();
  return out;
}

double bic_value(double rss, int num_times, int k, int d, int p, double c_t) {
  if (rss <= 0.0) {
    raise(ErrorCode::DomainFailure, "bic_value: rss must be positive (exact fit?)");
  }
  if (num_times < 2) {
    raise(ErrorCode::InvalidArgument, "bic_value: need T >= 2");
  }
  double t = static_cast<double>(num_times);
  double dim = static_cast<double>(std::max(p, num_times));
  return std::log(rss / t) + (static_cast<double>(d + k) / t) * c_t * std::log(dim);
}

double default_penalty_ct(int num_times) { return std::log(std::log(static_cast<double>(num_times))); }

BicTable select_orders(const TimePanel& panel, int k_max, int d_max, double c_t) {
  std::vector<int> k_grid, d_grid;
  for (int k = 0; k <= k_max; ++k) k_grid.push_back(k);
  for (int d = 0; d <= d_max; ++d) d_grid.push_back(d);
  return select_orders_grid(panel, k_grid, d_grid, c_t);
}

BicTable select_orders_grid(const TimePanel& panel, const std::vector<int>& k_grid,
                            const std::vector<int>& d_grid, double c_t) {
  panel.validate();
  if (k_grid.empty() || d_grid.empty()) {
    raise(ErrorCode::InvalidOrder, "select_orders: empty grid");
  }
  const int p = panel.num_series();
  const int t_count = panel.num_times();

  BicTable table;
  table.k_grid = k_grid;
  table.d_grid = d_grid;
  table.num_series_ = static_cast<size_t>(p);
  table.values.assign(k_grid.size() * d_grid.size() * static_cast<size_t>(p),
                      std::numeric_limits<double>::quiet_NaN());

  constexpr double kNegInf = -std::numeric_limits<double>::infinity();
  Matrix responses = panel.values.transpose();

  for (size_t di = 0; di < d_grid.size(); ++di) {
    for (size_t ki = 0; ki < k_grid.size(); ++ki) {
      OrderSpec order{d_grid[di], k_grid[ki], panel.periodicity_s};
      order.validate(t_count);
      LeastSquaresMulti ls = qr_least_squares_multi(build_design(t_count, order), responses);
      for (int i = 0; i < p; ++i) {
        double rss = ls.rss(i);
        double value;
        if (rss <= 0.0) {
          // Exact fit: BIC is -infinity conceptually; wins immediately.
          value = kNegInf;
          table.exact_fit = true;
        } else {
          value = bic_value(rss, t_count, k_grid[ki], d_grid[di], p, c_t);
        }
        table.values[(di * k_grid.size() + ki) * static_cast<size_t>(p) + static_cast<size_t>(i)] =
            value;
      }
    }
  }

  table.selected_per_series.resize(static_cast<size_t>(p));
  for (int i = 0; i < p; ++i) {
    double best = std::numeric_limits<double>::infinity();
    int best_k = k_grid.front();
    int best_d = d_grid.front();
    for (size_t ki = 0; ki < k_grid.size(); ++ki) {
      for (size_t di = 0; di < d_grid.size(); ++di) {
        double value = table.bic(static_cast<int>(di), static_cast<int>(ki), i);
        bool better = value < best ||
                      (value == best && (k_grid[ki] < best_k ||
                                         (k_grid[ki] == best_k && d_grid[di] < best_d)));
        if (better) {
          best = value;
          best_k = k_grid[ki];
          best_d = d_grid[di];
        }
      }
    }
    table.selected_per_series[static_cast<size_t>(i)] = {best_k, best_d};
    table.selected_k = std::max(table.selected_k, best_k);
    table.selected_d = std::max(table.selected_d, best_d);
  }
  return table;
}

}  // namespace structfact
