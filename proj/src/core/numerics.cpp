#include "core/numerics.hpp"

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/normal.hpp>
#include <cmath>

#include "core/error.hpp"

namespace structfact {

namespace {

void require_finite(const Matrix& a, const char* who) {
  if (!a.allFinite()) {
    raise(ErrorCode::NonFiniteInput, std::string(who) + ": input contains NaN or infinity");
  }
}

void apply_sign_convention(Matrix& vectors) {
  for (Eigen::Index j = 0; j < vectors.cols(); ++j) {
    Eigen::Index argmax = 0;
    double best = -1.0;
    for (Eigen::Index i = 0; i < vectors.rows(); ++i) {
      double mag = std::abs(vectors(i, j));
      if (mag > best) {
        best = mag;
        argmax = i;
      }
    }
    if (vectors(argmax, j) < 0.0) {
      vectors.col(j) = -vectors.col(j);
    }
  }
}

// Shared eigenvalue-flooring transform: f maps floored eigenvalues to the
// spectrum of the output matrix.
template <typename F>
Matrix floored_spectral_transform(const Matrix& a, double floor_rel, F f, const char* who) {
  SymEig eig = sym_eig(a);
  double lambda_max = eig.eigenvalues(0);
  if (!(lambda_max > 0.0)) {
    raise(ErrorCode::AllEigenvaluesFloored,
          std::string(who) + ": largest eigenvalue is not positive (numerically zero matrix)");
  }
  double floor_abs = floor_rel * lambda_max;
  Vector transformed(eig.eigenvalues.size());
  for (Eigen::Index j = 0; j < eig.eigenvalues.size(); ++j) {
    transformed(j) = f(std::max(eig.eigenvalues(j), floor_abs));
  }
  Matrix out = eig.eigenvectors * transformed.asDiagonal() * eig.eigenvectors.transpose();
  return 0.5 * (out + out.transpose());
}

}  // namespace

SymEig sym_eig(const Matrix& a) {
  if (a.rows() != a.cols()) {
    raise(ErrorCode::InvalidArgument, "sym_eig: matrix must be square");
  }
  require_finite(a, "sym_eig");
  Matrix sym = 0.5 * (a + a.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> solver(sym);
  if (solver.info() != Eigen::Success) {
    raise(ErrorCode::ConvergenceFailure, "sym_eig: eigensolver did not converge");
  }
  SymEig out;
  out.eigenvalues = solver.eigenvalues().reverse();
  out.eigenvectors = solver.eigenvectors().rowwise().reverse();
  apply_sign_convention(out.eigenvectors);
  return out;
}

Matrix inv_sqrt_spd(const Matrix& a, double floor_rel) {
  return floored_spectral_transform(
      a, floor_rel, [](double lambda) { return 1.0 / std::sqrt(lambda); }, "inv_sqrt_spd");
}

Matrix sqrt_spd(const Matrix& a, double floor_rel) {
  return floored_spectral_transform(
      a, floor_rel, [](double lambda) { return std::sqrt(lambda); }, "sqrt_spd");
}

Matrix inv_spd(const Matrix& a, double floor_rel) {
  return floored_spectral_transform(
      a, floor_rel, [](double lambda) { return 1.0 / lambda; }, "inv_spd");
}

namespace {

Eigen::ColPivHouseholderQR<Matrix> rank_checked_qr(const Matrix& x) {
  if (x.rows() < x.cols()) {
    raise(ErrorCode::InvalidArgument, "qr_least_squares: fewer rows than columns");
  }
  require_finite(x, "qr_least_squares");
  Eigen::ColPivHouseholderQR<Matrix> qr(x);
  qr.setThreshold(1e-10);
  Eigen::Index rank = qr.rank();
  if (rank < x.cols()) {
    raise(ErrorCode::RankDeficient,
          "qr_least_squares: design rank " + std::to_string(rank) + " < " +
              std::to_string(x.cols()) + " columns",
          rank);
  }
  return qr;
}

}  // namespace

LeastSquares qr_least_squares(const Matrix& x, const Vector& y) {
  if (y.size() != x.rows()) {
    raise(ErrorCode::InvalidArgument, "qr_least_squares: size mismatch between design and response");
  }
  require_finite(y, "qr_least_squares");
  auto qr = rank_checked_qr(x);
  LeastSquares out;
  out.coef = qr.solve(y);
  out.residuals = y - x * out.coef;
  out.rss = out.residuals.squaredNorm();
  return out;
}

LeastSquaresMulti qr_least_squares_multi(const Matrix& x, const Matrix& ys) {
  if (ys.rows() != x.rows()) {
    raise(ErrorCode::InvalidArgument, "qr_least_squares: size mismatch between design and responses");
  }
  require_finite(ys, "qr_least_squares");
  auto qr = rank_checked_qr(x);
  LeastSquaresMulti out;
  out.coef = qr.solve(ys);
  out.residuals = ys - x * out.coef;
  out.rss = out.residuals.colwise().squaredNorm();
  return out;
}

double chi_squared_upper_tail(double x, double df) {
  if (df <= 0.0) {
    raise(ErrorCode::InvalidArgument, "chi_squared_upper_tail: df must be positive");
  }
  if (x <= 0.0) return 1.0;
  boost::math::chi_squared dist(df);
  return boost::math::cdf(boost::math::complement(dist, x));
}

double normal_upper_tail(double z) {
  static const boost::math::normal dist(0.0, 1.0);
  return boost::math::cdf(boost::math::complement(dist, z));
}

double spectral_radius(const Matrix& a) {
  if (a.rows() != a.cols()) {
    raise(ErrorCode::InvalidArgument, "spectral_radius: matrix must be square");
  }
  if (a.rows() == 0) return 0.0;
  require_finite(a, "spectral_radius");
  Eigen::EigenSolver<Matrix> solver(a, /*computeEigenvectors=*/false);
  if (solver.info() != Eigen::Success) {
    raise(ErrorCode::ConvergenceFailure, "spectral_radius: eigensolver did not converge");
  }
  return solver.eigenvalues().cwiseAbs().maxCoeff();
}

}  // namespace structfact
