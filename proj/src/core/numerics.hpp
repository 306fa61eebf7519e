#pragma once

#include <Eigen/Dense>

namespace structfact {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Symmetric eigendecomposition with eigenvalues sorted descending and a
// deterministic sign convention: in every eigenvector the entry of largest
// absolute value is nonnegative (ties broken by lowest index).
struct SymEig {
  Vector eigenvalues;   // descending
  Matrix eigenvectors;  // column j pairs with eigenvalues[j]
};

SymEig sym_eig(const Matrix& a);

// X = V diag(max(lambda_j, floor_rel*lambda_max))^{-1/2} V^T for symmetric
// PSD input. The relative eigenvalue floor guards near-singular covariance
// matrices at small sample sizes.
Matrix inv_sqrt_spd(const Matrix& a, double floor_rel = 1e-10);

// Matching square root and inverse, built from the same floored
// eigendecomposition so that sqrt_spd(A) * inv_sqrt_spd(A) == I.
Matrix sqrt_spd(const Matrix& a, double floor_rel = 1e-10);
Matrix inv_spd(const Matrix& a, double floor_rel = 1e-10);

struct LeastSquares {
  Vector coef;
  Vector residuals;
  double rss = 0.0;
};

struct LeastSquaresMulti {
  Matrix coef;       // q x n_rhs
  Matrix residuals;  // T x n_rhs
  Vector rss;        // n_rhs
};

// Least squares via column-pivoted Householder QR; never forms the normal
// equations (the raw polynomial basis 1, t, ..., t^d is ill-conditioned for
// large T). Rank detected from the triangular factor diagonal at relative
// tolerance 1e-10.
LeastSquares qr_least_squares(const Matrix& x, const Vector& y);
LeastSquaresMulti qr_least_squares_multi(const Matrix& x, const Matrix& ys);

// Upper-tail probabilities for the factor-count tests.
double chi_squared_upper_tail(double x, double df);
double normal_upper_tail(double z);

// Largest eigenvalue modulus of a general square matrix (companion matrices).
double spectral_radius(const Matrix& a);

}  // namespace structfact
