#pragma once

#include <Eigen/Dense>
#include <complex>
#include <vector>

#include "slsid/errors.hpp"

namespace slsid::numkern {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;
using Complex = std::complex<double>;

constexpr double kDefaultRankTol = 1e-8;

/// Thin SVD with a numerical-rank decision at a relative threshold.
///
/// Factors satisfy ||A - U S V^T||_F <= 1e-10 ||A||_F and U^T U = V^T V = I.
/// Singular values are nonincreasing; numerical_rank counts values
/// > tol * sigma_max. Sign convention: the first entry of each left singular
/// vector with magnitude above 1e-12 * column scale is nonnegative, so
/// repeated factorizations of identical inputs are bit-identical.
struct SvdResult {
    Matrix left_vectors;       // m x r
    Vector singular_values;    // r, nonincreasing
    Matrix right_vectors;      // n x r
    int numerical_rank = 0;
};

SvdResult svd_with_rank(const Matrix& a, double tol = kDefaultRankTol);

/// LQ factorization A = L Q with L lower triangular (trapezoidal for tall A)
/// and Q having orthonormal rows. Diagonal of L is kept nonnegative.
struct LqResult {
    Matrix l_factor;
    Matrix q_factor;
};

LqResult lq(const Matrix& a);

/// Moore-Penrose pseudo-inverse of a full-column-rank matrix, (A^T A)^{-1} A^T.
/// Throws RankError with the measured rank when column rank is deficient.
Matrix pinv(const Matrix& a, double tol = kDefaultRankTol);

/// Eigenvalues of a square real matrix, sorted by (real, imag) for
/// reproducibility.
std::vector<Complex> eigenvalues(const Matrix& a);

/// Sum of eigenvalue magnitudes.
double eigenvalue_l1(const Matrix& a);

/// Spectral radius.
double spectral_radius(const Matrix& a);

/// Observability matrix [c^T; c^T A; ...; c^T A^{rows-1}] (defaults to n rows).
Matrix observability_matrix(const Matrix& a, const Vector& c, int rows = -1);

/// Controllability matrix [b, A b, ..., A^{cols-1} b] (defaults to n columns).
Matrix controllability_matrix(const Matrix& a, const Vector& b, int cols = -1);

/// Deadbeat output-injection gain g such that A + g c^T is nilpotent.
///
/// Dual Ackermann construction: a state-feedback gain placing all poles of
/// (A^T, c) at the origin is computed and transposed back. Exact for SISO
/// observable pairs. Throws ObservabilityError when (A, c^T) is unobservable.
Vector place_deadbeat(const Matrix& a, const Vector& c, double tol = kDefaultRankTol);

/// Resultant of two real polynomials (coefficient order: highest degree first),
/// via the Sylvester matrix determinant.
double resultant(const Vector& p, const Vector& q);

/// Roots of a real polynomial (highest degree first) via the companion matrix.
std::vector<Complex> poly_roots(const Vector& p);

}  // namespace slsid::numkern
