#include "slsid/numkern.hpp"

#include <algorithm>
#include <cmath>

namespace slsid::numkern {

namespace {

void require_finite(const Matrix& a, const char* who) {
    if (!a.allFinite()) throw InvalidInputError(std::string(who) + ": non-finite input");
    if (a.rows() < 1 || a.cols() < 1)
        throw InvalidInputError(std::string(who) + ": empty matrix");
}

}  // namespace

SvdResult svd_with_rank(const Matrix& a, double tol) {
    require_finite(a, "svd_with_rank");
    Eigen::JacobiSVD<Matrix> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
    SvdResult out;
    out.left_vectors = svd.matrixU();
    out.singular_values = svd.singularValues();
    out.right_vectors = svd.matrixV();

    // fix signs: first non-negligible entry of each left vector nonnegative
    for (int j = 0; j < out.left_vectors.cols(); ++j) {
        double flip = 0.0;
        for (int i = 0; i < out.left_vectors.rows(); ++i) {
            double v = out.left_vectors(i, j);
            if (std::abs(v) > 1e-12) { flip = v < 0 ? -1.0 : 1.0; break; }
        }
        if (flip < 0) {
            out.left_vectors.col(j) *= -1.0;
            out.right_vectors.col(j) *= -1.0;
        }
    }

    const double smax = out.singular_values.size() ? out.singular_values(0) : 0.0;
    out.numerical_rank = 0;
    for (int i = 0; i < out.singular_values.size(); ++i)
        if (out.singular_values(i) > tol * smax) ++out.numerical_rank;
    return out;
}

LqResult lq(const Matrix& a) {
    require_finite(a, "lq");
    const int m = static_cast<int>(a.rows());
    const int n = static_cast<int>(a.cols());
    const int r = std::min(m, n);
    Eigen::HouseholderQR<Matrix> qr(a.transpose());
    Matrix qfull = qr.householderQ() * Matrix::Identity(n, r);
    Matrix rfull = qr.matrixQR().topRows(r).triangularView<Eigen::Upper>();
    LqResult out;
    out.l_factor = rfull.transpose();  // m x r lower trapezoidal
    out.q_factor = qfull.transpose();  // r x n, orthonormal rows
    for (int i = 0; i < r; ++i) {
        if (out.l_factor(i, i) < 0) {
            out.l_factor.col(i) *= -1.0;
            out.q_factor.row(i) *= -1.0;
        }
    }
    return out;
}

Matrix pinv(const Matrix& a, double tol) {
    require_finite(a, "pinv");
    SvdResult s = svd_with_rank(a, tol);
    if (s.numerical_rank < a.cols())
        throw RankError("pinv: input is column-rank deficient", s.numerical_rank);
    Vector inv = s.singular_values.head(s.numerical_rank).cwiseInverse();
    return s.right_vectors.leftCols(s.numerical_rank) * inv.asDiagonal() *
           s.left_vectors.leftCols(s.numerical_rank).transpose();
}

std::vector<Complex> eigenvalues(const Matrix& a) {
    require_finite(a, "eigenvalues");
    if (a.rows() != a.cols()) throw InvalidInputError("eigenvalues: matrix not square");
    Eigen::EigenSolver<Matrix> es(a, /*computeEigenvectors=*/false);
    std::vector<Complex> out(a.rows());
    for (int i = 0; i < a.rows(); ++i) out[i] = es.eigenvalues()(i);
    std::sort(out.begin(), out.end(), [](const Complex& x, const Complex& y) {
        if (x.real() != y.real()) return x.real() < y.real();
        return x.imag() < y.imag();
    });
    return out;
}

double eigenvalue_l1(const Matrix& a) {
    double s = 0.0;
    for (const auto& l : eigenvalues(a)) s += std::abs(l);
    return s;
}

double spectral_radius(const Matrix& a) {
    double r = 0.0;
    for (const auto& l : eigenvalues(a)) r = std::max(r, std::abs(l));
    return r;
}

Matrix observability_matrix(const Matrix& a, const Vector& c, int rows) {
    const int n = static_cast<int>(a.rows());
    if (rows < 0) rows = n;
    Matrix obs(rows, n);
    RowVector row = c.transpose();
    for (int i = 0; i < rows; ++i) {
        obs.row(i) = row;
        row = row * a;
    }
    return obs;
}

Matrix controllability_matrix(const Matrix& a, const Vector& b, int cols) {
    const int n = static_cast<int>(a.rows());
    if (cols < 0) cols = n;
    Matrix ctrb(n, cols);
    Vector col = b;
    for (int j = 0; j < cols; ++j) {
        ctrb.col(j) = col;
        col = a * col;
    }
    return ctrb;
}

Vector place_deadbeat(const Matrix& a, const Vector& c, double tol) {
    require_finite(a, "place_deadbeat");
    if (a.rows() != a.cols() || a.rows() != c.size())
        throw InvalidInputError("place_deadbeat: dimension mismatch");
    const int n = static_cast<int>(a.rows());

    // controllability matrix of the dual pair (A^T, c) = observability of (A, c^T)
    Matrix ctrb = controllability_matrix(a.transpose(), c, n);
    SvdResult s = svd_with_rank(ctrb, tol);
    if (s.numerical_rank < n)
        throw ObservabilityError("place_deadbeat: (A, c^T) not observable");

    // Ackermann: K = e_n^T C^{-1} (A^T)^n, desired polynomial lambda^n
    Vector en = Vector::Zero(n);
    en(n - 1) = 1.0;
    Vector w = ctrb.transpose().partialPivLu().solve(en);
    Matrix an = Matrix::Identity(n, n);
    for (int i = 0; i < n; ++i) an = a.transpose() * an;
    RowVector k = w.transpose() * an;
    return -k.transpose();
}

double resultant(const Vector& p, const Vector& q) {
    const int dp = static_cast<int>(p.size()) - 1;
    const int dq = static_cast<int>(q.size()) - 1;
    if (dp < 0 || dq < 0) throw InvalidInputError("resultant: empty polynomial");
    if (dp == 0 && dq == 0) return 1.0;
    const int m = dp + dq;
    Matrix syl = Matrix::Zero(m, m);
    for (int i = 0; i < dq; ++i)
        for (int j = 0; j <= dp; ++j) syl(i, i + j) = p(j);
    for (int i = 0; i < dp; ++i)
        for (int j = 0; j <= dq; ++j) syl(dq + i, i + j) = q(j);
    return syl.determinant();
}

std::vector<Complex> poly_roots(const Vector& p) {
    int lead = 0;
    while (lead < p.size() && p(lead) == 0.0) ++lead;
    const int deg = static_cast<int>(p.size()) - 1 - lead;
    if (deg < 1) return {};
    Matrix comp = Matrix::Zero(deg, deg);
    for (int j = 0; j < deg; ++j) comp(0, j) = -p(lead + 1 + j) / p(lead);
    for (int i = 1; i < deg; ++i) comp(i, i - 1) = 1.0;
    return eigenvalues(comp);
}

}  // namespace slsid::numkern
