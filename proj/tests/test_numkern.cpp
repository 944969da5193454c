#include <doctest.h>

#include "fixtures.hpp"
#include "slsid/numkern.hpp"

using namespace slsid;
using numkern::Matrix;
using numkern::Vector;

namespace {

Matrix random_matrix(int rows, int cols, model::Rng& rng) {
    Matrix m(rows, cols);
    for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j) m(i, j) = rng.gauss();
    return m;
}

}  // namespace

TEST_CASE("svd of the identity") {
    auto s = numkern::svd_with_rank(Matrix::Identity(3, 3));
    CHECK(s.numerical_rank == 3);
    for (int i = 0; i < 3; ++i) CHECK(s.singular_values(i) == doctest::Approx(1.0));
}

TEST_CASE("svd rank of an outer product") {
    Vector u(2), v(2);
    u << 1, 2;
    v << 3, 4;
    auto s = numkern::svd_with_rank(u * v.transpose());
    CHECK(s.numerical_rank == 1);
    CHECK(s.singular_values(1) <= 1e-12 * s.singular_values(0));
}

TEST_CASE("svd reconstruction and orthonormality") {
    model::Rng rng(11);
    Matrix a = random_matrix(6, 4, rng);
    auto s = numkern::svd_with_rank(a);
    Matrix rec = s.left_vectors * s.singular_values.asDiagonal() * s.right_vectors.transpose();
    CHECK((a - rec).norm() <= 1e-10 * a.norm());
    CHECK((s.left_vectors.transpose() * s.left_vectors - Matrix::Identity(4, 4)).norm() <= 1e-10);
    CHECK((s.right_vectors.transpose() * s.right_vectors - Matrix::Identity(4, 4)).norm() <= 1e-10);
    for (int i = 1; i < 4; ++i) CHECK(s.singular_values(i) <= s.singular_values(i - 1));
}

TEST_CASE("svd deterministic signs") {
    model::Rng rng(12);
    Matrix a = random_matrix(5, 5, rng);
    auto s1 = numkern::svd_with_rank(a);
    auto s2 = numkern::svd_with_rank(a);
    CHECK((s1.left_vectors - s2.left_vectors).norm() == 0.0);
    for (int j = 0; j < 5; ++j) {
        int i = 0;
        while (i < 5 && std::abs(s1.left_vectors(i, j)) <= 1e-12) ++i;
        REQUIRE(i < 5);
        CHECK(s1.left_vectors(i, j) > 0.0);
    }
}

TEST_CASE("svd rejects non-finite input") {
    Matrix a = Matrix::Zero(2, 2);
    a(0, 0) = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(numkern::svd_with_rank(a), InvalidInputError);
}

TEST_CASE("lq of a lower-triangular matrix") {
    Matrix a(2, 2);
    a << 2, 0, 1, 3;
    auto f = numkern::lq(a);
    CHECK((f.l_factor - a).norm() <= 1e-12 * a.norm());
    CHECK((f.q_factor - Matrix::Identity(2, 2)).norm() <= 1e-12);
}

TEST_CASE("lq of a row vector") {
    Matrix v(1, 3);
    v << 3, 0, 4;
    auto f = numkern::lq(v);
    CHECK(f.l_factor(0, 0) == doctest::Approx(5.0));
    CHECK((f.q_factor - v / 5.0).norm() <= 1e-12);
}

TEST_CASE("lq reconstruction on a wide random matrix") {
    model::Rng rng(13);
    Matrix a = random_matrix(4, 9, rng);
    auto f = numkern::lq(a);
    CHECK((a - f.l_factor * f.q_factor).norm() <= 1e-10 * a.norm());
    CHECK((f.q_factor * f.q_factor.transpose() - Matrix::Identity(4, 4)).norm() <= 1e-10);
    for (int i = 0; i < f.l_factor.rows(); ++i)
        for (int j = i + 1; j < f.l_factor.cols(); ++j)
            CHECK(std::abs(f.l_factor(i, j)) <= 1e-12);
}

TEST_CASE("pinv basics") {
    CHECK((numkern::pinv(Matrix::Identity(3, 3)) - Matrix::Identity(3, 3)).norm() <= 1e-12);
    Matrix col(2, 1);
    col << 2, 0;
    Matrix p = numkern::pinv(col);
    CHECK(p(0, 0) == doctest::Approx(0.5));
    CHECK(p(0, 1) == doctest::Approx(0.0));
}

TEST_CASE("pinv identity residual and idempotence on a random tall matrix") {
    model::Rng rng(14);
    Matrix a = random_matrix(8, 3, rng);
    Matrix p = numkern::pinv(a);
    CHECK((p * a - Matrix::Identity(3, 3)).norm() <= 1e-10);
    CHECK((a * p * a - a).norm() <= 1e-9 * a.norm());
}

TEST_CASE("pinv rejects rank-deficient input with the measured rank") {
    Matrix a(3, 2);
    a.col(0) << 1, 2, 3;
    a.col(1) = 2.0 * a.col(0);
    try {
        numkern::pinv(a);
        FAIL("expected RankError");
    } catch (const RankError& e) {
        CHECK(e.measured_rank == 1);
    }
}

TEST_CASE("eigenvalues of diagonal and nilpotent matrices") {
    Matrix d = Matrix::Zero(2, 2);
    d(0, 0) = 0.5;
    d(1, 1) = -0.25;
    auto ev = numkern::eigenvalues(d);
    CHECK(ev[0].real() == doctest::Approx(-0.25));
    CHECK(ev[1].real() == doctest::Approx(0.5));

    Matrix nil = Matrix::Zero(2, 2);
    nil(0, 1) = 1.0;
    for (const auto& l : numkern::eigenvalues(nil)) CHECK(std::abs(l) <= 1e-12);
}

TEST_CASE("eigenvalues of the oscillatory state match the quadratic formula") {
    // roots of z^2 - 0.6 z + 0.9: complex pair of modulus sqrt(0.9)
    auto m = fixtures::three_state_model();
    auto ev = numkern::eigenvalues(m.states[0].a);
    for (const auto& l : ev) CHECK(std::abs(l) == doctest::Approx(std::sqrt(0.9)).epsilon(1e-10));
    CHECK(ev[0].real() == doctest::Approx(0.3));
}

TEST_CASE("eigenvalue residual property") {
    model::Rng rng(15);
    Matrix a = random_matrix(5, 5, rng);
    for (const auto& l : numkern::eigenvalues(a)) {
        Eigen::MatrixXcd shifted = a.cast<numkern::Complex>();
        shifted -= l * Eigen::MatrixXcd::Identity(5, 5);
        Eigen::JacobiSVD<Eigen::MatrixXcd> svd(shifted);
        CHECK(svd.singularValues().tail(1)(0) <= 1e-7 * a.norm());
    }
}

TEST_CASE("deadbeat placement reproduces the worked gains") {
    auto q1 = fixtures::companion_pair();
    Vector g1 = numkern::place_deadbeat(q1.a, q1.c);
    CHECK(g1(0) == doctest::Approx(-1.0));
    CHECK(g1(1) == doctest::Approx(0.0));

    auto q2 = fixtures::gain_eighth_state();
    Vector g2 = numkern::place_deadbeat(q2.a, q2.c);
    CHECK(g2(0) == doctest::Approx(-0.125));
    CHECK(g2(1) == doctest::Approx(0.125));

    auto q3 = fixtures::nilpotent_pair();
    Vector g3 = numkern::place_deadbeat(q3.a, q3.c);
    CHECK(g3.norm() <= 1e-12);
}

TEST_CASE("deadbeat placement nilpotency across random observable pairs") {
    model::Rng rng(16);
    int done = 0;
    while (done < 20) {
        const int n = 2 + static_cast<int>(rng.uniform_int(3));
        Matrix a = random_matrix(n, n, rng);
        Vector c = random_matrix(n, 1, rng).col(0);
        Vector g;
        try {
            g = numkern::place_deadbeat(a, c);
        } catch (const ObservabilityError&) {
            continue;
        }
        Matrix ao = a + g * c.transpose();
        Matrix power = Matrix::Identity(n, n);
        for (int i = 0; i < n; ++i) power = ao * power;
        CHECK(power.norm() <= 1e-8 * std::max(1.0, std::pow(a.norm(), n)));
        ++done;
    }
}

TEST_CASE("deadbeat placement rejects unobservable pairs") {
    Matrix a = Matrix::Zero(2, 2);
    a(0, 0) = 0.5;
    a(1, 1) = 0.5;  // repeated mode; c sees one direction only
    Vector c(2);
    c << 1, 0;
    CHECK_THROWS_AS(numkern::place_deadbeat(a, c), ObservabilityError);
}

TEST_CASE("resultant detects common factors") {
    Vector p(3), q(3);
    p << 1, -3, 2;   // (z-1)(z-2)
    q << 1, -5, 6;   // (z-2)(z-3)
    CHECK(std::abs(numkern::resultant(p, q)) <= 1e-12);
    Vector r(3);
    r << 1, 0, 0.25;  // z^2 + 0.25
    CHECK(std::abs(numkern::resultant(p, r)) > 1e-6);
}

TEST_CASE("poly roots of z^2 - 0.25") {
    Vector p(3);
    p << 1, 0, -0.25;
    auto roots = numkern::poly_roots(p);
    REQUIRE(roots.size() == 2);
    CHECK(roots[0].real() == doctest::Approx(-0.5));
    CHECK(roots[1].real() == doctest::Approx(0.5));
}
