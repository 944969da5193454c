#include "slsid/moesp.hpp"

#include <cmath>

namespace slsid::moesp {

SegmentData build_hankels(const IoRecord& data, int t0, int t1, int rows) {
    const int len = t1 - t0;
    if (rows < 1 || rows > len) throw RangeError("build_hankels: bad row count");
    if (t0 < 1 || t1 > data.length() + 1) throw RangeError("build_hankels: segment leaves record");
    const int cols = len - rows + 1;
    SegmentData sd;
    sd.rows = rows;
    sd.u_hankel.resize(rows, cols);
    sd.y_hankel.resize(rows, cols);
    for (int a = 0; a < rows; ++a)
        for (int b = 0; b < cols; ++b) {
            sd.u_hankel(a, b) = data.u_at(t0 + a + b);
            sd.y_hankel(a, b) = data.y_at(t0 + a + b);
        }
    return sd;
}

Matrix markov_toeplitz(const conversion::RealizationEstimate& state, int rows) {
    std::vector<double> m(rows);
    m[0] = state.d_hat;
    Vector v = state.b_hat;
    for (int i = 1; i < rows; ++i) {
        m[i] = state.c_hat.dot(v);
        v = state.a_hat * v;
    }
    Matrix psi = Matrix::Zero(rows, rows);
    for (int i = 0; i < rows; ++i)
        for (int j = 0; j <= i; ++j) psi(i, j) = m[i - j];
    return psi;
}

double confidence_threshold(const EstimatedStateSet& states) {
    return std::max(3.0 * states.cluster_dispersion, 1e-6);
}

namespace {

SegmentLabel match_statistic(double stat, const EstimatedStateSet& states) {
    SegmentLabel lab;
    double best = std::numeric_limits<double>::infinity();
    double second = best;
    for (size_t l = 0; l < states.rep_statistics.size(); ++l) {
        const double d = std::abs(stat - states.rep_statistics[l]);
        if (d < best) {
            second = best;
            best = d;
            lab.state = static_cast<int>(l);
        } else if (d < second) {
            second = d;
        }
    }
    lab.matched_statistic = stat;
    lab.margin = std::isfinite(second) ? second - best : 0.0;
    return lab;
}

/// Realization statistic from the top-n left singular subspace of `mat`.
std::optional<double> subspace_statistic(const Matrix& mat, int n) {
    auto svd = numkern::svd_with_rank(mat);
    if (svd.singular_values.size() < n ||
        svd.singular_values(n - 1) <= 1e-10 * std::max(svd.singular_values(0), 1e-300))
        return std::nullopt;
    Matrix obs = svd.left_vectors.leftCols(n) *
                 svd.singular_values.head(n).cwiseSqrt().asDiagonal();
    const int rows = static_cast<int>(obs.rows());
    if (rows < n + 1) return std::nullopt;
    try {
        Matrix a = numkern::pinv(obs.topRows(rows - 1)) * obs.bottomRows(rows - 1);
        return numkern::eigenvalue_l1(a);
    } catch (const RankError&) {
        return std::nullopt;
    }
}

}  // namespace

SegmentLabel label_segment_moesp(const IoRecord& data, int t0, int t1, int n,
                                 const EstimatedStateSet& states) {
    const int theta = 2 * n + 1;
    if (t1 - t0 < theta + n)
        throw RangeError("label_segment_moesp: segment shorter than theta + n");
    if (states.sigma_hat == 0) return {};

    SegmentData sd = build_hankels(data, t0, t1, theta);
    Matrix stacked(2 * theta, sd.u_hankel.cols());
    stacked.topRows(theta) = sd.u_hankel;
    stacked.bottomRows(theta) = sd.y_hankel;
    auto lqf = numkern::lq(stacked);

    SegmentLabel lab;
    // PE condition on the input block
    const auto u_rank = numkern::svd_with_rank(sd.u_hankel).numerical_rank;
    if (u_rank < theta) lab.low_confidence = true;

    const int r = static_cast<int>(lqf.l_factor.cols());
    if (r < 2 * theta) return lab;  // not enough columns for L22
    Matrix l22 = lqf.l_factor.block(theta, theta, theta, theta);
    auto stat = subspace_statistic(l22, n);
    if (!stat) {
        lab.low_confidence = true;
        return lab;
    }
    SegmentLabel matched = match_statistic(*stat, states);
    matched.low_confidence = lab.low_confidence || matched.margin < confidence_threshold(states);
    return matched;
}

SegmentLabel label_segment_residual(const IoRecord& data, int t0, int t1, int n,
                                    const EstimatedStateSet& states) {
    const int len = t1 - t0;
    if (len < 2 * n) throw RangeError("label_segment_residual: segment shorter than 2n");
    if (states.sigma_hat == 0) return {};
    // leave at least n columns so the compound state matrix can reach rank n
    const int rows = std::max(std::min(4 * n, len - n + 1), n + 1);
    SegmentData sd = build_hankels(data, t0, t1, rows);

    SegmentLabel lab;
    double best = std::numeric_limits<double>::infinity();
    double second = best;
    for (int l = 0; l < states.sigma_hat; ++l) {
        Matrix psi = markov_toeplitz(states.representatives[l], rows);
        Matrix xi = sd.y_hankel - psi * sd.u_hankel;
        auto stat = subspace_statistic(xi, n);
        if (!stat) continue;
        const double d = std::abs(*stat - states.rep_statistics[l]);
        if (d < best) {
            second = best;
            best = d;
            lab.state = l;
            lab.matched_statistic = *stat;
        } else if (d < second) {
            second = d;
        }
    }
    if (lab.state) {
        lab.margin = std::isfinite(second) ? second - best : 0.0;
        lab.low_confidence = best > confidence_threshold(states);
    }
    return lab;
}

}  // namespace slsid::moesp
