#include "slsid/conversion.hpp"

#include <cmath>
#include <map>

namespace slsid::conversion {

namespace {

struct MarkovMemo {
    const ObserverMarkovFn& ho;
    std::map<std::pair<int, int>, double> h;    // (t, i) -> h(t, i)
    std::map<std::pair<int, int>, double> hm;

    explicit MarkovMemo(const ObserverMarkovFn& f) : ho(f) {}

    double gamma(int t, int i) {
        RowVector2d a = ho(t, t - i);
        RowVector2d d = ho(i, 0);
        return a(0) + a(1) * d(0);
    }

    double system(int t, int i) {
        if (t == i) return ho(t, 0)(0);
        auto key = std::make_pair(t, i);
        auto it = h.find(key);
        if (it != h.end()) return it->second;
        double val = gamma(t, i);
        for (int j = i + 1; j <= t - 1; ++j)
            val += ho(t, t - j)(1) * system(j, i);
        h[key] = val;
        return val;
    }

    double gain(int t, int i) {
        if (t <= i) throw RangeError("recover_markov: gain lag must be positive");
        auto key = std::make_pair(t, i);
        auto it = hm.find(key);
        if (it != hm.end()) return it->second;
        double val = -ho(t, t - i)(1);
        for (int j = i + 1; j <= t - 1; ++j)
            val += ho(t, t - j)(1) * gain(j, i);
        hm[key] = val;
        return val;
    }
};

}  // namespace

MarkovWindow recover_markov(const ObserverMarkovFn& h_o, int anchor, int max_lag, int extra) {
    MarkovWindow w;
    w.anchor = anchor;
    w.max_lag = max_lag;
    MarkovMemo memo(h_o);
    w.h.resize(extra + 1);
    for (int s = 0; s <= extra; ++s) {
        w.h[s].resize(max_lag + 1);
        for (int v = 0; v <= max_lag; ++v)
            w.h[s][v] = memo.system(anchor + s, anchor + s - v);
    }
    w.h_m.resize(extra + 1);
    for (int v = 0; v <= extra; ++v)
        w.h_m[v] = memo.gain(anchor + v, anchor - 1);
    return w;
}

StationaryMarkov markov_from_theta(const Vector& theta_n, int n, int count) {
    if (theta_n.size() < 2 * n + 1)
        throw InvalidInputError("markov_from_theta: theta shorter than depth n");
    StationaryMarkov out;
    out.h.assign(count + 1, 0.0);
    out.h_m.assign(count + 1, 0.0);
    const double d = theta_n(0);
    std::vector<double> ho1(count + 1, 0.0), ho2(count + 1, 0.0);
    for (int v = 1; v <= n && v <= count; ++v) {
        ho1[v] = theta_n(2 * v - 1);
        ho2[v] = theta_n(2 * v);
    }
    out.h[0] = d;
    for (int v = 1; v <= count; ++v) {
        double acc = ho1[v] + ho2[v] * d;
        double accm = -ho2[v];
        for (int w = 1; w < v; ++w) {
            acc += ho2[w] * out.h[v - w];
            accm += ho2[w] * out.h_m[v - w];
        }
        out.h[v] = acc;
        out.h_m[v] = accm;
    }
    return out;
}

RealizationEstimate realize(const std::vector<double>& h, int n, double rank_tol) {
    const int k = 2 * n;
    if (static_cast<int>(h.size()) < 2 * k)
        throw RangeError("realize: need Markov lags 0..4n-1");
    Matrix hank(k, k);
    for (int a = 1; a <= k; ++a)
        for (int b = 1; b <= k; ++b) hank(a - 1, b - 1) = h[a + b - 1];

    auto svd = numkern::svd_with_rank(hank, rank_tol);
    if (svd.numerical_rank != n)
        throw OrderMismatchError("realize: Hankel rank differs from model order",
                                 svd.numerical_rank);

    Vector sq = svd.singular_values.head(n).cwiseSqrt();
    Matrix obs = svd.left_vectors.leftCols(n) * sq.asDiagonal();
    Matrix ctr = sq.asDiagonal() * svd.right_vectors.leftCols(n).transpose();

    RealizationEstimate est;
    est.a_hat = numkern::pinv(obs.topRows(k - 1)) * obs.bottomRows(k - 1);
    est.c_hat = obs.row(0).transpose();
    est.b_hat = ctr.col(0);
    est.d_hat = h[0];
    est.singular_values = svd.singular_values;
    est.observability = obs;
    est.statistic = numkern::eigenvalue_l1(est.a_hat);
    return est;
}

RealizationEstimate realize_pair(const Matrix& hankel_k, const Matrix& hankel_k1, int n,
                                 double rank_tol) {
    auto s0 = numkern::svd_with_rank(hankel_k, rank_tol);
    auto s1 = numkern::svd_with_rank(hankel_k1, rank_tol);
    if (s0.numerical_rank != n)
        throw OrderMismatchError("realize_pair: H(k) rank differs from model order",
                                 s0.numerical_rank);
    if (s1.numerical_rank != n)
        throw OrderMismatchError("realize_pair: H(k+1) rank differs from model order",
                                 s1.numerical_rank);
    Vector sq0 = s0.singular_values.head(n).cwiseSqrt();
    Vector sq1 = s1.singular_values.head(n).cwiseSqrt();
    Matrix obs0 = s0.left_vectors.leftCols(n) * sq0.asDiagonal();
    Matrix obs1 = s1.left_vectors.leftCols(n) * sq1.asDiagonal();
    Matrix ctr1 = sq1.asDiagonal() * s1.right_vectors.leftCols(n).transpose();

    const int ko = static_cast<int>(hankel_k.rows());
    RealizationEstimate est;
    est.a_hat = numkern::pinv(obs1.topRows(ko - 1)) * obs0.bottomRows(ko - 1);
    est.c_hat = obs0.row(0).transpose();
    est.b_hat = ctr1.col(0);
    est.d_hat = 0.0;  // h(k,k); supplied by the caller when known
    est.singular_values = s0.singular_values;
    est.observability = obs0;
    est.statistic = numkern::eigenvalue_l1(est.a_hat);
    return est;
}

Vector estimate_gain(const std::vector<double>& h_m_stack, const Matrix& observability) {
    if (static_cast<int>(h_m_stack.size()) != observability.rows())
        throw InvalidInputError("estimate_gain: stack length differs from O rows");
    Vector rhs(observability.rows());
    for (int i = 0; i < rhs.size(); ++i) rhs(i) = h_m_stack[i];
    return numkern::pinv(observability) * rhs;
}

double statistic(const RealizationEstimate& est) { return est.statistic; }

}  // namespace slsid::conversion
