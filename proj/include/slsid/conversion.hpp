#pragma once

#include <functional>
#include <vector>

#include "slsid/numkern.hpp"

namespace slsid::conversion {

using numkern::Matrix;
using numkern::Vector;
using Eigen::RowVector2d;

/// Source of observer Markov parameters h_o(t, t-v); must return zero rows for
/// v beyond the deadbeat depth. Time-varying in general.
using ObserverMarkovFn = std::function<RowVector2d(int t, int v)>;

/// System and gain Markov parameters recovered around an anchor time.
struct MarkovWindow {
    int anchor = 0;                 // k
    int max_lag = 0;
    // h(t, t-v) for t in [anchor, anchor+extra] and v = 0..max_lag
    // laid out as h[t - anchor][v]
    std::vector<std::vector<double>> h;
    // h_m(anchor+v, anchor-1) for v = 0..extra
    std::vector<double> h_m;
};

/// System Markov recovery from observer Markov parameters:
///   gamma(k,i) = ho1(k,i) + ho2(k,i) d(i)
///   h(k,i)     = gamma(k,i) + sum_{j=i+1}^{k-1} ho2(k,j) h(j,i)
///   h_m(k,i)   = -ho2(k,i)  + sum_{j=i+1}^{k-1} ho2(k,j) h_m(j,i)
/// with zero padding of h_o beyond the supplied deadbeat depth.
/// `extra` controls how many anchor shifts are produced (rows of H need
/// h(k+alpha, .) up to alpha = extra).
MarkovWindow recover_markov(const ObserverMarkovFn& h_o, int anchor, int max_lag, int extra);

/// Stationary specialization: h and h_m sequences generated from one theta_n
/// (depth-n parameter vector (d, ho(1)..ho(n) pairs)); lags beyond n are zero
/// padded. Returns h(0..count) and h_m(1..count) (h_m[0] unused).
struct StationaryMarkov {
    std::vector<double> h;
    std::vector<double> h_m;
};

StationaryMarkov markov_from_theta(const Vector& theta_n, int n, int count);

/// One realized discrete state, up to similarity.
struct RealizationEstimate {
    Matrix a_hat;
    Vector b_hat;
    Vector c_hat;
    double d_hat = 0.0;
    Vector singular_values;     // of the Hankel used
    Matrix observability;       // O_hat (2n x n), for gain recovery
    double statistic = 0.0;     // sum |lambda_i(a_hat)|
};

/// Ho-Kalman on a stationary Markov sequence h(0..4n-1): one 2n x 2n Hankel,
/// shifted-row extraction. Throws OrderMismatchError when the numerical rank
/// at `rank_tol` differs from n.
RealizationEstimate realize(const std::vector<double>& h, int n,
                            double rank_tol = numkern::kDefaultRankTol);

/// General pairwise form: Hankels H(k) and H(k+1) with entries
/// H_ab(k) = h(k+a-1, k-b), independent SVDs, shift formula across the pair.
RealizationEstimate realize_pair(const Matrix& hankel_k, const Matrix& hankel_k1, int n,
                                 double rank_tol = numkern::kDefaultRankTol);

/// Observer gain estimate g_hat = O_hat^+ [h_m(k,k-1); ...; h_m(k+q-1,k-1)];
/// equals T g for the realization's similarity T.
Vector estimate_gain(const std::vector<double>& h_m_stack, const Matrix& observability);

/// l1 norm of the eigenvalues of the realized A (similarity invariant).
double statistic(const RealizationEstimate& est);

}  // namespace slsid::conversion
