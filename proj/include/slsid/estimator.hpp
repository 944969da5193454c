#pragma once

#include <optional>
#include <vector>

#include "slsid/model.hpp"

namespace slsid::estimator {

using model::IoRecord;
using numkern::Matrix;
using numkern::Vector;

/// Stacked regression Y = M zeta over the uniformity window. Row k (1-based,
/// k = 1..block_count) is the measurement at time 2n+k:
///   y(2n+k) = z(2n+k)^T mu(k),  mu(k) = mu(0) + sum_{l<=k} eta(l).
struct MeasurementSystem {
    int n = 0;
    int depth = 0;        // tau
    int block_dim = 0;    // p = 2 tau + 1
    int block_count = 0;  // N_hat = N - 4n + 1
    Matrix z;             // block_count x p, regressor rows
    Vector y;             // block_count

    int time_of(int k) const { return 2 * n + k; }
    int block_of_time(int t) const { return t - 2 * n; }
};

MeasurementSystem assemble(const IoRecord& data, int n, int depth);

struct HyperParams {
    double lambda = 2.0;
    double gamma1 = 1e5;    // spatial weight, lags > n
    double gamma2 = 1e-5;   // spatial weight, lags <= n
    double alpha = 1e-3;    // reweighting offset
    int t_max = 4;          // reweighting iterations
    double epsilon = 0.0;   // residual budget (constrained form / oracle)
    double zero_tol_rel = 1e-4;  // block-activity threshold, relative to max ||eta||

    // solver controls
    int admm_max_iter = 2500;
    double admm_tol = 1e-6;
    double admm_rho0 = 100.0;
    bool refine = true;     // thresholded final pass (exact structured LS limit)
};

struct SolverDiagnostics {
    std::vector<int> iterations;        // per outer pass
    std::vector<bool> converged;
    std::vector<double> primal_residual;
    std::vector<double> dual_residual;
    std::vector<double> objective_entry;  // objective with pass weights at warm start
    std::vector<double> objective_exit;   // and at the pass solution
    double rho_final = 0.0;
};

struct SolutionPath {
    int n = 0;
    int depth = 0;
    Matrix mu;               // (block_count+1) x p; row k = mu(k)
    Matrix eta;              // block_count x p; row k-1 = eta(k) (support-exact)
    Vector mu0;              // = mu.row(0)
    std::vector<int> active_coords;  // spatial support used by the refinement
    SolverDiagnostics diagnostics;
    bool refined = false;

    Vector theta_at(int time) const {  // valid for time in [2n, N-2n+1]
        return mu.row(time - 2 * n).transpose();
    }
    Vector eta_norms() const {
        Vector out(eta.rows());
        for (int i = 0; i < eta.rows(); ++i) out(i) = eta.row(i).norm();
        return out;
    }
};

/// Iteratively reweighted block basis-pursuit denoising (regularized form)
///   min ||Y - M zeta||_2 + lambda sum_k w_k ||eta(k)||_2
///                        + sum_s gamma_s v_s ||Gamma_s||_2
/// solved by operator splitting on the cumulative-sum parameterization, with
/// t_max reweighting passes and an optional thresholded refinement realized as
/// the exact per-segment least-squares limit (bias-compensated for the noisy
/// output lags in the regressors).
SolutionPath solve_bbpdn(const MeasurementSystem& system, const HyperParams& hyper);

struct OracleResult {
    std::vector<int> switch_blocks;   // eta indices k with eta(k) != 0
    std::vector<int> switch_times;    // same, in original time (2n + k)
    double residual = 0.0;
    bool feasible = false;
    Matrix mu;                        // piecewise-constant trajectory
};

/// Exhaustive minimum-cardinality switch search (test oracle; refuses above
/// the scale guard block_count <= 64, max_switches <= 3).
OracleResult solve_l0_oracle(const MeasurementSystem& system, int max_switches,
                             double epsilon = 0.0);

struct SegmentPartition {
    std::vector<int> switch_times;            // detected switches, original time
    std::vector<std::pair<int, int>> segments; // [t_j, t_{j+1}) tiling (2n, N-2n+1]
    std::vector<Vector> theta;                 // per-segment interior median
};

SegmentPartition detect_segments(const SolutionPath& path, double zero_tol_rel = 1e-4);

struct IdentifiabilityReport {
    double inner_product = 0.0;   // |z^T(k_{i+1}) (theta_R - theta_L)|
    int rank_regressor = 0;       // rank of R(k_i, k_{i+1})
    int rank_augmented = 0;       // rank of [Y | R^T]
    bool identifiable = false;    // rank_augmented > rank_regressor && inner > tol
};

IdentifiabilityReport identifiability_test(const IoRecord& data, const Vector& theta_left,
                                           const Vector& theta_right, int k_i, int k_i1,
                                           int depth, double tol = 1e-8);

/// Persistence-of-excitation verdict: numerical rank of the reduced depth-n
/// regressor matrix R_n(s, t) equals 2n+1.
bool pe_check(const IoRecord& data, int s, int t, int n,
              double tol = numkern::kDefaultRankTol);

/// Smallest window length w such that rank(R_n(s, s+w-1)) = 2n+1, scanning
/// from `s`; returns 0 when the condition is never met before `t`.
int pe_window(const IoRecord& data, int s, int t, int n,
              double tol = numkern::kDefaultRankTol);

/// Bias-compensated least squares for theta over the given measurement rows
/// (active coordinates only). Compensates the output-noise contribution of the
/// y-lag regressor entries; harmless at zero noise.
Vector bcls(const Matrix& z_rows, const Vector& y_rows, const std::vector<int>& act_coords,
            int block_dim);

}  // namespace slsid::estimator
