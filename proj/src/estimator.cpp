#include "slsid/estimator.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "slsid/observer.hpp"

namespace slsid::estimator {

MeasurementSystem assemble(const IoRecord& data, int n, int depth) {
    const int N = data.length();
    if (N < 4 * n) throw RangeError("assemble: record shorter than 4n");
    MeasurementSystem sys;
    sys.n = n;
    sys.depth = depth;
    sys.block_dim = 2 * depth + 1;
    sys.block_count = N - 4 * n + 1;  // measurements at times 2n+1 .. N-2n+1
    sys.z.resize(sys.block_count, sys.block_dim);
    sys.y.resize(sys.block_count);
    for (int k = 1; k <= sys.block_count; ++k) {
        const int t = sys.time_of(k);
        sys.z.row(k - 1) = observer::regressor(data, t, depth).transpose();
        sys.y(k - 1) = data.y_at(t);
    }
    return sys;
}

namespace {

/// Coordinate groups of the parameter vector: lag 0 is the single d
/// coordinate, lag v >= 1 the (u, y) pair.
struct CoordGroups {
    std::vector<std::vector<int>> coords;
    std::vector<int> lag;

    CoordGroups(int depth) {
        coords.push_back({0});
        lag.push_back(0);
        for (int v = 1; v <= depth; ++v) {
            coords.push_back({2 * v - 1, 2 * v});
            lag.push_back(v);
        }
    }
};

double block_shrink_scale(double norm, double threshold) {
    if (norm <= threshold || norm <= 0.0) return 0.0;
    return 1.0 - threshold / norm;
}

/// Operator-splitting solver for the regularized BBPDN on the cumulative-sum
/// parameterization. Splits: residual r = Y - Zx, differences v = Dx, spatial
/// copy xi = x; constraint blocks are preconditioned so one penalty scale
/// serves all three (the x-step factorization is rho-free).
class GroupFusedAdmm {
  public:
    GroupFusedAdmm(const MeasurementSystem& sys, const CoordGroups& groups)
        : sys_(sys), groups_(groups), Nh_(sys.block_count), p_(sys.block_dim),
          K_(sys.block_count + 1) {
        double mz = 0.0;
        for (int k = 0; k < Nh_; ++k) mz += sys_.z.row(k).squaredNorm();
        mz /= std::max(1, Nh_);
        c1_ = 1.0 / std::max(mz, 1e-12);
        c2_ = 0.25;
        c3_ = 1.0;
        factor();
    }

    struct State {
        Matrix x, v, xi;    // K x p, Nh x p, K x p
        Vector r;           // Nh
        Matrix a, bd;       // duals for v and xi constraints
        Vector ur;          // dual for the residual constraint
    };

    State zero_state() const {
        State s;
        s.x = Matrix::Zero(K_, p_);
        s.v = Matrix::Zero(Nh_, p_);
        s.xi = Matrix::Zero(K_, p_);
        s.r = Vector::Zero(Nh_);
        s.a = Matrix::Zero(Nh_, p_);
        s.bd = Matrix::Zero(K_, p_);
        s.ur = Vector::Zero(Nh_);
        return s;
    }

    /// One reweighted pass; returns (iterations, converged, primal, dual).
    std::tuple<int, bool, double, double> solve(State& st, double lambda,
                                                const Vector& gamma_eff,
                                                const Vector& w, double& rho,
                                                int max_iter, double tol,
                                                double relax = 1.6) const {
        const double nY = sys_.y.norm();
        int it = 0;
        bool converged = false;
        double rp = 0.0, rd = 0.0;
        Matrix rhs(K_, p_), dx(Nh_, p_), dxh(Nh_, p_), xh(K_, p_);
        Matrix vn(Nh_, p_), xin(K_, p_);
        Vector zx(Nh_), zxh(Nh_), rn(Nh_);
        for (it = 1; it <= max_iter; ++it) {
            // x-step: (c1 Z^T Z + c2 D^T D + c3 I) x = rhs
            rhs.setZero();
            for (int k = 0; k < Nh_; ++k)
                rhs.row(k + 1) = c1_ * (sys_.y(k) - st.r(k) - st.ur(k)) * sys_.z.row(k);
            // + c2 D^T (v - a) + c3 (xi - bd)
            for (int k = 0; k < Nh_; ++k) {
                const auto d = (c2_ * (st.v.row(k) - st.a.row(k))).eval();
                rhs.row(k) -= d;
                rhs.row(k + 1) += d;
            }
            rhs += c3_ * (st.xi - st.bd);
            solve_tridiag(rhs, st.x);

            for (int k = 0; k < Nh_; ++k) zx(k) = sys_.z.row(k).dot(st.x.row(k + 1));
            dx = st.x.bottomRows(Nh_) - st.x.topRows(Nh_);
            zxh = relax * zx + (1.0 - relax) * (sys_.y - st.r);
            dxh = relax * dx + (1.0 - relax) * st.v;
            xh = relax * st.x + (1.0 - relax) * st.xi;

            // r-step: prox of the unsquared residual norm (global block)
            rn = sys_.y - zxh - st.ur;
            rn *= block_shrink_scale(rn.norm(), 1.0 / (rho * c1_));

            // v-step: group soft threshold per eta block
            for (int k = 0; k < Nh_; ++k) {
                auto q = (dxh.row(k) + st.a.row(k)).eval();
                vn.row(k) = q * block_shrink_scale(q.norm(), lambda * w(k) / (rho * c2_));
            }

            // xi-step: per spatial group over all times
            xin = xh + st.bd;
            for (size_t g = 0; g < groups_.coords.size(); ++g) {
                double nrm = 0.0;
                for (int c : groups_.coords[g]) nrm += xin.col(c).squaredNorm();
                nrm = std::sqrt(nrm);
                const double sc = block_shrink_scale(nrm, gamma_eff(g) / (rho * c3_));
                for (int c : groups_.coords[g]) xin.col(c) *= sc;
            }

            st.ur += zxh + rn - sys_.y;
            st.a += dxh - vn;
            st.bd += xh - xin;

            // residuals; dual residual s = rho (c1 Z^T dr - c2 D^T dv - c3 dxi)
            Matrix dt = -c3_ * (xin - st.xi);
            for (int k = 0; k < Nh_; ++k) {
                const auto dv = (c2_ * (vn.row(k) - st.v.row(k))).eval();
                dt.row(k) += dv;
                dt.row(k + 1) -= dv;
                dt.row(k + 1) += c1_ * (rn(k) - st.r(k)) * sys_.z.row(k);
            }
            rd = rho * dt.norm();
            rp = std::sqrt(c1_ * (zx + rn - sys_.y).squaredNorm() +
                           c2_ * (dx - vn).squaredNorm() + c3_ * (st.x - xin).squaredNorm());
            st.v = vn;
            st.xi = xin;
            st.r = rn;

            const double ep = tol * std::max(std::sqrt(3.0) * st.x.norm(),
                                             st.v.norm() + st.xi.norm() + st.r.norm() + nY) +
                              1e-12;
            const double ed = tol * rho * (c2_ * st.a.norm() + c3_ * st.bd.norm() +
                                           c1_ * st.ur.norm()) + 1e-12;
            if (rp < ep && rd < ed) { converged = true; break; }
            if (it % 10 == 0) {
                if (rp > 10.0 * rd && rho < 1e8) {
                    rho *= 2.0; st.a /= 2.0; st.bd /= 2.0; st.ur /= 2.0;
                } else if (rd > 10.0 * rp && rho > 1e-8) {
                    rho /= 2.0; st.a *= 2.0; st.bd *= 2.0; st.ur *= 2.0;
                }
            }
        }
        return {std::min(it, max_iter), converged, rp, rd};
    }

  private:
    void factor() {
        chol_.resize(K_);
        Matrix s = block_diag(0);
        chol_[0] = s.llt().matrixL();
        for (int k = 1; k < K_; ++k) {
            // S_k = H_kk - c2^2 S_{k-1}^{-1}
            Matrix sinv = Matrix::Identity(p_, p_);
            chol_[k - 1].triangularView<Eigen::Lower>().solveInPlace(sinv);
            chol_[k - 1].transpose().triangularView<Eigen::Upper>().solveInPlace(sinv);
            Matrix sk = block_diag(k) - c2_ * c2_ * sinv;
            chol_[k] = sk.llt().matrixL();
        }
    }

    Matrix block_diag(int k) const {
        const int deg = (k == 0 || k == K_ - 1) ? 1 : 2;
        Matrix b = (c2_ * deg + c3_) * Matrix::Identity(p_, p_);
        if (k >= 1) b += c1_ * sys_.z.row(k - 1).transpose() * sys_.z.row(k - 1);
        return b;
    }

    void solve_tridiag(const Matrix& rhs, Matrix& x) const {
        // forward: y_k = rhs_k + c2 S_{k-1}^{-1} y_{k-1}
        Matrix yv(K_, p_);
        yv.row(0) = rhs.row(0);
        Vector tmp(p_);
        for (int k = 1; k < K_; ++k) {
            tmp = yv.row(k - 1).transpose();
            chol_[k - 1].triangularView<Eigen::Lower>().solveInPlace(tmp);
            chol_[k - 1].transpose().triangularView<Eigen::Upper>().solveInPlace(tmp);
            yv.row(k) = rhs.row(k) + c2_ * tmp.transpose();
        }
        // backward: x_k = S_k^{-1} (y_k + c2 x_{k+1})
        tmp = yv.row(K_ - 1).transpose();
        chol_[K_ - 1].triangularView<Eigen::Lower>().solveInPlace(tmp);
        chol_[K_ - 1].transpose().triangularView<Eigen::Upper>().solveInPlace(tmp);
        x.row(K_ - 1) = tmp.transpose();
        for (int k = K_ - 2; k >= 0; --k) {
            tmp = (yv.row(k) + c2_ * x.row(k + 1)).transpose();
            chol_[k].triangularView<Eigen::Lower>().solveInPlace(tmp);
            chol_[k].transpose().triangularView<Eigen::Upper>().solveInPlace(tmp);
            x.row(k) = tmp.transpose();
        }
    }

    const MeasurementSystem& sys_;
    const CoordGroups& groups_;
    int Nh_, p_, K_;
    double c1_, c2_, c3_;
    std::vector<Matrix> chol_;
};

double objective_value(const MeasurementSystem& sys, const CoordGroups& groups,
                       const Matrix& x, double lambda, const Vector& w,
                       const Vector& gamma_eff) {
    double resid2 = 0.0;
    for (int k = 0; k < sys.block_count; ++k) {
        const double r = sys.y(k) - sys.z.row(k).dot(x.row(k + 1));
        resid2 += r * r;
    }
    double obj = std::sqrt(resid2);
    for (int k = 0; k < sys.block_count; ++k)
        obj += lambda * w(k) * (x.row(k + 1) - x.row(k)).norm();
    for (size_t g = 0; g < groups.coords.size(); ++g) {
        double nrm = 0.0;
        for (int c : groups.coords[g]) nrm += x.col(c).squaredNorm();
        obj += gamma_eff(g) * std::sqrt(nrm);
    }
    return obj;
}

}  // namespace

Vector bcls(const Matrix& z_rows, const Vector& y_rows, const std::vector<int>& act_coords,
            int block_dim) {
    Vector th = Vector::Zero(block_dim);
    if (z_rows.rows() == 0) return th;
    const int m = static_cast<int>(act_coords.size());
    Matrix zs(z_rows.rows(), m);
    for (int j = 0; j < m; ++j) zs.col(j) = z_rows.col(act_coords[j]);

    std::vector<int> ylocal;  // positions of noisy y-lag coordinates
    for (int j = 0; j < m; ++j)
        if (act_coords[j] >= 1 && act_coords[j] % 2 == 0) ylocal.push_back(j);

    Matrix g = zs.transpose() * zs;
    Vector gy = zs.transpose() * y_rows;
    Vector sol = zs.bdcSvd(Eigen::ComputeThinU | Eigen::ComputeThinV).solve(y_rows);
    const double rows = static_cast<double>(zs.rows());
    for (int pass = 0; pass < 3; ++pass) {
        const Vector r = y_rows - zs * sol;
        double thy2 = 0.0;
        for (int j : ylocal) thy2 += sol(j) * sol(j);
        const double s2 = r.squaredNorm() / rows / (1.0 + thy2);
        Matrix gc = g;
        for (int j : ylocal) gc(j, j) -= rows * s2;
        Eigen::SelfAdjointEigenSolver<Matrix> es(gc);
        if (es.eigenvalues().minCoeff() <= 1e-10 * std::max(es.eigenvalues().maxCoeff(), 1e-300))
            break;
        sol = es.eigenvectors() *
              (es.eigenvectors().transpose() * gy).cwiseQuotient(es.eigenvalues());
    }
    for (int j = 0; j < m; ++j) th(act_coords[j]) = sol(j);
    return th;
}

namespace {

/// Thresholded refinement in its exact limit: with the detected support frozen
/// (weights 0 on active blocks/groups, effectively infinite elsewhere) the
/// problem decouples into per-segment least squares on the active coordinates;
/// rows within n of a segment end are dropped as transition-band rows.
Matrix refine_segments(const MeasurementSystem& sys, const std::vector<int>& eta_support,
                       const std::vector<int>& act_coords) {
    const int K = sys.block_count + 1;
    const int n = sys.n;
    Matrix x = Matrix::Zero(K, sys.block_dim);
    std::vector<int> bounds;
    bounds.push_back(0);
    for (int j : eta_support) bounds.push_back(j + 1);  // mu-index boundary
    bounds.push_back(K);
    for (size_t i = 0; i + 1 < bounds.size(); ++i) {
        const int s0 = bounds[i], e0 = bounds[i + 1];
        int lo = std::max(s0, 1), hi = e0;
        if (hi - lo > 3 * n) { lo += n; hi -= n; }
        const int rows = hi - lo;
        Vector th = Vector::Zero(sys.block_dim);
        if (rows > 0) {
            Matrix zr(rows, sys.block_dim);
            Vector yr(rows);
            for (int k = lo; k < hi; ++k) {
                zr.row(k - lo) = sys.z.row(k - 1);
                yr(k - lo) = sys.y(k - 1);
            }
            th = bcls(zr, yr, act_coords, sys.block_dim);
        }
        for (int k = s0; k < e0; ++k) x.row(k) = th.transpose();
    }
    return x;
}

}  // namespace

SolutionPath solve_bbpdn(const MeasurementSystem& sys, const HyperParams& hyper) {
    if (hyper.lambda < 0 || hyper.gamma1 < 0 || hyper.gamma2 < 0 || hyper.alpha < 0 ||
        hyper.zero_tol_rel <= 0)
        throw InvalidInputError("solve_bbpdn: invalid hyper-parameters");
    const CoordGroups groups(sys.depth);
    const int Nh = sys.block_count;
    GroupFusedAdmm admm(sys, groups);
    auto st = admm.zero_state();

    Vector w = Vector::Ones(Nh);
    Vector vgw = Vector::Ones(static_cast<int>(groups.coords.size()));
    Vector gamma_s(vgw.size());
    for (int g = 0; g < gamma_s.size(); ++g)
        gamma_s(g) = groups.lag[g] <= sys.n ? hyper.gamma2 : hyper.gamma1;

    SolutionPath path;
    path.n = sys.n;
    path.depth = sys.depth;
    double rho = hyper.admm_rho0;
    for (int t = 0; t < hyper.t_max; ++t) {
        const Vector gamma_eff = gamma_s.cwiseProduct(vgw);
        path.diagnostics.objective_entry.push_back(
            objective_value(sys, groups, st.x, hyper.lambda, w, gamma_eff));
        auto [iters, conv, rp, rd] =
            admm.solve(st, hyper.lambda, gamma_eff, w, rho, hyper.admm_max_iter, hyper.admm_tol);
        path.diagnostics.iterations.push_back(iters);
        path.diagnostics.converged.push_back(conv);
        path.diagnostics.primal_residual.push_back(rp);
        path.diagnostics.dual_residual.push_back(rd);
        path.diagnostics.objective_exit.push_back(
            objective_value(sys, groups, st.x, hyper.lambda, w, gamma_eff));
        // weight update from the split variables (their proxes give exact zeros)
        for (int k = 0; k < Nh; ++k) w(k) = 1.0 / (hyper.alpha + st.v.row(k).norm());
        for (size_t g = 0; g < groups.coords.size(); ++g) {
            double nrm = 0.0;
            for (int c : groups.coords[g]) nrm += st.xi.col(c).squaredNorm();
            vgw(static_cast<int>(g)) = 1.0 / (hyper.alpha + std::sqrt(nrm));
        }
        // stale duals encode the previous weights; restart them
        st.a.setZero();
        st.bd.setZero();
        st.ur.setZero();
    }
    path.diagnostics.rho_final = rho;

    // support from the sparse split variable
    Vector vn(Nh);
    for (int k = 0; k < Nh; ++k) vn(k) = st.v.row(k).norm();
    const double vmax = std::max(vn.maxCoeff(), 1e-300);
    std::vector<int> support;
    for (int k = 0; k < Nh; ++k)
        if (vn(k) > hyper.zero_tol_rel * vmax) support.push_back(k);

    // active spatial groups from the xi split
    Vector gn(static_cast<int>(groups.coords.size()));
    for (size_t g = 0; g < groups.coords.size(); ++g) {
        double nrm = 0.0;
        for (int c : groups.coords[g]) nrm += st.xi.col(c).squaredNorm();
        gn(static_cast<int>(g)) = std::sqrt(nrm);
    }
    const double gmax = std::max(gn.maxCoeff(), 1e-300);
    for (size_t g = 0; g < groups.coords.size(); ++g)
        if (gn(static_cast<int>(g)) > hyper.zero_tol_rel * gmax)
            for (int c : groups.coords[g]) path.active_coords.push_back(c);
    std::sort(path.active_coords.begin(), path.active_coords.end());
    if (path.active_coords.empty())
        for (int c = 0; c < sys.block_dim; ++c) path.active_coords.push_back(c);

    if (hyper.refine) {
        path.mu = refine_segments(sys, support, path.active_coords);
        path.refined = true;
    } else {
        path.mu = st.x;
    }
    path.eta = path.mu.bottomRows(Nh) - path.mu.topRows(Nh);
    path.mu0 = path.mu.row(0).transpose();
    return path;
}

OracleResult solve_l0_oracle(const MeasurementSystem& sys, int max_switches, double epsilon) {
    if (sys.block_count > 64 || max_switches > 3)
        throw ConstraintError("solve_l0_oracle: above the exhaustive scale guard");
    const int Nh = sys.block_count;
    const int p = sys.block_dim;
    const double eps_eff = std::max(epsilon, 1e-9 * sys.y.norm());

    auto fit_subset = [&](const std::vector<int>& sw, Matrix* mu_out) {
        std::vector<int> bounds{0};
        for (int j : sw) bounds.push_back(j + 1);
        bounds.push_back(Nh + 1);
        double r2 = 0.0;
        if (mu_out) *mu_out = Matrix::Zero(Nh + 1, p);
        for (size_t i = 0; i + 1 < bounds.size(); ++i) {
            const int s0 = bounds[i], e0 = bounds[i + 1];
            const int lo = std::max(s0, 1);
            const int rows = e0 - lo;
            if (rows <= 0) continue;
            Matrix zr(rows, p);
            Vector yr(rows);
            for (int k = lo; k < e0; ++k) {
                zr.row(k - lo) = sys.z.row(k - 1);
                yr(k - lo) = sys.y(k - 1);
            }
            Vector th = zr.bdcSvd(Eigen::ComputeThinU | Eigen::ComputeThinV).solve(yr);
            r2 += (yr - zr * th).squaredNorm();
            if (mu_out)
                for (int k = s0; k < e0; ++k) mu_out->row(k) = th.transpose();
        }
        return std::sqrt(r2);
    };

    OracleResult best;
    best.residual = std::numeric_limits<double>::infinity();
    for (int card = 0; card <= max_switches; ++card) {
        OracleResult best_at_card;
        best_at_card.residual = std::numeric_limits<double>::infinity();
        std::vector<int> idx(card);
        std::function<void(int, int)> rec = [&](int pos, int start) {
            if (pos == card) {
                const double r = fit_subset(idx, nullptr);
                if (r < best_at_card.residual) {
                    best_at_card.residual = r;
                    best_at_card.switch_blocks = idx;
                }
                return;
            }
            for (int j = start; j < Nh; ++j) {
                idx[pos] = j;
                rec(pos + 1, j + 1);
            }
        };
        rec(0, 0);
        if (best_at_card.residual < best.residual) {
            best = best_at_card;
        }
        if (best_at_card.residual <= eps_eff) {
            best = best_at_card;
            best.feasible = true;
            break;
        }
    }
    fit_subset(best.switch_blocks, &best.mu);
    best.switch_times.clear();
    for (int j : best.switch_blocks) best.switch_times.push_back(sys.time_of(j + 1));
    if (!best.feasible) best.feasible = best.residual <= eps_eff;
    return best;
}

SegmentPartition detect_segments(const SolutionPath& path, double zero_tol_rel) {
    const int Nh = static_cast<int>(path.eta.rows());
    const int n = path.n;
    Vector en = path.eta_norms();
    const double emax = std::max(en.maxCoeff(), 1e-300);
    SegmentPartition part;
    std::vector<int> bounds{2 * n + 1};
    for (int j = 0; j < Nh; ++j)
        if (en(j) > zero_tol_rel * emax) {
            part.switch_times.push_back(2 * n + 1 + j);
            bounds.push_back(2 * n + 1 + j);
        }
    bounds.push_back(2 * n + 1 + Nh);  // one past the last measured time
    for (size_t i = 0; i + 1 < bounds.size(); ++i) {
        if (bounds[i + 1] <= bounds[i]) continue;
        part.segments.emplace_back(bounds[i], bounds[i + 1]);
        // interior median, excluding n samples at each end when long enough
        int lo = bounds[i], hi = bounds[i + 1];
        if (hi - lo > 3 * n) { lo += n; hi -= n; }
        const int p = static_cast<int>(path.mu.cols());
        Vector med(p);
        std::vector<double> col(hi - lo);
        for (int c = 0; c < p; ++c) {
            for (int t = lo; t < hi; ++t) col[t - lo] = path.mu(t - 2 * n, c);
            std::nth_element(col.begin(), col.begin() + col.size() / 2, col.end());
            double m = col[col.size() / 2];
            if (col.size() % 2 == 0) {
                std::nth_element(col.begin(), col.begin() + col.size() / 2 - 1, col.end());
                m = 0.5 * (m + col[col.size() / 2 - 1]);
            }
            med(c) = m;
        }
        part.theta.push_back(med);
    }
    return part;
}

IdentifiabilityReport identifiability_test(const IoRecord& data, const Vector& theta_left,
                                           const Vector& theta_right, int k_i, int k_i1,
                                           int depth, double tol) {
    if (k_i1 <= k_i) throw RangeError("identifiability_test: empty segment");
    IdentifiabilityReport rep;
    Vector z1 = observer::regressor(data, k_i1, depth);
    rep.inner_product = std::abs(z1.dot(theta_right - theta_left));

    const int cols = k_i1 - k_i + 1;
    Matrix r(2 * depth + 1, cols);
    Vector yv(cols);
    for (int k = k_i; k <= k_i1; ++k) {
        r.col(k - k_i) = observer::regressor(data, k, depth);
        yv(k - k_i) = data.y_at(k);
    }
    rep.rank_regressor = numkern::svd_with_rank(r).numerical_rank;
    Matrix aug(cols, 2 * depth + 2);
    aug.col(0) = yv;
    aug.rightCols(2 * depth + 1) = r.transpose();
    rep.rank_augmented = numkern::svd_with_rank(aug).numerical_rank;
    const double scale = (theta_left.norm() + theta_right.norm()) * z1.norm() + 1e-300;
    rep.identifiable = rep.rank_augmented > rep.rank_regressor &&
                       rep.inner_product > tol * scale;
    return rep;
}

bool pe_check(const IoRecord& data, int s, int t, int n, double tol) {
    if (t <= s) throw RangeError("pe_check: window empty");
    if (t - s + 1 < 2 * n + 1) return false;  // too few columns
    Matrix r(2 * n + 1, t - s + 1);
    for (int k = s; k <= t; ++k) r.col(k - s) = observer::regressor(data, k, n);
    return numkern::svd_with_rank(r, tol).numerical_rank == 2 * n + 1;
}

int pe_window(const IoRecord& data, int s, int t, int n, double tol) {
    for (int w = 2 * n + 1; s + w - 1 <= t; ++w)
        if (pe_check(data, s, s + w - 1, n, tol)) return w;
    return 0;
}

}  // namespace slsid::estimator
