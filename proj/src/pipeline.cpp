#include "slsid/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <future>
#include <thread>

namespace slsid::pipeline {

Quadruple to_observability_canonical(const Quadruple& q) {
    const int n = q.order();
    Matrix obs = numkern::observability_matrix(q.a, q.c);
    auto svd = numkern::svd_with_rank(obs);
    if (svd.numerical_rank < n)
        throw ObservabilityError("to_observability_canonical: unobservable realization");
    Matrix obs_inv = obs.partialPivLu().inverse();
    Quadruple out;
    out.a = obs * q.a * obs_inv;
    out.b = obs * q.b;
    out.c = Vector::Zero(n);
    out.c(0) = 1.0;
    out.d = q.d;
    return out;
}

Matrix canonical_map(const Matrix& a, const Vector& b, const Vector& c, double d) {
    Quadruple q{a, b, c, d};
    Quadruple cq = to_observability_canonical(q);
    const int n = q.order();
    Matrix m(n + 1, n + 1);
    m.topLeftCorner(n, n) = cq.a;
    m.topRightCorner(n, 1) = cq.b;
    m.bottomLeftCorner(1, n) = cq.c.transpose();
    m(n, n) = cq.d;
    return m;
}

double vaf(const std::vector<double>& y_true, const std::vector<double>& y_pred) {
    if (y_true.size() != y_pred.size() || y_true.size() < 2)
        throw InvalidInputError("vaf: length mismatch or too short");
    const int N = static_cast<int>(y_true.size());
    double my = 0.0, me = 0.0;
    for (int i = 0; i < N; ++i) {
        my += y_true[i];
        me += y_true[i] - y_pred[i];
    }
    my /= N;
    me /= N;
    double vy = 0.0, ve = 0.0;
    for (int i = 0; i < N; ++i) {
        vy += (y_true[i] - my) * (y_true[i] - my);
        const double e = y_true[i] - y_pred[i];
        ve += (e - me) * (e - me);
    }
    if (vy <= 0.0) throw UndefinedMetricError("vaf: zero-variance reference");
    return std::max(1.0 - ve / vy, 0.0) * 100.0;
}

std::vector<int> match_states(const SlsModel& truth, const EstimatedStateSet& estimate) {
    const int sigma = truth.sigma;
    if (estimate.sigma_hat != sigma)
        throw CardinalityError("match_states: state-count mismatch", sigma, estimate.sigma_hat);
    struct Pair { double dist; int t, s; };
    std::vector<Pair> pairs;
    for (int t = 0; t < sigma; ++t) {
        const double ts = numkern::eigenvalue_l1(truth.states[t].a);
        for (int s = 0; s < sigma; ++s)
            pairs.push_back({std::abs(ts - estimate.rep_statistics[s]), t, s});
    }
    std::sort(pairs.begin(), pairs.end(), [](const Pair& x, const Pair& y) {
        if (x.dist != y.dist) return x.dist < y.dist;
        if (x.t != y.t) return x.t < y.t;
        return x.s < y.s;
    });
    std::vector<int> match(sigma, -1);
    std::vector<bool> used(sigma, false);
    for (const auto& p : pairs)
        if (match[p.t] < 0 && !used[p.s]) {
            match[p.t] = p.s;
            used[p.s] = true;
        }
    return match;
}

double delta_r(const SlsModel& truth, const EstimatedStateSet& estimate) {
    auto match = match_states(truth, estimate);
    double acc = 0.0;
    for (int t = 0; t < truth.sigma; ++t) {
        const auto& q = truth.states[t];
        const auto& r = estimate.representatives[match[t]];
        Matrix mt = canonical_map(q.a, q.b, q.c, q.d);
        Matrix ms = canonical_map(r.a_hat, r.b_hat, r.c_hat, r.d_hat);
        acc += (mt - ms).norm() / mt.norm();
    }
    return acc;
}

IdentifyResult identify(const IoRecord& data, int n, const HyperParams& hyper,
                        int seg_min, const ClusterConfig& cluster_cfg) {
    const auto start = std::chrono::steady_clock::now();
    IdentifyResult res;
    res.horizon = data.length();
    try {
        res.states = clustering::estimate_state_set(data, n, hyper, seg_min, cluster_cfg,
                                                    &res.path, &res.partition);
    } catch (const Error& e) {
        throw StageError("estimator/clustering", e.what());
    }

    // long segments carry their cluster id; the rest go to the subspace labeller
    res.segment_labels.assign(res.partition.segments.size(), std::nullopt);
    for (size_t f = 0; f < res.states.features.size(); ++f) {
        const auto& fp = res.states.features[f];
        if (res.states.members[f] >= 0)
            res.segment_labels[fp.segment_id] = res.states.members[f];
    }
    try {
        for (size_t i = 0; i < res.partition.segments.size(); ++i) {
            if (res.segment_labels[i]) continue;
            const auto [t0, t1] = res.partition.segments[i];
            const int len = t1 - t0;
            moesp::SegmentLabel lab;
            if (len >= 3 * n + 1) {
                lab = moesp::label_segment_moesp(data, t0, t1, n, res.states);
                if (!lab.state || lab.low_confidence)
                    lab = moesp::label_segment_residual(data, t0, t1, n, res.states);
            } else if (len >= 2 * n) {
                lab = moesp::label_segment_residual(data, t0, t1, n, res.states);
            }
            if (lab.state && !lab.low_confidence) res.segment_labels[i] = lab.state;
            else if (lab.state && len >= 2 * n) res.segment_labels[i] = lab.state;
        }
    } catch (const Error& e) {
        throw StageError("moesp", e.what());
    }

    res.phi.assign(data.length(), -1);
    for (size_t i = 0; i < res.partition.segments.size(); ++i) {
        if (!res.segment_labels[i]) continue;
        const auto [t0, t1] = res.partition.segments[i];
        for (int k = t0; k < t1 && k <= data.length(); ++k) res.phi[k - 1] = *res.segment_labels[i];
    }

    // empirical PE window over the first long segment (diagnostics)
    for (size_t i = 0; i < res.partition.segments.size(); ++i) {
        const auto [t0, t1] = res.partition.segments[i];
        if (t1 - t0 >= seg_min) {
            res.pe_window_empirical = estimator::pe_window(data, t0 + n, t1 - 1, n);
            break;
        }
    }
    res.runtime_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return res;
}

namespace {

struct SegmentFit {
    int cluster = -1;
    Vector state_at_start;  // in the cluster's canonical basis
};

Vector propagate_state(const Quadruple& q, Vector x, const std::vector<double>& u, int k0,
                       int k1) {
    for (int k = k0; k < k1; ++k) x = q.a * x + q.b * u[k - 1];
    return x;
}

/// LS state estimate at k0 from rows [k0, k1) under one quadruple; returns
/// the estimate and the fit rms.
std::pair<Vector, double> fit_state_window(const Quadruple& q, const std::vector<double>& u,
                                           const std::vector<double>& y, int k0, int k1) {
    const int n = q.order();
    const int m = k1 - k0;
    Matrix rows(m, n);
    Vector forced(m);
    Vector x = Vector::Zero(n);
    Matrix phi = Matrix::Identity(n, n);
    for (int i = 0; i < m; ++i) {
        const int k = k0 + i;
        forced(i) = q.c.dot(x) + q.d * u[k - 1];
        rows.row(i) = q.c.transpose() * phi;
        x = q.a * x + q.b * u[k - 1];
        phi = q.a * phi;
    }
    Vector rhs(m);
    for (int i = 0; i < m; ++i) rhs(i) = y[k0 + i - 1] - forced(i);
    Vector x0 = rows.bdcSvd(Eigen::ComputeThinU | Eigen::ComputeThinV).solve(rhs);
    const double rms = std::sqrt((rhs - rows * x0).squaredNorm() / std::max(1, m));
    return {x0, rms};
}

}  // namespace

std::vector<Matrix> estimate_alignment(const IoRecord& data, const IdentifyResult& ident,
                                       int n) {
    const int sigma = ident.states.sigma_hat;
    std::vector<Matrix> ps(sigma, Matrix::Identity(n, n));
    if (sigma <= 1) return ps;

    std::vector<Quadruple> canon;
    for (const auto& r : ident.states.representatives) {
        Quadruple q{r.a_hat, r.b_hat, r.c_hat, r.d_hat};
        canon.push_back(to_observability_canonical(q));
    }

    // labelled segments long enough for a state fit
    struct Seg { int t0, t1, cluster; };
    std::vector<Seg> segs;
    for (size_t i = 0; i < ident.partition.segments.size(); ++i) {
        if (!ident.segment_labels[i]) continue;
        const auto [t0, t1] = ident.partition.segments[i];
        if (t1 - t0 >= n + 2) segs.push_back({t0, t1, *ident.segment_labels[i]});
    }

    // boundary pairs: scan the handoff instant; rank them by score margin
    struct PairEq { double margin; Vector w, z; int l, m; };
    std::vector<PairEq> pairs;
    constexpr int kWindow = 40;
    for (size_t i = 0; i + 1 < segs.size(); ++i) {
        const auto& a = segs[i];
        const auto& b = segs[i + 1];
        if (a.cluster == b.cluster) continue;
        if (b.t0 - a.t1 > 2 * n + 2) continue;
        struct Cand { double score; int ks; Vector w, z; };
        std::vector<Cand> cands;
        for (int ks = std::max(a.t1 - n, a.t0 + n + 2);
             ks <= std::min(b.t0 + n, b.t1 - n - 2); ++ks) {
            const int lw0 = std::max(a.t0, ks - kWindow);
            auto [xl, rl] = fit_state_window(canon[a.cluster], data.u, data.y, lw0, ks);
            auto [xr, rr] =
                fit_state_window(canon[b.cluster], data.u, data.y, ks, std::min(b.t1, ks + kWindow));
            Vector w = propagate_state(canon[a.cluster], xl, data.u, lw0, ks);
            cands.push_back({rl + rr, ks, std::move(w), std::move(xr)});
        }
        if (cands.empty()) continue;
        std::sort(cands.begin(), cands.end(),
                  [](const Cand& x, const Cand& y) { return x.score < y.score; });
        const double s1 = cands[0].score;
        const double s2 = cands.size() > 1 ? cands[1].score : std::numeric_limits<double>::infinity();
        const double margin = (s2 - s1) / std::max(s1, 1e-12);
        const double nrm = 0.5 * (cands[0].w.norm() + cands[0].z.norm()) + 1e-12;
        pairs.push_back({margin, cands[0].w / nrm, cands[0].z / nrm, a.cluster, b.cluster});
    }

    // unambiguous boundaries first; extend by margin rank until enough equations
    std::sort(pairs.begin(), pairs.end(),
              [](const PairEq& x, const PairEq& y) { return x.margin > y.margin; });
    const int nun = (sigma - 1) * n * n;
    const int min_pairs = (nun + n - 1) / n + 2;
    std::vector<const PairEq*> used;
    for (const auto& p : pairs)
        if (p.margin >= 0.3 || static_cast<int>(used.size()) < min_pairs) used.push_back(&p);
    if (static_cast<int>(used.size()) * n < nun) return ps;

    auto build = [&](const std::vector<const PairEq*>& sel, Matrix& amat, Vector& bvec) {
        amat = Matrix::Zero(static_cast<int>(sel.size()) * n, nun);
        bvec = Vector::Zero(static_cast<int>(sel.size()) * n);
        for (size_t i = 0; i < sel.size(); ++i) {
            const auto& p = *sel[i];
            for (int r = 0; r < n; ++r) {
                const int row = static_cast<int>(i) * n + r;
                // (P_m z - P_l w)_r = 0; unknowns are rows of P_l, l >= 1
                if (p.m == 0) bvec(row) -= p.z(r);
                else
                    for (int c = 0; c < n; ++c) amat(row, (p.m - 1) * n * n + r * n + c) += p.z(c);
                if (p.l == 0) bvec(row) += p.w(r);
                else
                    for (int c = 0; c < n; ++c) amat(row, (p.l - 1) * n * n + r * n + c) -= p.w(c);
            }
        }
        bvec = -bvec;
    };

    Matrix amat;
    Vector bvec;
    build(used, amat, bvec);
    auto svd0 = numkern::svd_with_rank(amat, 1e-6);
    if (svd0.numerical_rank < nun) return ps;
    Vector sol = amat.bdcSvd(Eigen::ComputeThinU | Eigen::ComputeThinV).solve(bvec);

    // one MAD backstop round against corrupted boundaries
    {
        Vector resid = amat * sol - bvec;
        std::vector<double> pr(used.size());
        for (size_t i = 0; i < used.size(); ++i)
            pr[i] = resid.segment(static_cast<int>(i) * n, n).norm();
        std::vector<double> srt = pr;
        std::nth_element(srt.begin(), srt.begin() + srt.size() / 2, srt.end());
        const double med = srt[srt.size() / 2];
        const double thr = std::max(3.0 * 1.4826 * med, 0.15);
        std::vector<const PairEq*> keep;
        for (size_t i = 0; i < used.size(); ++i)
            if (pr[i] <= thr) keep.push_back(used[i]);
        if (keep.size() < used.size() && static_cast<int>(keep.size()) * n >= nun) {
            Matrix a2;
            Vector b2;
            build(keep, a2, b2);
            auto svd2 = numkern::svd_with_rank(a2, 1e-6);
            if (svd2.numerical_rank == nun)
                sol = a2.bdcSvd(Eigen::ComputeThinU | Eigen::ComputeThinV).solve(b2);
        }
    }

    std::vector<Matrix> cand(sigma, Matrix::Identity(n, n));
    for (int l = 1; l < sigma; ++l) {
        Matrix p(n, n);
        for (int r = 0; r < n; ++r)
            for (int c = 0; c < n; ++c) p(r, c) = sol((l - 1) * n * n + r * n + c);
        if (std::abs(p.determinant()) <= 1e-3) return ps;  // keep identity fallback
        cand[l] = p;
    }
    return cand;
}

std::vector<Quadruple> common_basis_models(const EstimatedStateSet& states,
                                           const std::vector<Matrix>& alignment) {
    std::vector<Quadruple> out;
    for (size_t l = 0; l < states.representatives.size(); ++l) {
        const auto& r = states.representatives[l];
        Quadruple q{r.a_hat, r.b_hat, r.c_hat, r.d_hat};
        Quadruple c = to_observability_canonical(q);
        const double rho = numkern::spectral_radius(c.a);
        if (rho >= 1.0) c.a *= (1.0 - 1e-4) / rho;  // simulation-safe projection
        const Matrix& p = alignment.at(l);
        Matrix pinv = p.partialPivLu().inverse();
        out.push_back({p * c.a * pinv, p * c.b, pinv.transpose() * c.c, c.d});
    }
    return out;
}

Vector fit_initial_state(const std::vector<Quadruple>& quads, const std::vector<int>& labels,
                         const std::vector<double>& u, const std::vector<double>& y,
                         int k0, int k1) {
    const int n = quads.at(0).order();
    const int m = k1 - k0;
    Matrix rows(m, n);
    Vector rhs(m);
    Vector x = Vector::Zero(n);
    Matrix phi = Matrix::Identity(n, n);
    for (int i = 0; i < m; ++i) {
        const int k = k0 + i;
        const Quadruple& q = quads.at(labels.at(k - 1));
        rhs(i) = y[k - 1] - (q.c.dot(x) + q.d * u[k - 1]);
        rows.row(i) = q.c.transpose() * phi;
        x = q.a * x + q.b * u[k - 1];
        phi = q.a * phi;
    }
    return rows.bdcSvd(Eigen::ComputeThinU | Eigen::ComputeThinV).solve(rhs);
}

std::vector<double> predict_outputs(const std::vector<Quadruple>& quads,
                                    const std::vector<int>& labels,
                                    const std::vector<double>& u, const Vector& x0) {
    const int N = static_cast<int>(u.size());
    if (static_cast<int>(labels.size()) < N)
        throw InvalidInputError("predict_outputs: labels shorter than input");
    std::string gaps;
    int gap_count = 0;
    for (int k = 1; k <= N; ++k)
        if (labels[k - 1] < 0 || labels[k - 1] >= static_cast<int>(quads.size())) {
            if (gap_count < 8) gaps += (gap_count ? "," : "") + std::to_string(k);
            ++gap_count;
        }
    if (gap_count > 0)
        throw InvalidInputError("predict_outputs: unlabeled instants [" + gaps +
                                (gap_count > 8 ? ",..." : "") + "]");
    std::vector<double> yp(N);
    Vector x = x0;
    for (int k = 1; k <= N; ++k) {
        const Quadruple& q = quads[labels[k - 1]];
        yp[k - 1] = q.c.dot(x) + q.d * u[k - 1];
        x = q.a * x + q.b * u[k - 1];
    }
    return yp;
}

model::SwitchingSequence sample_covered_switching(const SlsModel& states, const RunConfig& cfg,
                                                  double, model::Rng& rng) {
    model::SwitchingConfig sc;
    sc.sigma = states.sigma;
    sc.horizon = cfg.horizon;
    sc.min_dwell = cfg.min_dwell;
    sc.tail_mean = cfg.dwell_tail_mean;
    sc.first_min = 2 * cfg.n;
    for (int attempt = 0; attempt < 500; ++attempt) {
        auto sw = model::sample_switching(sc, rng);
        if (!cfg.enforce_long_segments) return sw;
        std::vector<int> best(states.sigma, 0);
        for (int i = 0; i < sw.segment_count(); ++i) {
            const int lab = sw.labels[sw.switches[i] - 1];
            best[lab] = std::max(best[lab], sw.dwell(i));
        }
        bool ok = true;
        for (int l = 0; l < states.sigma; ++l)
            if (best[l] < cfg.seg_min + cfg.n) ok = false;
        if (ok) return sw;
    }
    throw ConstraintError("sample_covered_switching: could not cover all states");
}

RunMetrics run_experiment(const SlsModel& truth_states, const RunConfig& cfg, double snr_db,
                          std::uint64_t run_seed) {
    const auto start = std::chrono::steady_clock::now();
    RunMetrics rm;
    const int n = cfg.n;
    Vector x0 = cfg.x0;
    if (x0.size() != n) {
        x0 = Vector::Zero(n);
        x0(0) = 1.0;
    }

    // estimation record
    model::Rng rng(model::Rng::derive(run_seed, 0x5eed));
    SlsModel truth = truth_states;
    truth.n = n;
    truth.switching = sample_covered_switching(truth_states, cfg, snr_db, rng);
    auto tones = model::sample_tones(cfg.harmonics, rng);
    auto u = model::multisine(cfg.horizon, tones);
    IoRecord data = model::simulate(truth, u, x0, snr_db, &rng);

    auto ident = identify(data, n, cfg.hyper, cfg.seg_min, cfg.cluster);
    rm.sigma_hat = ident.states.sigma_hat;
    rm.sigma_ok = rm.sigma_hat == truth.sigma;
    if (!rm.sigma_ok) {
        rm.runtime_seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        return rm;
    }
    rm.delta_r = delta_r(truth, ident.states);

    // switch containment and labelling accuracy against the ground truth
    auto match = match_states(truth, ident.states);
    {
        int hits = 0, total = 0;
        for (int i = 1; i < truth.switching.segment_count(); ++i) {
            const int ki = truth.switching.switches[i];
            ++total;
            for (int t : ident.partition.switch_times)
                if (t >= ki && t <= ki + n) { ++hits; break; }
        }
        rm.switch_hit_rate = total ? static_cast<double>(hits) / total : 1.0;
        int good = 0, labelled = 0, unlabelled = 0, window = 0;
        for (int k = 2 * n + 1; k <= cfg.horizon - 2 * n + 1; ++k) {
            ++window;
            const int est = ident.phi[k - 1];
            if (est < 0) { ++unlabelled; continue; }
            ++labelled;
            if (match[truth.switching.label_at(k)] == est) ++good;
        }
        rm.label_accuracy = labelled ? static_cast<double>(good) / labelled : 0.0;
        rm.unlabeled_fraction = window ? static_cast<double>(unlabelled) / window : 0.0;
    }

    // validation on a fresh record with the estimated states in a common basis
    auto alignment = estimate_alignment(data, ident, n);
    auto common = common_basis_models(ident.states, alignment);

    model::Rng vrng(model::Rng::derive(run_seed, 0x7a11));
    SlsModel vmodel = truth_states;
    vmodel.n = n;
    model::SwitchingConfig vsc{truth.sigma, cfg.horizon, cfg.min_dwell, cfg.dwell_tail_mean,
                               2 * n};
    vmodel.switching = model::sample_switching(vsc, vrng);
    auto vtones = model::sample_tones(cfg.harmonics, vrng);
    auto vu = model::multisine(cfg.horizon, vtones);
    IoRecord vdata = model::simulate(vmodel, vu, x0, snr_db, &vrng);

    std::vector<int> vlabels(cfg.horizon);
    for (int k = 1; k <= cfg.horizon; ++k)
        vlabels[k - 1] = match[vmodel.switching.label_at(k)];
    const int first_end = vmodel.switching.segment_count() > 1
                              ? vmodel.switching.switches[1]
                              : cfg.horizon + 1;
    Vector vx0 = fit_initial_state(common, vlabels, vdata.u, vdata.y, 1,
                                   std::min(first_end, 61));
    auto yp = predict_outputs(common, vlabels, vdata.u, vx0);
    rm.vaf_percent = vaf(vdata.y, yp);
    rm.runtime_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return rm;
}

std::vector<MonteCarloRow> montecarlo(const SlsModel& truth_states, const RunConfig& cfg) {
    std::vector<MonteCarloRow> table;
    const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
    for (double snr : cfg.snr_list) {
        MonteCarloRow row;
        row.snr_db = snr;
        row.runs = cfg.runs;
        row.per_run.resize(cfg.runs);
        std::atomic<int> next{0};
        auto worker = [&]() {
            for (;;) {
                const int r = next.fetch_add(1);
                if (r >= cfg.runs) break;
                const std::uint64_t rs =
                    model::Rng::derive(cfg.seed, static_cast<std::uint64_t>(snr * 1000) * 10007 + r);
                row.per_run[r] = run_experiment(truth_states, cfg, snr, rs);
            }
        };
        std::vector<std::thread> threads;
        for (unsigned t = 0; t + 1 < hw; ++t) threads.emplace_back(worker);
        worker();
        for (auto& t : threads) t.join();

        int ok = 0;
        for (const auto& rm : row.per_run) {
            row.mean_runtime += rm.runtime_seconds;
            if (!rm.sigma_ok) {
                ++row.failures;
                continue;
            }
            ++ok;
            row.mean_delta_r += rm.delta_r;
            row.mean_vaf += rm.vaf_percent;
            row.mean_hit_rate += rm.switch_hit_rate;
        }
        if (ok > 0) {
            row.mean_delta_r /= ok;
            row.mean_vaf /= ok;
            row.mean_hit_rate /= ok;
        }
        row.mean_runtime /= std::max(1, cfg.runs);
        table.push_back(std::move(row));
    }
    return table;
}

}  // namespace slsid::pipeline
