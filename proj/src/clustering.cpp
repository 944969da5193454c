#include "slsid/clustering.hpp"

#include <algorithm>
#include <cmath>
#include <deque>

#include "slsid/pipeline.hpp"

namespace slsid::clustering {

using numkern::Matrix;

std::vector<int> dbscan(const std::vector<double>& points, double eps, int min_pts) {
    if (eps <= 0) throw InvalidInputError("dbscan: eps must be positive");
    if (min_pts < 1) throw InvalidInputError("dbscan: min_pts must be >= 1");
    const int m = static_cast<int>(points.size());
    constexpr int kUnvisited = -2;
    std::vector<int> labels(m, kUnvisited);
    auto neighbours = [&](int i) {
        std::vector<int> nb;
        for (int j = 0; j < m; ++j)
            if (std::abs(points[j] - points[i]) <= eps) nb.push_back(j);
        return nb;
    };
    int cid = 0;
    for (int i = 0; i < m; ++i) {
        if (labels[i] != kUnvisited) continue;
        auto nb = neighbours(i);
        if (static_cast<int>(nb.size()) < min_pts) {
            labels[i] = -1;
            continue;
        }
        labels[i] = cid;
        std::deque<int> seeds(nb.begin(), nb.end());
        while (!seeds.empty()) {
            const int j = seeds.front();
            seeds.pop_front();
            if (labels[j] == -1) labels[j] = cid;  // border point
            if (labels[j] != kUnvisited) continue;
            labels[j] = cid;
            auto nb2 = neighbours(j);
            if (static_cast<int>(nb2.size()) >= min_pts)
                for (int q : nb2)
                    if (labels[q] == kUnvisited || labels[q] == -1) seeds.push_back(q);
        }
        ++cid;
    }
    return labels;
}

namespace {

double segment_fit_rms(const estimator::MeasurementSystem& sys, const SolutionPath& path,
                       int t0, int t1) {
    // trimmed rows [t0+n, t1-n) in original time
    const int n = sys.n;
    int lo = t0 + n, hi = t1 - n;
    if (hi - lo < n + 1) { lo = t0; hi = t1; }
    double acc = 0.0;
    int cnt = 0;
    for (int t = std::max(lo, 2 * n + 1); t < std::min(hi, 2 * n + 1 + sys.block_count); ++t) {
        const int k = sys.block_of_time(t);  // 1-based block
        const double r = sys.y(k - 1) - sys.z.row(k - 1).dot(path.mu.row(k));
        acc += r * r;
        ++cnt;
    }
    return cnt > 0 ? std::sqrt(acc / cnt) : 0.0;
}

double canonical_distance(const RealizationEstimate& x, const RealizationEstimate& y) {
    using pipeline::canonical_map;
    Matrix mx = canonical_map(x.a_hat, x.b_hat, x.c_hat, x.d_hat);
    Matrix my = canonical_map(y.a_hat, y.b_hat, y.c_hat, y.d_hat);
    return (mx - my).norm() / std::max(std::max(mx.norm(), my.norm()), 1e-300);
}

}  // namespace

EstimatedStateSet cluster_segments(const estimator::MeasurementSystem& sys,
                                   const SolutionPath& path, const SegmentPartition& partition,
                                   int seg_min, const ClusterConfig& cfg) {
    const int n = sys.n;
    EstimatedStateSet out;

    // realize every long segment; screen leaked switches by fit residual
    std::vector<int> long_ids;
    std::vector<double> rms;
    for (size_t i = 0; i < partition.segments.size(); ++i) {
        const auto [t0, t1] = partition.segments[i];
        if (t1 - t0 < seg_min) continue;
        long_ids.push_back(static_cast<int>(i));
        rms.push_back(segment_fit_rms(sys, path, t0, t1));
    }
    if (long_ids.empty()) {
        int longest = 0;
        for (const auto& [t0, t1] : partition.segments) longest = std::max(longest, t1 - t0);
        throw ConstraintError("cluster_segments: no segment reaches seg_min=" +
                              std::to_string(seg_min) + " (longest " +
                              std::to_string(longest) + ")");
    }
    std::vector<double> rms_sorted = rms;
    std::nth_element(rms_sorted.begin(), rms_sorted.begin() + rms_sorted.size() / 2,
                     rms_sorted.end());
    const double rms_med = rms_sorted[rms_sorted.size() / 2];

    for (size_t q = 0; q < long_ids.size(); ++q) {
        if (rms[q] > std::max(cfg.residual_screen * rms_med, 1e-12)) continue;
        const int i = long_ids[q];
        const Vector& th = partition.theta[i];
        auto mk = conversion::markov_from_theta(th.head(2 * n + 1), n, 4 * n);
        try {
            FeaturePoint fp;
            fp.segment_id = i;
            fp.realization = conversion::realize(mk.h, n, cfg.realize_rank_tol);
            fp.statistic = fp.realization.statistic;
            out.features.push_back(std::move(fp));
        } catch (const OrderMismatchError&) {
            // degenerate segment; leave it for the short-segment labeller
        }
    }
    if (out.features.empty())
        throw ConstraintError("cluster_segments: no long segment produced a realization");

    std::vector<double> stats;
    for (const auto& f : out.features) stats.push_back(f.statistic);
    const auto [mn, mx] = std::minmax_element(stats.begin(), stats.end());
    const double spread = *mx - *mn;
    out.members = dbscan(stats, std::max(cfg.eps_rel * spread, 1e-9), cfg.min_pts);
    for (size_t i = 0; i < out.members.size(); ++i)
        if (out.members[i] < 0) out.noise_points.push_back(static_cast<int>(i));
    int ncl = 0;
    for (int l : out.members) ncl = std::max(ncl, l + 1);

    // medoid per cluster (member with statistic closest to the cluster mean)
    auto medoid = [&](int c) {
        double mean = 0.0;
        int cnt = 0;
        for (size_t i = 0; i < stats.size(); ++i)
            if (out.members[i] == c) { mean += stats[i]; ++cnt; }
        mean /= std::max(1, cnt);
        int best = -1;
        for (size_t i = 0; i < stats.size(); ++i)
            if (out.members[i] == c &&
                (best < 0 || std::abs(stats[i] - mean) < std::abs(stats[best] - mean)))
                best = static_cast<int>(i);
        return best;
    };

    // merge clusters that are the same system in canonical coordinates
    bool merged = true;
    while (merged && ncl > 1) {
        merged = false;
        std::vector<int> meds(ncl);
        for (int c = 0; c < ncl; ++c) meds[c] = medoid(c);
        double bestd = cfg.merge_tol;
        int ba = -1, bb = -1;
        for (int a = 0; a < ncl; ++a)
            for (int b = a + 1; b < ncl; ++b) {
                const double d = canonical_distance(out.features[meds[a]].realization,
                                                    out.features[meds[b]].realization);
                if (d < bestd) { bestd = d; ba = a; bb = b; }
            }
        if (ba >= 0) {
            for (auto& l : out.members) {
                if (l == bb) l = ba;
                else if (l > bb) --l;
            }
            --ncl;
            merged = true;
        }
    }
    out.sigma_hat = ncl;

    // pooled fit per cluster over the members' trimmed rows
    std::vector<int> act = path.active_coords;
    for (int c = 0; c < ncl; ++c) {
        std::vector<int> rows;
        for (size_t i = 0; i < out.features.size(); ++i) {
            if (out.members[i] != c) continue;
            const auto [t0, t1] = partition.segments[out.features[i].segment_id];
            int lo = t0, hi = t1;
            if (hi - lo > 3 * n) { lo += n; hi -= n; }
            for (int t = std::max(lo, 2 * n + 1);
                 t < std::min(hi, 2 * n + 1 + sys.block_count); ++t)
                rows.push_back(sys.block_of_time(t));
        }
        Matrix zr(rows.size(), sys.block_dim);
        Vector yr(rows.size());
        for (size_t r = 0; r < rows.size(); ++r) {
            zr.row(r) = sys.z.row(rows[r] - 1);
            yr(r) = sys.y(rows[r] - 1);
        }
        Vector th = estimator::bcls(zr, yr, act, sys.block_dim);
        auto mk = conversion::markov_from_theta(th.head(2 * n + 1), n, 4 * n);
        RealizationEstimate rep;
        try {
            rep = conversion::realize(mk.h, n, cfg.realize_rank_tol);
        } catch (const OrderMismatchError&) {
            rep = out.features[medoid(c)].realization;  // pooled fit degenerate
        }
        out.representatives.push_back(rep);
        out.rep_statistics.push_back(rep.statistic);
    }

    // intra-cluster statistic dispersion (median over clusters of max member gap)
    std::vector<double> disp;
    for (int c = 0; c < ncl; ++c) {
        double d = 0.0;
        for (size_t i = 0; i < stats.size(); ++i)
            if (out.members[i] == c) d = std::max(d, std::abs(stats[i] - out.rep_statistics[c]));
        disp.push_back(d);
    }
    std::nth_element(disp.begin(), disp.begin() + disp.size() / 2, disp.end());
    out.cluster_dispersion = disp[disp.size() / 2];
    return out;
}

EstimatedStateSet estimate_state_set(const IoRecord& data, int n, const HyperParams& hyper,
                                     int seg_min, const ClusterConfig& cfg,
                                     SolutionPath* path_out,
                                     SegmentPartition* partition_out) {
    auto sys = estimator::assemble(data, n, 2 * n);
    auto path = estimator::solve_bbpdn(sys, hyper);
    auto partition = estimator::detect_segments(path, hyper.zero_tol_rel);
    auto states = cluster_segments(sys, path, partition, seg_min, cfg);
    if (path_out) *path_out = std::move(path);
    if (partition_out) *partition_out = std::move(partition);
    return states;
}

}  // namespace slsid::clustering
