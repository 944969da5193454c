#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "slsid/clustering.hpp"
#include "slsid/moesp.hpp"

namespace slsid::pipeline {

using clustering::ClusterConfig;
using clustering::EstimatedStateSet;
using estimator::HyperParams;
using estimator::SegmentPartition;
using estimator::SolutionPath;
using model::IoRecord;
using model::Quadruple;
using model::SlsModel;
using numkern::Matrix;
using numkern::Vector;

/// Observability canonical form: T built from the observability matrix of
/// (A, c) so that c maps to e_1 and A to companion-like form. Unique for
/// observable SISO realizations, which makes it the similarity-free
/// representation used by the metrics.
Quadruple to_observability_canonical(const Quadruple& q);

/// Stacked system map [A b; c^T d] of the canonicalized quadruple.
Matrix canonical_map(const Matrix& a, const Vector& b, const Vector& c, double d);

/// Variance-accounted-for prediction score, max{1 - var(y - yhat)/var(y), 0} x 100.
double vaf(const std::vector<double>& y_true, const std::vector<double>& y_pred);

/// Greedy statistic-based matching of true states to estimated clusters.
/// Returns match[true_index] = cluster.
std::vector<int> match_states(const SlsModel& truth, const EstimatedStateSet& estimate);

/// Summed relative Frobenius error of the stacked maps in canonical form.
double delta_r(const SlsModel& truth, const EstimatedStateSet& estimate);

struct RunConfig {
    int n = 2;
    int horizon = 2000;
    int min_dwell = 26;
    double dwell_tail_mean = 150.0;
    int harmonics = 5;
    int seg_min = 150;
    std::uint64_t seed = 1;
    std::vector<double> snr_list{40.0, 30.0, 20.0};
    int runs = 20;
    HyperParams hyper;
    ClusterConfig cluster;
    Vector x0;  // defaults to e_1 when empty
    bool enforce_long_segments = true;  // resample switching until every state
                                        // owns a segment >= seg_min + n
};

struct IdentifyResult {
    EstimatedStateSet states;
    SegmentPartition partition;
    SolutionPath path;
    std::vector<std::optional<int>> segment_labels;  // per partition segment
    std::vector<int> phi;  // phi[k-1] = cluster at time k, -1 unknown
    int horizon = 0;
    double runtime_seconds = 0.0;
    double pe_window_empirical = 0.0;  // measured PE window (diagnostics)
};

/// Full identification: block-sparse estimation, clustering of long segments,
/// and short-segment labelling (subspace method first, residual variant as
/// fallback, very short segments left unlabelled).
IdentifyResult identify(const IoRecord& data, int n, const HyperParams& hyper,
                        int seg_min, const ClusterConfig& cluster_cfg);

/// Inter-state basis alignment estimated from the identified record: boundary
/// state handoffs give linear constraints P_m z = P_l w on the per-cluster
/// canonical bases (reference cluster 0). Boundaries whose handoff instant is
/// ambiguous are used only when cleaner ones are insufficient.
std::vector<Matrix> estimate_alignment(const IoRecord& data, const IdentifyResult& ident,
                                       int n);

/// Canonical + aligned + stability-projected quadruples, one per cluster,
/// expressed in the common basis. Simulation-safe.
std::vector<Quadruple> common_basis_models(const EstimatedStateSet& states,
                                           const std::vector<Matrix>& alignment);

/// Least-squares initial state over [k0, k1) for the switched model `quads`
/// with per-instant labels (1-based times).
Vector fit_initial_state(const std::vector<Quadruple>& quads, const std::vector<int>& labels,
                         const std::vector<double>& u, const std::vector<double>& y,
                         int k0, int k1);

/// Simulate the labelled estimated model over `u`. Throws with the offending
/// instants when any label is missing.
std::vector<double> predict_outputs(const std::vector<Quadruple>& quads,
                                    const std::vector<int>& labels,
                                    const std::vector<double>& u, const Vector& x0);

struct RunMetrics {
    bool sigma_ok = false;
    int sigma_hat = 0;
    double delta_r = 0.0;
    double vaf_percent = 0.0;
    double switch_hit_rate = 0.0;
    double label_accuracy = 0.0;
    double unlabeled_fraction = 0.0;
    double runtime_seconds = 0.0;
};

struct MonteCarloRow {
    double snr_db = 0.0;
    int runs = 0;
    int failures = 0;
    double mean_delta_r = 0.0;
    double mean_vaf = 0.0;
    double mean_hit_rate = 0.0;
    double mean_runtime = 0.0;
    std::vector<RunMetrics> per_run;
};

/// One seeded end-to-end experiment against a known truth: estimation record,
/// identification, matching, delta_r, and validation VAF on a fresh record.
RunMetrics run_experiment(const SlsModel& truth_states, const RunConfig& cfg,
                          double snr_db, std::uint64_t run_seed);

/// Reproduces the averaged study: per-SNR means over seeded runs, executed
/// concurrently with a deterministic ordered reduction.
std::vector<MonteCarloRow> montecarlo(const SlsModel& truth_states, const RunConfig& cfg);

/// Switching sample satisfying the long-segment coverage the clustering stage
/// assumes (every state active in a segment of dwell >= seg_min + n).
model::SwitchingSequence sample_covered_switching(const SlsModel& states, const RunConfig& cfg,
                                                  double, model::Rng& rng);

}  // namespace slsid::pipeline
