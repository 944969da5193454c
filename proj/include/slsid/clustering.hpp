#pragma once

#include <vector>

#include "slsid/conversion.hpp"
#include "slsid/estimator.hpp"

namespace slsid::clustering {

using conversion::RealizationEstimate;
using estimator::HyperParams;
using estimator::SegmentPartition;
using estimator::SolutionPath;
using model::IoRecord;
using numkern::Vector;

/// One realized long segment entering the clustering stage.
struct FeaturePoint {
    int segment_id = 0;       // index into the detected partition
    double statistic = 0.0;   // l1 eigenvalue norm
    RealizationEstimate realization;
};

struct ClusterConfig {
    double eps_rel = 0.05;    // dbscan radius, relative to the statistic spread
    int min_pts = 1;          // dbscan core-point threshold for the pipeline
    double merge_tol = 0.25;  // canonical-form relative distance below which
                              // clusters are the same discrete state
    double realize_rank_tol = numkern::kDefaultRankTol;
    double residual_screen = 3.0;  // exclude segments with fit rms above this
                                   // multiple of the median (switch leakage)
};

struct EstimatedStateSet {
    int sigma_hat = 0;
    std::vector<RealizationEstimate> representatives;  // one per cluster
    std::vector<double> rep_statistics;
    std::vector<int> members;       // feature index -> cluster
    std::vector<int> noise_points;  // feature indices labelled noise
    std::vector<FeaturePoint> features;
    double cluster_dispersion = 0.0;  // median intra-cluster statistic spread
};

/// Density-based clustering of 1-D statistic values. Deterministic given input
/// order; ties resolved by lowest index. Returns labels (cluster id or -1).
std::vector<int> dbscan(const std::vector<double>& points, double eps, int min_pts);

/// Long-segment realization + clustering (the discrete-state recovery stage).
/// `path`/`partition` come from the block-sparse solve; segments of length
/// >= seg_min are realized (statistic = l1 eigenvalue norm), screened against
/// leaked switches by their fit residual, clustered by dbscan, merged when
/// canonically identical, and each cluster refit by a pooled least squares
/// over its members' rows.
EstimatedStateSet cluster_segments(const estimator::MeasurementSystem& sys,
                                   const SolutionPath& path, const SegmentPartition& partition,
                                   int seg_min, const ClusterConfig& cfg);

/// Full Algorithm-3 style pass: solve_bbpdn -> detect_segments ->
/// cluster_segments. Errors when no segment reaches seg_min.
EstimatedStateSet estimate_state_set(const IoRecord& data, int n, const HyperParams& hyper,
                                     int seg_min, const ClusterConfig& cfg,
                                     SolutionPath* path_out = nullptr,
                                     SegmentPartition* partition_out = nullptr);

}  // namespace slsid::clustering
