#pragma once

#include <optional>

#include "slsid/clustering.hpp"

namespace slsid::moesp {

using clustering::EstimatedStateSet;
using model::IoRecord;
using numkern::Matrix;
using numkern::Vector;

/// Block-Hankel input/output pair over a segment [t0, t1) with `rows` block
/// rows: entry (a, b) = sample at t0 + a + b.
struct SegmentData {
    Matrix u_hankel;
    Matrix y_hankel;
    int rows = 0;  // theta (block-row count)
};

SegmentData build_hankels(const IoRecord& data, int t0, int t1, int rows);

struct SegmentLabel {
    std::optional<int> state;     // cluster index, or empty when unlabelled
    double matched_statistic = 0.0;
    double margin = 0.0;          // distance gap to the second-best candidate
    bool low_confidence = false;
};

/// MOESP labelling (LQ of the stacked Hankels, SVD of L22, shifted-row A
/// estimate, nearest candidate by statistic). Requires length >= theta + n
/// with theta = 2n+1; rank shortfalls flag the label low-confidence.
SegmentLabel label_segment_moesp(const IoRecord& data, int t0, int t1, int n,
                                 const EstimatedStateSet& states);

/// Residual variant: for each candidate l, Xi(l) = Y - Psi_l U with Psi_l the
/// lower-triangular Toeplitz of the candidate's Markov parameters; label by the
/// statistic of the realization of Xi(l). Works from length 2n.
SegmentLabel label_segment_residual(const IoRecord& data, int t0, int t1, int n,
                                    const EstimatedStateSet& states);

/// Lower-triangular Toeplitz of Markov parameters (d, c^T b, c^T A b, ...).
Matrix markov_toeplitz(const conversion::RealizationEstimate& state, int rows);

/// Confidence threshold for matching: 3x the median intra-cluster statistic
/// dispersion, floored to cover noiseless arithmetic.
double confidence_threshold(const EstimatedStateSet& states);

}  // namespace slsid::moesp
