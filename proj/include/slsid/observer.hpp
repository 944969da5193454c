#pragma once

#include <optional>
#include <utility>
#include <vector>

#include "slsid/model.hpp"

namespace slsid::observer {

using model::IoRecord;
using model::Quadruple;
using model::SlsModel;
using numkern::Matrix;
using numkern::Vector;
using Eigen::RowVector2d;

/// Deadbeat observer realization of one discrete state:
/// A_o = A + g c^T, B_o = [b + g d, -g].
struct ObserverRealization {
    Matrix a_o;
    Matrix b_o;   // n x 2
    Vector gain;
};

ObserverRealization observer_realization(const Quadruple& q, const Vector& gain);

/// Per-state deadbeat gains, expanded through the switching sequence:
/// g(k) = g_{phi(k)}.
struct GainSchedule {
    std::vector<Vector> per_state;
    const SlsModel* model = nullptr;

    const Vector& at(int k) const { return per_state.at(model->switching.label_at(k)); }
};

/// Build the Lemma-style schedule. Requires every (A_l, c_l^T) observable and
/// the dwell conditions min dwell >= n, first dwell >= 2n.
GainSchedule build_gain_schedule(const SlsModel& model);

/// Observer Markov parameters of an LTI state: index v = 0..depth,
/// h_o(0) = [d, 0], h_o(v) = c^T A_o^{v-1} B_o.
std::vector<RowVector2d> observer_markov_lti(const Quadruple& q, const Vector& gain, int depth);

/// Time-varying observer Markov parameters h_o(k, k-v), v = 0..depth, with
/// matrices selected by the switching sequence and the schedule.
std::vector<RowVector2d> observer_markov(const SlsModel& model, const GainSchedule& schedule,
                                         int k, int depth);

/// || A_o(k-1) ... A_o(k-tau) ||_F; tau = 0 gives ||I_n||_F.
double transition_norm(const SlsModel& model, const GainSchedule& schedule, int k, int tau);

/// Regressor z(k) = (u(k), u(k-1), y(k-1), ..., u(k-tau), y(k-tau)).
Vector regressor(const IoRecord& data, int k, int depth);

/// True parameter vector theta(k) = (d(k), h_o(k,k-1), ..., h_o(k,k-tau)).
Vector theta_of(const SlsModel& model, const GainSchedule& schedule, int k, int depth);

/// z(k) plus, when the true model is supplied, theta(k).
std::pair<Vector, std::optional<Vector>> regressor_and_theta(
    const IoRecord& data, const SlsModel* model, const GainSchedule* schedule,
    int k, int depth);

}  // namespace slsid::observer
