#include "slsid/observer.hpp"

#include <cmath>

namespace slsid::observer {

ObserverRealization observer_realization(const Quadruple& q, const Vector& gain) {
    ObserverRealization o;
    o.a_o = q.a + gain * q.c.transpose();
    o.b_o.resize(q.order(), 2);
    o.b_o.col(0) = q.b + gain * q.d;
    o.b_o.col(1) = -gain;
    o.gain = gain;
    return o;
}

GainSchedule build_gain_schedule(const SlsModel& model) {
    const int n = model.n;
    if (model.switching.horizon() > 0) {
        if (model.switching.min_dwell() < n)
            throw ConstraintError("build_gain_schedule: min dwell < n");
        if (model.switching.dwell(0) < 2 * n)
            throw ConstraintError("build_gain_schedule: first dwell < 2n");
    }
    GainSchedule sched;
    sched.model = &model;
    sched.per_state.reserve(model.sigma);
    for (int l = 0; l < model.sigma; ++l) {
        try {
            sched.per_state.push_back(numkern::place_deadbeat(model.states[l].a, model.states[l].c));
        } catch (const ObservabilityError&) {
            throw ObservabilityError(
                "build_gain_schedule: state " + std::to_string(l + 1) + " unobservable", l);
        }
    }
    return sched;
}

std::vector<RowVector2d> observer_markov_lti(const Quadruple& q, const Vector& gain, int depth) {
    ObserverRealization o = observer_realization(q, gain);
    std::vector<RowVector2d> h(depth + 1);
    h[0] << q.d, 0.0;
    numkern::RowVector w = q.c.transpose();
    for (int v = 1; v <= depth; ++v) {
        h[v] = w * o.b_o;
        w = w * o.a_o;
    }
    return h;
}

std::vector<RowVector2d> observer_markov(const SlsModel& model, const GainSchedule& schedule,
                                         int k, int depth) {
    if (k - depth < 1 || k > model.switching.horizon())
        throw RangeError("observer_markov: window leaves the record");
    std::vector<RowVector2d> h(depth + 1);
    const Quadruple& qk = model.state_at(k);
    h[0] << qk.d, 0.0;
    // w accumulates c^T(k) A_o(k-1) ... A_o(k-v+1)
    numkern::RowVector w = qk.c.transpose();
    for (int v = 1; v <= depth; ++v) {
        ObserverRealization oj = observer_realization(model.state_at(k - v), schedule.at(k - v));
        h[v] = w * oj.b_o;
        if (v < depth) w = w * oj.a_o;
    }
    return h;
}

double transition_norm(const SlsModel& model, const GainSchedule& schedule, int k, int tau) {
    if (k - tau < 1 || k > model.switching.horizon() + 1)
        throw RangeError("transition_norm: window leaves the record");
    const int n = model.n;
    Matrix phi = Matrix::Identity(n, n);
    for (int j = k - 1; j >= k - tau; --j) {
        const Quadruple& q = model.state_at(j);
        phi = phi * (q.a + schedule.at(j) * q.c.transpose());
    }
    return phi.norm();
}

Vector regressor(const IoRecord& data, int k, int depth) {
    if (k - depth < 1 || k > data.length())
        throw RangeError("regressor: window leaves the record");
    Vector z(2 * depth + 1);
    z(0) = data.u_at(k);
    for (int v = 1; v <= depth; ++v) {
        z(2 * v - 1) = data.u_at(k - v);
        z(2 * v) = data.y_at(k - v);
    }
    return z;
}

Vector theta_of(const SlsModel& model, const GainSchedule& schedule, int k, int depth) {
    auto h = observer_markov(model, schedule, k, depth);
    Vector th(2 * depth + 1);
    th(0) = h[0](0);
    for (int v = 1; v <= depth; ++v) {
        th(2 * v - 1) = h[v](0);
        th(2 * v) = h[v](1);
    }
    return th;
}

std::pair<Vector, std::optional<Vector>> regressor_and_theta(
    const IoRecord& data, const SlsModel* model, const GainSchedule* schedule,
    int k, int depth) {
    Vector z = regressor(data, k, depth);
    std::optional<Vector> th;
    if (model && schedule) th = theta_of(*model, *schedule, k, depth);
    return {z, th};
}

}  // namespace slsid::observer
