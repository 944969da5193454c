#pragma once

// Shared test fixtures: the three-state second-order switched model used by
// the end-to-end experiments, plus small textbook pairs.

#include "slsid/model.hpp"

namespace fixtures {

using slsid::model::Quadruple;
using slsid::model::SlsModel;
using slsid::numkern::Matrix;
using slsid::numkern::Vector;

inline Quadruple make_quad(std::initializer_list<double> a_rowmajor,
                           std::initializer_list<double> b,
                           std::initializer_list<double> c, double d) {
    const int n = static_cast<int>(b.size());
    Quadruple q;
    q.a.resize(n, n);
    auto it = a_rowmajor.begin();
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) q.a(i, j) = *it++;
    q.b.resize(n);
    q.c.resize(n);
    auto ib = b.begin();
    auto ic = c.begin();
    for (int i = 0; i < n; ++i) {
        q.b(i) = *ib++;
        q.c(i) = *ic++;
    }
    q.d = d;
    return q;
}

/// Three stable second-order states with complex eigenvalue pairs of moduli
/// sqrt(0.9), sqrt(0.4), sqrt(0.5).
inline SlsModel three_state_model() {
    SlsModel m;
    m.n = 2;
    m.sigma = 3;
    m.states.push_back(make_quad({0, -1, 0.9, 0.6}, {0.4, -1}, {-1, -2}, 0.5));
    m.states.push_back(make_quad({0.6, 1, -1, -1}, {0.5, 1}, {-1, 2}, -1.5));
    m.states.push_back(make_quad({-1, -2, 1, 1.5}, {3, 1}, {0.9, -1}, 2.5));
    return m;
}

/// Minimal second-order state whose deadbeat gain is [-1/8, 1/8]^T.
inline Quadruple gain_eighth_state() {
    return make_quad({0.5, 0, 1, -0.5}, {1, 2}, {1, 1}, 1.0);
}

/// Pair with deadbeat gain [-1, 0]^T.
inline Quadruple companion_pair() { return make_quad({1, 1, 0, 0}, {0, 1}, {1, 2}, 0.0); }

/// Nilpotent pair with zero deadbeat gain.
inline Quadruple nilpotent_pair() { return make_quad({0, 1, 0, 0}, {0, 1}, {1, 1}, 0.0); }

inline SlsModel lti_model(const Quadruple& q, int horizon) {
    SlsModel m;
    m.n = q.order();
    m.sigma = 1;
    m.states.push_back(q);
    m.switching.labels.assign(horizon, 0);
    m.switching.switches = {1};
    return m;
}

}  // namespace fixtures
