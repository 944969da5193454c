#include "slsid/model.hpp"

#include <algorithm>
#include <cmath>

#include "slsid/observer.hpp"

namespace slsid::model {

double Rng::gauss() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    double u1, u2, s;
    do {
        u1 = 2.0 * uniform01() - 1.0;
        u2 = 2.0 * uniform01() - 1.0;
        s = u1 * u1 + u2 * u2;
    } while (s >= 1.0 || s == 0.0);
    const double f = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = u2 * f;
    has_spare_ = true;
    return u1 * f;
}

SwitchingSequence sample_switching(const SwitchingConfig& cfg, Rng& rng) {
    if (cfg.min_dwell < 1) throw InvalidInputError("sample_switching: min_dwell < 1");
    if (cfg.horizon < 2 * cfg.min_dwell)
        throw ConstraintError("sample_switching: horizon shorter than 2*min_dwell");
    if (cfg.sigma < 1) throw InvalidInputError("sample_switching: sigma < 1");

    SwitchingSequence seq;
    seq.labels.reserve(cfg.horizon);
    if (cfg.sigma == 1) {
        seq.labels.assign(cfg.horizon, 0);
        seq.switches = {1};
        return seq;
    }
    const double p = 1.0 / std::max(cfg.tail_mean, 1.0);
    int t = 1;
    int label = static_cast<int>(rng.uniform_int(cfg.sigma));
    bool first = true;
    seq.switches.push_back(1);
    while (t <= cfg.horizon) {
        // geometric tail: number of failures before first success
        int tail = 0;
        if (cfg.tail_mean > 1.0) {
            const double u = std::max(rng.uniform01(), 1e-300);
            tail = static_cast<int>(std::floor(std::log(u) / std::log(1.0 - p)));
        }
        int len = cfg.min_dwell + tail;
        if (first) len = std::max(len, std::max(cfg.min_dwell, cfg.first_min));
        first = false;
        for (int i = 0; i < len && t <= cfg.horizon; ++i, ++t) seq.labels.push_back(label);
        if (t <= cfg.horizon) {
            seq.switches.push_back(t);
            if (cfg.sigma > 1) {
                int nxt = static_cast<int>(rng.uniform_int(cfg.sigma - 1));
                label = nxt < label ? nxt : nxt + 1;
            }
        }
    }
    return seq;
}

std::vector<Tone> sample_tones(int harmonics, Rng& rng) {
    if (harmonics < 1) throw InvalidInputError("sample_tones: harmonics < 1");
    const double pi = std::acos(-1.0);
    std::vector<Tone> tones(harmonics);
    for (;;) {
        for (auto& t : tones) {
            t.amplitude = rng.uniform(0.0, pi);
            t.frequency = rng.uniform(0.02 * pi, 0.98 * pi);
            t.phase = rng.uniform(0.0, 2.0 * pi);
        }
        double amin = pi, gap = pi;
        std::vector<double> fs;
        for (const auto& t : tones) {
            amin = std::min(amin, t.amplitude);
            fs.push_back(t.frequency);
        }
        std::sort(fs.begin(), fs.end());
        for (size_t i = 1; i < fs.size(); ++i) gap = std::min(gap, fs[i] - fs[i - 1]);
        if (amin >= 0.15 && (harmonics < 2 || gap >= 0.03 * pi)) break;
    }
    return tones;
}

std::vector<double> multisine(int horizon, const std::vector<Tone>& tones) {
    std::vector<double> u(horizon, 0.0);
    for (int k = 1; k <= horizon; ++k)
        for (const auto& t : tones)
            u[k - 1] += t.amplitude * std::sin(t.frequency * k + t.phase);
    return u;
}

IoRecord simulate(const SlsModel& model, const std::vector<double>& u, const Vector& x0,
                  std::optional<double> snr_db, Rng* rng) {
    const int N = static_cast<int>(u.size());
    if (N < 1) throw InvalidInputError("simulate: empty input");
    if (model.switching.horizon() < N)
        throw InvalidInputError("simulate: switching shorter than input");
    if (x0.size() != model.n) throw InvalidInputError("simulate: x0 dimension mismatch");
    for (const auto& s : model.states)
        if (s.order() != model.n || s.b.size() != model.n || s.c.size() != model.n)
            throw InvalidInputError("simulate: state dimension mismatch");

    IoRecord rec;
    rec.u = u;
    rec.y.resize(N);
    Vector x = x0;
    for (int k = 1; k <= N; ++k) {
        const Quadruple& q = model.state_at(k);
        rec.y[k - 1] = q.c.dot(x) + q.d * u[k - 1];
        x = q.a * x + q.b * u[k - 1];
    }
    if (snr_db) {
        if (!rng) throw InvalidInputError("simulate: noise requested without generator");
        double mean = 0.0, var = 0.0;
        for (double v : rec.y) mean += v;
        mean /= N;
        for (double v : rec.y) var += (v - mean) * (v - mean);
        var /= N;
        const double sd = std::sqrt(var / std::pow(10.0, *snr_db / 10.0));
        for (auto& v : rec.y) v += sd * rng->gauss();
        rec.snr_db = snr_db;
    }
    return rec;
}

Matrix controllability_gramian(const SlsModel& model, int k, int kappa) {
    const int n = model.n;
    Matrix g = Matrix::Zero(n, n);
    // Phi(k, j+1) b(j), accumulated right-to-left
    for (int j = k - kappa; j <= k - 1; ++j) {
        Vector v = model.state_at(j).b;
        for (int t = j + 1; t <= k - 1; ++t) v = model.state_at(t).a * v;
        g += v * v.transpose();
    }
    return g;
}

Matrix observability_gramian(const SlsModel& model, int k, int kappa) {
    const int n = model.n;
    Matrix g = Matrix::Zero(n, n);
    for (int j = k; j <= k + kappa - 1; ++j) {
        numkern::RowVector w = model.states.at(model.switching.label_at(j)).c.transpose();
        for (int t = j - 1; t >= k; --t) w = w * model.state_at(t).a;
        g += w.transpose() * w;
    }
    return g;
}

namespace {

std::string state_tag(int idx) { return "state " + std::to_string(idx + 1); }

}  // namespace

AssumptionReport validate_assumptions(const SlsModel& model) {
    AssumptionReport rep;
    const int n = model.n;
    const double hurwitz_edge = 1.0 - 1e-10;

    // (i) stability and minimality per state
    for (int l = 0; l < model.sigma; ++l) {
        const auto& q = model.states[l];
        const double rho = numkern::spectral_radius(q.a);
        rep.checks.push_back({state_tag(l) + " stable",
                              rho < hurwitz_edge,
                              "spectral radius " + std::to_string(rho)});
        const auto obs = numkern::svd_with_rank(numkern::observability_matrix(q.a, q.c));
        rep.checks.push_back({state_tag(l) + " observable", obs.numerical_rank == n,
                              "rank " + std::to_string(obs.numerical_rank)});
        const auto ctr = numkern::svd_with_rank(numkern::controllability_matrix(q.a, q.b));
        rep.checks.push_back({state_tag(l) + " controllable", ctr.numerical_rank == n,
                              "rank " + std::to_string(ctr.numerical_rank)});
    }

    // (ii) distinctness of (c, d) or c alone across states
    {
        bool cd_distinct = true, c_distinct = true;
        for (int i = 0; i < model.sigma; ++i)
            for (int j = i + 1; j < model.sigma; ++j) {
                const auto& A = model.states[i];
                const auto& B = model.states[j];
                const double scale = std::max(A.c.norm() + std::abs(A.d),
                                              B.c.norm() + std::abs(B.d)) + 1e-300;
                const double dc = (A.c - B.c).norm();
                const double dd = std::abs(A.d - B.d);
                if ((dc + dd) / scale <= 1e-10) cd_distinct = false;
                if (dc / scale <= 1e-10) c_distinct = false;
            }
        rep.checks.push_back({"(c,d) pairs distinct across states", cd_distinct, ""});
        rep.checks.push_back({"c vectors distinct across states", c_distinct, ""});
    }

    // (iii) per-state co-primeness of z^n Ho1 and z^n (1 - Ho2); latter Hurwitz
    for (int l = 0; l < model.sigma; ++l) {
        const auto& q = model.states[l];
        try {
            Vector g = numkern::place_deadbeat(q.a, q.c);
            auto ho = observer::observer_markov_lti(q, g, n);
            Vector p1(n + 1), p2(n + 1);
            p1(0) = q.d;
            p2(0) = 1.0;
            for (int v = 1; v <= n; ++v) {
                p1(v) = ho[v](0);
                p2(v) = -ho[v](1);
            }
            const double res = numkern::resultant(p1, p2);
            const double nrm = std::pow(p1.norm() + 1e-300, n) * std::pow(p2.norm() + 1e-300, n);
            rep.checks.push_back({state_tag(l) + " observer polynomials co-prime",
                                  std::abs(res) / nrm > 1e-8,
                                  "normalized resultant " + std::to_string(std::abs(res) / nrm)});
            double rmax = 0.0;
            for (const auto& r : numkern::poly_roots(p2)) rmax = std::max(rmax, std::abs(r));
            rep.checks.push_back({state_tag(l) + " z^n(1-Ho2) Hurwitz", rmax < hurwitz_edge,
                                  "max root modulus " + std::to_string(rmax)});
        } catch (const Error& e) {
            rep.checks.push_back({state_tag(l) + " observer polynomials co-prime", false, e.what()});
        }
    }

    // (iv) dwell-time conditions
    if (model.switching.horizon() > 0) {
        const int dmin = model.switching.min_dwell();
        const int d0 = model.switching.dwell(0);
        rep.checks.push_back({"min dwell >= n", dmin >= n, "min dwell " + std::to_string(dmin)});
        rep.checks.push_back({"first dwell >= 2n", d0 >= 2 * n, "first dwell " + std::to_string(d0)});

        // (v) Gramian positivity over sampled interior instants
        const int N = model.switching.horizon();
        bool gc_ok = true, go_ok = true;
        const int stride = std::max(1, (N - 4 * n) / 64);
        for (int k = 2 * n + 1; k + 2 * n - 1 <= N; k += stride) {
            Eigen::SelfAdjointEigenSolver<Matrix> gc(controllability_gramian(model, k, 2 * n));
            Eigen::SelfAdjointEigenSolver<Matrix> go(observability_gramian(model, k, 2 * n));
            if (gc.eigenvalues().minCoeff() <= 0) gc_ok = false;
            if (go.eigenvalues().minCoeff() <= 0) go_ok = false;
        }
        rep.checks.push_back({"controllability Gramian G_c(k,2n) > 0 on samples", gc_ok, ""});
        rep.checks.push_back({"observability Gramian G_o(k,2n) > 0 on samples", go_ok, ""});
    }
    return rep;
}

}  // namespace slsid::model
