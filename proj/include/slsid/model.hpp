#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "slsid/numkern.hpp"

namespace slsid::model {

using numkern::Matrix;
using numkern::Vector;

/// Deterministic, platform-independent generator (splitmix64 core) so that
/// seeded records reproduce bit-for-bit everywhere.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    /// Uniform in [0, 1).
    double uniform01() { return (next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    /// Integer in [0, m).
    std::uint64_t uniform_int(std::uint64_t m) { return next_u64() % m; }

    /// Standard normal via Box-Muller (cached second variate).
    double gauss();

    /// Derive an independent stream for sub-task `tag`.
    static std::uint64_t derive(std::uint64_t seed, std::uint64_t tag) {
        Rng r(seed ^ (0x6a09e667f3bcc909ULL + tag * 0x9e3779b97f4a7c15ULL));
        return r.next_u64();
    }

  private:
    std::uint64_t state_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

/// One discrete state (A, b, c^T, d).
struct Quadruple {
    Matrix a;
    Vector b;
    Vector c;
    double d = 0.0;

    int order() const { return static_cast<int>(a.rows()); }
};

/// Piecewise-constant state assignment on [1, N].
struct SwitchingSequence {
    std::vector<int> labels;     // labels[k-1] = state index at time k, 0-based states
    std::vector<int> switches;   // k_0 = 1 < k_1 < ... (segment start times)

    int horizon() const { return static_cast<int>(labels.size()); }
    int label_at(int k) const { return labels.at(k - 1); }
    int segment_count() const { return static_cast<int>(switches.size()); }

    /// Dwell time of segment i (last segment extends to N+1).
    int dwell(int i) const {
        int end = (i + 1 < segment_count()) ? switches[i + 1] : horizon() + 1;
        return end - switches[i];
    }
    int min_dwell() const {
        int m = horizon();
        for (int i = 0; i < segment_count(); ++i) m = std::min(m, dwell(i));
        return m;
    }
};

struct SlsModel {
    int n = 0;
    int sigma = 0;
    std::vector<Quadruple> states;
    SwitchingSequence switching;

    const Quadruple& state_at(int k) const { return states.at(switching.label_at(k)); }
};

/// Input-output record; the only data the identification pipeline sees.
struct IoRecord {
    std::vector<double> u;
    std::vector<double> y;
    std::optional<double> snr_db;
    std::optional<std::uint64_t> seed;

    int length() const { return static_cast<int>(u.size()); }
    double u_at(int k) const { return u.at(k - 1); }
    double y_at(int k) const { return y.at(k - 1); }
};

struct SwitchingConfig {
    int sigma = 1;
    int horizon = 0;
    int min_dwell = 1;
    double tail_mean = 150.0;  // geometric tail added to min_dwell
    int first_min = 0;         // extra floor for the first dwell (e.g. 2n)
};

/// Uniform random switching with all dwells >= min_dwell (geometric tails,
/// consecutive labels distinct).
SwitchingSequence sample_switching(const SwitchingConfig& cfg, Rng& rng);

struct Tone {
    double amplitude;
    double frequency;  // rad/sample, in (0, pi)
    double phase;
};

/// Random multi-sine tones: amplitudes U(0, pi) with floor 0.15, frequencies
/// U(0.02 pi, 0.98 pi) with pairwise gaps >= 0.03 pi (re-drawn as a set), phases
/// U(0, 2 pi). The gap and floor keep the advertised PE order effective.
std::vector<Tone> sample_tones(int harmonics, Rng& rng);

std::vector<double> multisine(int horizon, const std::vector<Tone>& tones);

/// Simulate the switched model; optional additive Gaussian output noise at the
/// requested SNR (measured against the clean-output variance).
IoRecord simulate(const SlsModel& model, const std::vector<double>& u, const Vector& x0,
                  std::optional<double> snr_db = std::nullopt, Rng* rng = nullptr);

struct AssumptionCheck {
    std::string name;
    bool pass = false;
    std::string detail;
};

struct AssumptionReport {
    std::vector<AssumptionCheck> checks;
    bool all_pass() const {
        for (const auto& c : checks) if (!c.pass) return false;
        return true;
    }
};

/// Structural checks: per-state stability/minimality, (c, d) distinctness,
/// co-primeness and Hurwitz conditions of the observer polynomials, dwell-time
/// floors, and positive-definiteness of the finite-window Gramians.
AssumptionReport validate_assumptions(const SlsModel& model);

/// Finite-window controllability Gramian sum_{j=k-kappa}^{k-1} Phi(k,j+1) b b^T Phi^T.
Matrix controllability_gramian(const SlsModel& model, int k, int kappa);
/// Finite-window observability Gramian sum_{j=k}^{k+kappa-1} Phi^T(j,k) c c^T Phi(j,k).
Matrix observability_gramian(const SlsModel& model, int k, int kappa);

}  // namespace slsid::model
