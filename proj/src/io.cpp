#include "slsid/io.hpp"

#include <fstream>
#include <iomanip>
#include <sstream>

#include <json.hpp>

namespace slsid::io {

using nlohmann::json;

namespace {

std::ofstream open_out(const std::string& path) {
    std::ofstream f(path);
    if (!f) throw InvalidInputError("cannot open for writing: " + path);
    f << std::setprecision(17);
    return f;
}

std::ifstream open_in(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw InvalidInputError("cannot open: " + path);
    return f;
}

json quadruple_to_json(const model::Quadruple& q) {
    json s;
    s["a"] = std::vector<double>(q.a.data(), q.a.data() + q.a.size());
    // Eigen stores column-major; emit row-major per the documented format
    std::vector<double> arm;
    for (int i = 0; i < q.a.rows(); ++i)
        for (int j = 0; j < q.a.cols(); ++j) arm.push_back(q.a(i, j));
    s["a"] = arm;
    s["b"] = std::vector<double>(q.b.data(), q.b.data() + q.b.size());
    s["c"] = std::vector<double>(q.c.data(), q.c.data() + q.c.size());
    s["d"] = q.d;
    return s;
}

model::Quadruple quadruple_from_json(const json& s, int n) {
    model::Quadruple q;
    q.a.resize(n, n);
    auto arm = s.at("a").get<std::vector<double>>();
    if (static_cast<int>(arm.size()) != n * n)
        throw InvalidInputError("model json: bad A size");
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) q.a(i, j) = arm[i * n + j];
    auto bv = s.at("b").get<std::vector<double>>();
    auto cv = s.at("c").get<std::vector<double>>();
    if (static_cast<int>(bv.size()) != n || static_cast<int>(cv.size()) != n)
        throw InvalidInputError("model json: bad b/c size");
    q.b = Eigen::Map<numkern::Vector>(bv.data(), n);
    q.c = Eigen::Map<numkern::Vector>(cv.data(), n);
    q.d = s.at("d").get<double>();
    return q;
}

}  // namespace

void write_record_csv(const std::string& path, const IoRecord& rec) {
    auto f = open_out(path);
    f << "k,u,y\n";
    for (int k = 1; k <= rec.length(); ++k)
        f << k << "," << rec.u_at(k) << "," << rec.y_at(k) << "\n";
}

IoRecord read_record_csv(const std::string& path) {
    auto f = open_in(path);
    IoRecord rec;
    std::string line;
    if (!std::getline(f, line)) throw InvalidInputError("empty csv: " + path);
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        std::istringstream ss(line);
        std::string cell;
        std::getline(ss, cell, ',');  // k
        std::getline(ss, cell, ',');
        rec.u.push_back(std::stod(cell));
        std::getline(ss, cell, ',');
        rec.y.push_back(std::stod(cell));
    }
    return rec;
}

void write_switching_csv(const std::string& path, const model::SwitchingSequence& sw) {
    auto f = open_out(path);
    f << "k,label\n";
    for (int k = 1; k <= sw.horizon(); ++k) f << k << "," << sw.label_at(k) + 1 << "\n";
}

void write_segments_csv(const std::string& path, const IdentifyResult& ident) {
    auto f = open_out(path);
    f << "k,label,confidence\n";
    for (int k = 1; k <= ident.horizon; ++k) {
        const int lab = ident.phi[k - 1];
        f << k << "," << (lab < 0 ? 0 : lab + 1) << "," << (lab < 0 ? 0.0 : 1.0) << "\n";
    }
}

void write_model_json(const std::string& path, const SlsModel& m) {
    json j;
    j["n"] = m.n;
    j["sigma"] = m.sigma;
    j["states"] = json::array();
    for (const auto& q : m.states) j["states"].push_back(quadruple_to_json(q));
    j["switches"] = json::array();
    for (int i = 0; i < m.switching.segment_count(); ++i) {
        json s;
        s["k"] = m.switching.switches[i];
        s["label"] = m.switching.labels[m.switching.switches[i] - 1] + 1;
        j["switches"].push_back(s);
    }
    if (m.switching.horizon() > 0) j["horizon"] = m.switching.horizon();
    auto f = open_out(path);
    f << j.dump(2) << "\n";
}

SlsModel read_model_json(const std::string& path) {
    auto f = open_in(path);
    json j;
    f >> j;
    SlsModel m;
    m.n = j.at("n").get<int>();
    m.sigma = j.at("sigma").get<int>();
    for (const auto& s : j.at("states")) m.states.push_back(quadruple_from_json(s, m.n));
    if (j.contains("switches") && j.contains("horizon")) {
        const int N = j["horizon"].get<int>();
        std::vector<std::pair<int, int>> sw;
        for (const auto& s : j["switches"])
            sw.emplace_back(s.at("k").get<int>(), s.at("label").get<int>() - 1);
        m.switching.labels.assign(N, 0);
        for (size_t i = 0; i < sw.size(); ++i) {
            m.switching.switches.push_back(sw[i].first);
            const int end = i + 1 < sw.size() ? sw[i + 1].first : N + 1;
            for (int k = sw[i].first; k < end && k <= N; ++k)
                m.switching.labels[k - 1] = sw[i].second;
        }
    }
    return m;
}

void write_estimate_json(const std::string& path, const IdentifyResult& ident) {
    json j;
    j["sigma_hat"] = ident.states.sigma_hat;
    j["clusters"] = json::array();
    for (int c = 0; c < ident.states.sigma_hat; ++c) {
        json cl;
        const auto& r = ident.states.representatives[c];
        model::Quadruple q{r.a_hat, r.b_hat, r.c_hat, r.d_hat};
        cl["representative"] = quadruple_to_json(pipeline::to_observability_canonical(q));
        cl["statistic"] = ident.states.rep_statistics[c];
        cl["members"] = json::array();
        for (size_t i = 0; i < ident.states.features.size(); ++i)
            if (ident.states.members[i] == c) {
                const auto [t0, t1] =
                    ident.partition.segments[ident.states.features[i].segment_id];
                cl["members"].push_back({{"t0", t0}, {"t1", t1},
                                         {"statistic", ident.states.features[i].statistic}});
            }
        j["clusters"].push_back(cl);
    }
    j["switches"] = ident.partition.switch_times;
    auto f = open_out(path);
    f << j.dump(2) << "\n";
}

void write_solution_csv(const std::string& path, const estimator::SolutionPath& sol) {
    auto f = open_out(path);
    const int p = static_cast<int>(sol.mu.cols());
    f << "k,eta_norm";
    for (int c = 0; c < p; ++c) f << ",theta_" << c;
    f << "\n";
    for (int k = 1; k < sol.mu.rows(); ++k) {
        f << 2 * sol.n + k << "," << sol.eta.row(k - 1).norm();
        for (int c = 0; c < p; ++c) f << "," << sol.mu(k, c);
        f << "\n";
    }
}

void write_diagnostics_json(const std::string& path, const IdentifyResult& ident) {
    json j;
    const auto& d = ident.path.diagnostics;
    j["iterations"] = d.iterations;
    j["converged"] = d.converged;
    j["primal_residual"] = d.primal_residual;
    j["dual_residual"] = d.dual_residual;
    j["objective_entry"] = d.objective_entry;
    j["objective_exit"] = d.objective_exit;
    j["rho_final"] = d.rho_final;
    j["pe_window_empirical"] = ident.pe_window_empirical;
    j["runtime_seconds"] = ident.runtime_seconds;
    j["detected_switches"] = ident.partition.switch_times;
    auto f = open_out(path);
    f << j.dump(2) << "\n";
}

void write_theta_csv(const std::string& path, const estimator::SolutionPath& sol) {
    write_solution_csv(path, sol);
}

void write_gains_csv(const std::string& path, const SlsModel& m,
                     const std::vector<numkern::Vector>& per_state_gain) {
    auto f = open_out(path);
    const int n = m.n;
    f << "k";
    for (int i = 1; i <= n; ++i) f << ",g_" << i;
    f << "\n";
    for (int k = 1; k <= m.switching.horizon(); ++k) {
        const auto& g = per_state_gain.at(m.switching.label_at(k));
        f << k;
        for (int i = 0; i < n; ++i) f << "," << g(i);
        f << "\n";
    }
}

RunConfig read_config_json(const std::string& path, SlsModel* model_out) {
    auto f = open_in(path);
    json j;
    f >> j;
    RunConfig cfg;
    if (j.contains("n")) cfg.n = j["n"].get<int>();
    if (j.contains("horizon")) cfg.horizon = j["horizon"].get<int>();
    if (j.contains("min_dwell")) cfg.min_dwell = j["min_dwell"].get<int>();
    if (j.contains("dwell_tail_mean")) cfg.dwell_tail_mean = j["dwell_tail_mean"].get<double>();
    if (j.contains("harmonics")) cfg.harmonics = j["harmonics"].get<int>();
    if (j.contains("seg_min")) cfg.seg_min = j["seg_min"].get<int>();
    if (j.contains("seed")) cfg.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("snr_list")) cfg.snr_list = j["snr_list"].get<std::vector<double>>();
    if (j.contains("runs")) cfg.runs = j["runs"].get<int>();
    if (j.contains("enforce_long_segments"))
        cfg.enforce_long_segments = j["enforce_long_segments"].get<bool>();
    if (j.contains("hyper")) {
        const auto& h = j["hyper"];
        if (h.contains("lambda")) cfg.hyper.lambda = h["lambda"].get<double>();
        if (h.contains("gamma1")) cfg.hyper.gamma1 = h["gamma1"].get<double>();
        if (h.contains("gamma2")) cfg.hyper.gamma2 = h["gamma2"].get<double>();
        if (h.contains("alpha")) cfg.hyper.alpha = h["alpha"].get<double>();
        if (h.contains("t_max")) cfg.hyper.t_max = h["t_max"].get<int>();
        if (h.contains("epsilon")) cfg.hyper.epsilon = h["epsilon"].get<double>();
        if (h.contains("zero_tol_rel")) cfg.hyper.zero_tol_rel = h["zero_tol_rel"].get<double>();
        if (h.contains("admm_max_iter")) cfg.hyper.admm_max_iter = h["admm_max_iter"].get<int>();
        if (h.contains("admm_tol")) cfg.hyper.admm_tol = h["admm_tol"].get<double>();
    }
    if (j.contains("cluster")) {
        const auto& c = j["cluster"];
        if (c.contains("eps_rel")) cfg.cluster.eps_rel = c["eps_rel"].get<double>();
        if (c.contains("min_pts")) cfg.cluster.min_pts = c["min_pts"].get<int>();
        if (c.contains("merge_tol")) cfg.cluster.merge_tol = c["merge_tol"].get<double>();
        if (c.contains("residual_screen"))
            cfg.cluster.residual_screen = c["residual_screen"].get<double>();
    }
    if (model_out && j.contains("model")) {
        SlsModel m;
        m.n = j["model"].at("n").get<int>();
        m.sigma = j["model"].at("sigma").get<int>();
        for (const auto& s : j["model"].at("states"))
            m.states.push_back(quadruple_from_json(s, m.n));
        *model_out = std::move(m);
        cfg.n = model_out->n;
    }
    return cfg;
}

void write_montecarlo_csv(const std::string& path,
                          const std::vector<pipeline::MonteCarloRow>& table) {
    auto f = open_out(path);
    f << "snr_db,runs,failures,mean_delta_r,mean_vaf,mean_hit_rate,mean_runtime_s\n";
    for (const auto& row : table)
        f << row.snr_db << "," << row.runs << "," << row.failures << "," << row.mean_delta_r
          << "," << row.mean_vaf << "," << row.mean_hit_rate << "," << row.mean_runtime << "\n";
}

}  // namespace slsid::io
