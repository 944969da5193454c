#pragma once

#include <string>

#include "slsid/pipeline.hpp"

namespace slsid::io {

using model::IoRecord;
using model::SlsModel;
using pipeline::IdentifyResult;
using pipeline::RunConfig;

/// Time-series CSV: header `k,u,y`, one row per sample, 17 significant digits.
void write_record_csv(const std::string& path, const IoRecord& rec);
IoRecord read_record_csv(const std::string& path);

/// Ground-truth switching CSV: `k,label` (labels 1-based on disk).
void write_switching_csv(const std::string& path, const model::SwitchingSequence& sw);

/// Labelled switching CSV: `k,label,confidence` (label 0 = unknown).
void write_segments_csv(const std::string& path, const IdentifyResult& ident);

/// Model JSON: n, sigma, states[] (a row-major, b, c, d), switches[] ({k,label}).
void write_model_json(const std::string& path, const SlsModel& m);
SlsModel read_model_json(const std::string& path);

/// Estimated-model JSON: canonical representatives plus cluster report.
void write_estimate_json(const std::string& path, const IdentifyResult& ident);

/// Solution dump CSV: `k,eta_norm,theta_0..theta_{p-1}`.
void write_solution_csv(const std::string& path, const estimator::SolutionPath& sol);

/// Solver diagnostics JSON (iterations, residuals, objective trace).
void write_diagnostics_json(const std::string& path, const IdentifyResult& ident);

/// Theta-trajectory CSV `k,theta_0,...` and gain CSV `k,g_1,...,g_n`.
void write_theta_csv(const std::string& path, const estimator::SolutionPath& sol);
void write_gains_csv(const std::string& path, const SlsModel& m,
                     const std::vector<numkern::Vector>& per_state_gain);

/// Run configuration (JSON file with keys mirroring RunConfig).
RunConfig read_config_json(const std::string& path, SlsModel* model_out);

/// Monte Carlo table CSV.
void write_montecarlo_csv(const std::string& path,
                          const std::vector<pipeline::MonteCarloRow>& table);

}  // namespace slsid::io
