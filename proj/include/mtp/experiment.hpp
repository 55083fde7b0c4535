#pragma once

// Experiment configuration and the analyses behind the command line.
// Every run_* function writes its artifacts below out_dir and returns a JSON
// summary of what it did.

#include "mtp/io.hpp"

#include <optional>
#include <string>
#include <vector>

namespace mtp {

struct ScanConfig {
  std::vector<double> horizons;  // empty: T, 2T, 3T
  double epsilon = 0.1;
};

struct DissipativityConfig {
  std::vector<double> horizons;  // empty: 0.3 T, T
  double w = 1.0;                // weight of the trim residual in the distance
  double storage = 0.0;
};

struct ExperimentConfig {
  std::string preset = "kepler-fig1";  // kepler-fig1, kepler-fig2 or custom
  std::optional<Json> spec;            // full spec for custom, otherwise a merge patch
  std::string out_dir = "out";
  std::optional<double> horizon;
  std::optional<double> tol;
  std::optional<int> max_iter;
  bool nco_check = false;
  bool tocp = false;
  bool sop = false;
  std::optional<ScanConfig> turnpike_scan;
  std::optional<DissipativityConfig> dissipativity;
  TimeWindow nco_window;
  std::optional<TrimRequest> trim;
};

/// Keys: preset, spec, out, horizon, tol, max_iter, nco_window [from, to],
/// analysis {nco_check, tocp, sop, turnpike_scan {horizons, epsilon},
/// dissipativity {horizons, w, storage}}, trim {unknown, s, v_theta, u, control_index, guess}.
ExperimentConfig config_from_json(const Json& j);

OcpSpec resolve_spec(const ExperimentConfig& cfg);
OcpOptions resolve_options(const ExperimentConfig& cfg);

/// Distance used by the turnpike analyses: the tracked orbit for quadratic
/// costs, sqrt(v_s^2 + T^2) otherwise.
DistanceFn default_distance(const OcpSpec& spec);

Json run_solve(const ExperimentConfig& cfg);          // trajectory.csv, summary.json
Json run_trim(const ExperimentConfig& cfg);           // trim.json
Json run_sop(const ExperimentConfig& cfg);            // sop.json
Json run_nco_check(const ExperimentConfig& cfg);      // nco_report.json [, tocp_trajectory.csv]
Json run_turnpike_scan(const ExperimentConfig& cfg);  // turnpike.csv, turnpike.json
Json run_dissipativity(const ExperimentConfig& cfg);  // dissipativity.json

struct RunOutcome {
  int exit_code = 0;  // 0 when the main solve converged
  Json summary;
};

/// Solve plus the enabled analyses.
RunOutcome run(const ExperimentConfig& cfg);

}  // namespace mtp
