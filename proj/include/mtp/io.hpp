#pragma once

// CSV and JSON emission.
//
// Trajectory CSV: header t,s,v_s,theta,v_theta[,u_1..u_m][,l_s,l_vs,l_th,l_vth].
// Numbers use the shortest round-trip representation. The control fields of
// the last node are empty (controls live on intervals).

#include "json.hpp"

#include "mtp/nco.hpp"
#include "mtp/ocp.hpp"
#include "mtp/trim.hpp"
#include "mtp/turnpike.hpp"

#include <string>

namespace mtp {

using Json = nlohmann::json;

std::string format_double(double v);

std::string trajectory_to_csv(const Trajectory& traj);
/// Throws Error(parse) on malformed input.
Trajectory trajectory_from_csv(const std::string& text);

void write_text(const std::string& path, const std::string& text);
std::string read_text(const std::string& path);

/// {model, horizon, intervals, cost, x0, terminal, bounds}; custom costs and
/// general terminal constraints are not representable and throw.
Json spec_to_json(const OcpSpec& spec);
/// Accepts "model": "kepler" or {"preset": "kepler", "k": ..., "m2": ...}.
/// "warm_start" may name a trajectory CSV file.
OcpSpec spec_from_json(const Json& j);

Json state_to_json(const State& x);
State state_from_json(const Json& j);

Json solution_summary(const OcpSolution& sol);
Json tocp_summary(const TocpSolution& sol);
Json trim_to_json(const TrimPoint& tp);
Json sop_to_json(const SopSolution& sol);
Json nco_to_json(const NcoResidualReport& report);
Json turnpike_to_json(const TurnpikeReport& report);
Json scan_to_json(const TurnpikeScan& scan);
/// T,dwell,epsilon,objective
std::string scan_to_csv(const TurnpikeScan& scan);
Json certificate_to_json(const DissipativityCertificate& cert);
Json probe_to_json(const CostControllabilityProbe& probe);

}  // namespace mtp
