#pragma once

// Manifold turnpike diagnostics: time outside an epsilon tube, strict
// dissipativity with alpha(r) = c r^2 and constant storage, cost
// controllability and average cost.

#include "mtp/ocp.hpp"

#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace mtp {

/// Distance of (x, u) to the turnpike set. u is the control acting from the node on.
using DistanceFn = std::function<double(const State&, const Control&)>;

/// Euclidean distance of (s - s_ref, v_s, v_th - v_ref).
DistanceFn trim_state_distance(double s_ref, double v_ref);
/// sqrt(v_s^2 + w T(s, v_th, u)^2).
DistanceFn trim_residual_distance(const MechModel& model, double w = 1.0);

struct TurnpikeReport {
  double epsilon = 0.0;
  double dwell_measure = 0.0;  // time outside the tube
  std::vector<std::pair<double, double>> excursions;
  double horizon = 0.0;
  double bound_estimate = 0.0;  // max dwell over a sweep
};

/// Distance interpolated linearly between nodes; crossings by linear inversion.
TurnpikeReport dwell_measure(const Trajectory& traj, const DistanceFn& distance, double epsilon);

struct TurnpikeScan {
  std::vector<TurnpikeReport> reports;
  std::vector<double> horizons;
  std::vector<double> objectives;
  std::vector<NlpStatus> statuses;
  std::vector<Trajectory> trajectories;
  double ratio = 1.0;       // max / min dwell
  double growth = 0.0;      // last / first - 1 when dwell increases monotonically, else 0
  bool bounded = false;
  std::string error;        // set when a solve failed; reports are partial
};

/// Solves the spec for every horizon (intervals scaled proportionally).
/// bounded: ratio <= max_ratio and no monotone growth above max_growth.
TurnpikeScan turnpike_scan(const OcpSpec& base, const std::vector<double>& horizons, const DistanceFn& distance,
                           double epsilon, const OcpOptions& opts = {}, double max_ratio = 1.5,
                           double max_growth = 0.2);

/// Optimal trajectory with l(x_i, u_i) per interval.
struct CostedTrajectory {
  Trajectory traj;
  std::vector<double> stage_costs;
};

CostedTrajectory with_costs(const MechModel& model, const StageCost& cost, const Trajectory& traj);

struct DissipativityCertificate {
  double c = 0.0;             // alpha(r) = c r^2
  double storage = 0.0;       // S = s0
  double worst_margin = 0.0;  // min over prefixes of sum h (l - c dist^2) + s0
  double worst_time = 0.0;
  std::vector<double> horizons;
  double tol = 1e-6;
  bool valid = false;
};

DissipativityCertificate dissipativity_margin(const std::vector<CostedTrajectory>& trajs, const DistanceFn& distance,
                                              double c, double s0, double tol = 1e-6);

struct FitResult {
  DissipativityCertificate certificate;  // at the fitted c
  int bisections = 0;
  bool unbounded = false;  // dist vanishes: every c tested was valid
};

/// Largest c with worst margin >= -tol, bracketed to 1e-6 relative.
FitResult fit_max_c(const std::vector<CostedTrajectory>& trajs, const DistanceFn& distance, double s0,
                    double tol = 1e-6);

/// (c1 + c2) / alpha(epsilon) with c1 = s0 and c2 the largest total cost.
double dwell_bound(const DissipativityCertificate& cert, double max_total_cost, double epsilon);

struct ProbeRow {
  State x0;
  double horizon = 0.0;
  double value = 0.0;       // V_T(x0)
  double l_star = 0.0;      // min_u l(x0, u)
  double ratio = 0.0;       // V_T / l_star
  NlpStatus status = NlpStatus::max_iter;
  std::string flag;         // non-empty when the ratio is undefined
};

struct CostControllabilityProbe {
  std::vector<ProbeRow> rows;
  std::vector<double> horizons;  // sorted
  std::vector<double> bound;     // running max of the ratios over horizons
};

/// min_u l(x, u) on the control space (respecting bounds).
double min_stage_cost(const MechModel& model, const StageCost& cost, const State& x, const ControlBounds& bounds = {});

CostControllabilityProbe cost_controllability_probe(const OcpSpec& base, const std::vector<State>& x0_list,
                                                   const std::vector<double>& horizons, const OcpOptions& opts = {},
                                                   double zero_tol = 1e-12);

/// (1/T) sum_i l(x_i, u_i) h.
double average_cost(const MechModel& model, const StageCost& cost, const Trajectory& traj);

}  // namespace mtp
