#include "mtp/turnpike.hpp"

#include "mtp/error.hpp"
#include "mtp/presets.hpp"
#include "mtp/trim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace mtp {

namespace {

const Control& node_control(const Trajectory& traj, std::size_t i) {
  return traj.controls[std::min(i, traj.controls.size() - 1)];
}

Control u_ref_of(const StageCost& cost, int m) {
  if (const auto* q = std::get_if<QuadraticCost>(&cost)) return q->u_ref;
  if (const auto* t = std::get_if<TrimPenaltyCost>(&cost)) return t->u_ref;
  return Control::Zero(m);
}

}  // namespace

DistanceFn trim_state_distance(double s_ref, double v_ref) {
  return [s_ref, v_ref](const State& x, const Control&) {
    return std::sqrt((x.s - s_ref) * (x.s - s_ref) + x.v_s * x.v_s + (x.v_th - v_ref) * (x.v_th - v_ref));
  };
}

DistanceFn trim_residual_distance(const MechModel& model, double w) {
  return [model, w](const State& x, const Control& u) { return combined_residual(model, x, u, w); };
}

TurnpikeReport dwell_measure(const Trajectory& traj, const DistanceFn& distance, double epsilon) {
  if (traj.size() == 0) throw Error(ErrorCode::invalid_argument, "dwell_measure: empty trajectory");
  if (!(epsilon > 0.0)) throw Error(ErrorCode::invalid_argument, "dwell_measure: epsilon must be positive");
  if (traj.controls.empty() && traj.size() > 1) {
    throw Error(ErrorCode::invalid_argument, "dwell_measure: trajectory without controls");
  }
  TurnpikeReport r;
  r.epsilon = epsilon;
  r.horizon = traj.times.back() - traj.times.front();
  if (traj.size() < 2) return r;

  std::vector<double> d(traj.size());
  for (std::size_t i = 0; i < traj.size(); ++i) d[i] = distance(traj.states[i], node_control(traj, i));

  auto add = [&r](double a, double b) {
    if (b <= a) return;
    if (!r.excursions.empty() && std::abs(r.excursions.back().second - a) < 1e-12) {
      r.excursions.back().second = b;
    } else {
      r.excursions.emplace_back(a, b);
    }
  };
  for (std::size_t i = 0; i + 1 < traj.size(); ++i) {
    const double t0 = traj.times[i], t1 = traj.times[i + 1];
    const double d0 = d[i], d1 = d[i + 1];
    const bool up0 = d0 > epsilon, up1 = d1 > epsilon;
    if (up0 && up1) {
      add(t0, t1);
    } else if (up0 != up1) {
      const double tc = t0 + (epsilon - d0) / (d1 - d0) * (t1 - t0);
      if (up0) {
        add(t0, tc);
      } else {
        add(tc, t1);
      }
    }
  }
  for (const auto& [a, b] : r.excursions) r.dwell_measure += b - a;
  r.bound_estimate = r.dwell_measure;
  return r;
}

TurnpikeScan turnpike_scan(const OcpSpec& base, const std::vector<double>& horizons, const DistanceFn& distance,
                           double epsilon, const OcpOptions& opts, double max_ratio, double max_growth) {
  if (horizons.empty()) throw Error(ErrorCode::invalid_argument, "turnpike_scan: no horizons");
  TurnpikeScan scan;
  for (double t : horizons) {
    const OcpSpec spec = with_horizon(base, t);
    OcpSolution sol;
    try {
      sol = solve_ocp(spec, opts);
    } catch (const std::exception& e) {
      scan.error = "T = " + std::to_string(t) + ": " + e.what();
      break;
    }
    if (sol.status != NlpStatus::converged) {
      scan.error = "T = " + std::to_string(t) + ": solver status " + to_string(sol.status);
      break;
    }
    scan.horizons.push_back(t);
    scan.objectives.push_back(sol.objective);
    scan.statuses.push_back(sol.status);
    scan.reports.push_back(dwell_measure(sol.trajectory, distance, epsilon));
    scan.trajectories.push_back(std::move(sol.trajectory));
  }
  if (scan.reports.empty()) return scan;

  double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
  for (const auto& r : scan.reports) {
    lo = std::min(lo, r.dwell_measure);
    hi = std::max(hi, r.dwell_measure);
  }
  for (auto& r : scan.reports) r.bound_estimate = hi;
  if (hi <= 1e-12) {
    scan.ratio = 1.0;
  } else {
    scan.ratio = lo > 0.0 ? hi / lo : std::numeric_limits<double>::infinity();
  }
  bool increasing = scan.reports.size() > 1;
  for (std::size_t i = 1; i < scan.reports.size(); ++i) {
    if (!(scan.reports[i].dwell_measure > scan.reports[i - 1].dwell_measure)) increasing = false;
  }
  const double first = scan.reports.front().dwell_measure;
  if (increasing) {
    scan.growth = first > 0.0 ? scan.reports.back().dwell_measure / first - 1.0 : std::numeric_limits<double>::infinity();
  }
  scan.bounded = scan.error.empty() && scan.ratio <= max_ratio && scan.growth <= max_growth;
  return scan;
}

CostedTrajectory with_costs(const MechModel& model, const StageCost& cost, const Trajectory& traj) {
  return {traj, stage_costs(model, cost, traj)};
}

DissipativityCertificate dissipativity_margin(const std::vector<CostedTrajectory>& trajs, const DistanceFn& distance,
                                              double c, double s0, double tol) {
  DissipativityCertificate cert;
  cert.c = c;
  cert.storage = s0;
  cert.tol = tol;
  cert.worst_margin = s0;
  for (const auto& ct : trajs) {
    const Trajectory& tr = ct.traj;
    if (ct.stage_costs.size() != tr.controls.size()) {
      throw Error(ErrorCode::invalid_argument, "dissipativity_margin: one stage cost per interval required");
    }
    cert.horizons.push_back(tr.times.back() - tr.times.front());
    double acc = s0;
    for (std::size_t i = 0; i < tr.controls.size(); ++i) {
      const double h = tr.times[i + 1] - tr.times[i];
      const double dist = distance(tr.states[i], tr.controls[i]);
      acc += h * (ct.stage_costs[i] - c * dist * dist);
      if (acc < cert.worst_margin) {
        cert.worst_margin = acc;
        cert.worst_time = tr.times[i + 1];
      }
    }
  }
  cert.valid = cert.worst_margin >= -tol;
  return cert;
}

FitResult fit_max_c(const std::vector<CostedTrajectory>& trajs, const DistanceFn& distance, double s0, double tol) {
  FitResult fit;
  auto margin_at = [&](double c) { return dissipativity_margin(trajs, distance, c, s0, tol); };
  DissipativityCertificate lo_cert = margin_at(0.0);
  if (!lo_cert.valid) {
    fit.certificate = lo_cert;
    return fit;
  }
  double lo = 0.0, hi = 1.0;
  while (margin_at(hi).valid) {
    lo = hi;
    hi *= 2.0;
    if (hi > 1e15) {
      fit.unbounded = true;
      fit.certificate = margin_at(lo);
      return fit;
    }
  }
  while (hi - lo > 1e-6 * hi) {
    const double mid = 0.5 * (lo + hi);
    if (margin_at(mid).valid) {
      lo = mid;
    } else {
      hi = mid;
    }
    ++fit.bisections;
  }
  fit.certificate = margin_at(lo);
  return fit;
}

double dwell_bound(const DissipativityCertificate& cert, double max_total_cost, double epsilon) {
  if (!(cert.c > 0.0) || !(epsilon > 0.0)) return std::numeric_limits<double>::infinity();
  return (cert.storage + max_total_cost) / (cert.c * epsilon * epsilon);
}

double min_stage_cost(const MechModel& model, const StageCost& cost, const State& x, const ControlBounds& bounds) {
  const int m = model.control_dim;
  NlpProblem p;
  p.n = m;
  p.objective = [&](const Vec& u) { return stage_cost(model, cost, x, u); };
  p.gradient = [&](const Vec& u) { return Vec(stage_cost_gradient(model, cost, x, u).du); };
  if (bounds.lower.size() || bounds.upper.size()) {
    p.lower = bounds.lower.size() ? bounds.lower : Vec::Constant(m, -std::numeric_limits<double>::infinity());
    p.upper = bounds.upper.size() ? bounds.upper : Vec::Constant(m, std::numeric_limits<double>::infinity());
  }
  SqpOptions o;
  o.tol = 1e-12;
  o.max_iter = 500;
  Vec u0 = u_ref_of(cost, m);
  if (p.lower.size()) u0 = u0.cwiseMax(p.lower).cwiseMin(p.upper);
  const NlpSolution sol = solve_sqp(p, u0, o);
  return std::min(sol.objective, stage_cost(model, cost, x, u0));
}

CostControllabilityProbe cost_controllability_probe(const OcpSpec& base, const std::vector<State>& x0_list,
                                                   const std::vector<double>& horizons, const OcpOptions& opts,
                                                   double zero_tol) {
  CostControllabilityProbe probe;
  probe.horizons = horizons;
  std::sort(probe.horizons.begin(), probe.horizons.end());
  double running = 0.0;
  for (double t : probe.horizons) {
    double at_t = 0.0;
    for (const State& x0 : x0_list) {
      OcpSpec spec = with_horizon(base, t);
      spec.x0 = x0;
      ProbeRow row;
      row.x0 = x0;
      row.horizon = t;
      row.l_star = min_stage_cost(base.model, base.cost, x0, base.bounds);
      const OcpSolution sol = solve_ocp(spec, opts);
      row.status = sol.status;
      row.value = sol.objective;
      if (row.l_star <= zero_tol) {
        row.ratio = std::numeric_limits<double>::quiet_NaN();
        row.flag = "ratio undefined: on cost zero-set";
      } else {
        row.ratio = row.value / row.l_star;
        at_t = std::max(at_t, row.ratio);
      }
      probe.rows.push_back(row);
    }
    running = std::max(running, at_t);
    probe.bound.push_back(running);
  }
  return probe;
}

double average_cost(const MechModel& model, const StageCost& cost, const Trajectory& traj) {
  if (traj.size() < 2) throw Error(ErrorCode::invalid_argument, "average_cost: degenerate horizon");
  const double horizon = traj.times.back() - traj.times.front();
  if (!(horizon > 0.0)) throw Error(ErrorCode::invalid_argument, "average_cost: degenerate horizon");
  const std::vector<double> l = stage_costs(model, cost, traj);
  double sum = 0.0;
  for (std::size_t i = 0; i < l.size(); ++i) sum += l[i] * (traj.times[i + 1] - traj.times[i]);
  return sum / horizon;
}

}  // namespace mtp
