#include "mtp/experiment.hpp"

#include "mtp/error.hpp"
#include "mtp/presets.hpp"

#include <cmath>
#include <filesystem>

namespace mtp {

namespace fs = std::filesystem;

namespace {

std::string out_path(const ExperimentConfig& cfg, const std::string& name) {
  std::error_code ec;
  fs::create_directories(cfg.out_dir, ec);
  if (ec) throw Error(ErrorCode::io, "cannot create output directory '" + cfg.out_dir + "': " + ec.message());
  return (fs::path(cfg.out_dir) / name).string();
}

void write_json(const ExperimentConfig& cfg, const std::string& name, const Json& j) {
  write_text(out_path(cfg, name), j.dump(2) + "\n");
}

TrimUnknown unknown_from(const std::string& s) {
  if (s == "shape" || s == "s") return TrimUnknown::shape;
  if (s == "cyclic_velocity" || s == "v_theta") return TrimUnknown::cyclic_velocity;
  if (s == "control" || s == "u") return TrimUnknown::control;
  throw Error(ErrorCode::parse, "trim.unknown must be shape, cyclic_velocity or control");
}

Control cost_u_ref(const StageCost& cost, int m) {
  if (const auto* q = std::get_if<QuadraticCost>(&cost)) return q->u_ref;
  if (const auto* t = std::get_if<TrimPenaltyCost>(&cost)) return t->u_ref;
  return Control::Zero(m);
}

std::vector<double> doubles(const Json& j) { return j.get<std::vector<double>>(); }

}  // namespace

ExperimentConfig config_from_json(const Json& j) {
  try {
    if (!j.is_object()) throw Error(ErrorCode::parse, "config: expected a JSON object");
    ExperimentConfig cfg;
    cfg.preset = j.value("preset", cfg.preset);
    if (j.contains("spec")) cfg.spec = j["spec"];
    cfg.out_dir = j.value("out", cfg.out_dir);
    if (j.contains("horizon")) cfg.horizon = j["horizon"].get<double>();
    if (j.contains("tol")) cfg.tol = j["tol"].get<double>();
    if (j.contains("max_iter")) cfg.max_iter = j["max_iter"].get<int>();
    if (j.contains("nco_window")) {
      const auto w = doubles(j["nco_window"]);
      if (w.size() != 2) throw Error(ErrorCode::parse, "nco_window: expected [from, to]");
      cfg.nco_window = {w[0], w[1]};
    }
    if (j.contains("analysis")) {
      const Json& a = j["analysis"];
      cfg.nco_check = a.value("nco_check", false);
      cfg.tocp = a.value("tocp", false);
      cfg.sop = a.value("sop", false);
      if (a.contains("turnpike_scan") && !a["turnpike_scan"].is_boolean()) {
        ScanConfig sc;
        if (a["turnpike_scan"].contains("horizons")) sc.horizons = doubles(a["turnpike_scan"]["horizons"]);
        sc.epsilon = a["turnpike_scan"].value("epsilon", sc.epsilon);
        cfg.turnpike_scan = sc;
      } else if (a.value("turnpike_scan", false)) {
        cfg.turnpike_scan = ScanConfig{};
      }
      if (a.contains("dissipativity") && !a["dissipativity"].is_boolean()) {
        DissipativityConfig dc;
        if (a["dissipativity"].contains("horizons")) dc.horizons = doubles(a["dissipativity"]["horizons"]);
        dc.w = a["dissipativity"].value("w", dc.w);
        dc.storage = a["dissipativity"].value("storage", dc.storage);
        cfg.dissipativity = dc;
      } else if (a.value("dissipativity", false)) {
        cfg.dissipativity = DissipativityConfig{};
      }
    }
    if (j.contains("trim")) {
      const Json& t = j["trim"];
      TrimRequest r;
      r.unknown = unknown_from(t.value("unknown", std::string("cyclic_velocity")));
      r.s = t.value("s", 0.0);
      r.v_th = t.value("v_theta", 0.0);
      if (t.contains("u")) {
        const auto u = doubles(t["u"]);
        r.u = Eigen::Map<const Eigen::VectorXd>(u.data(), static_cast<Eigen::Index>(u.size()));
      }
      r.control_index = t.value("control_index", 0);
      r.guess = t.value("guess", r.guess);
      cfg.trim = r;
    }
    return cfg;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::parse, std::string("config: ") + e.what());
  }
}

OcpSpec resolve_spec(const ExperimentConfig& cfg) {
  OcpSpec spec;
  if (cfg.preset == "custom") {
    if (!cfg.spec) throw Error(ErrorCode::invalid_argument, "preset 'custom' needs an inline spec");
    spec = spec_from_json(*cfg.spec);
  } else {
    spec = preset(cfg.preset);
    if (cfg.spec) {
      Json base = spec_to_json(spec);
      base.merge_patch(*cfg.spec);
      spec = spec_from_json(base);
    }
  }
  if (cfg.horizon) spec = with_horizon(spec, *cfg.horizon);
  spec.validate();
  return spec;
}

OcpOptions resolve_options(const ExperimentConfig& cfg) {
  OcpOptions o;
  if (cfg.tol) {
    if (!(*cfg.tol > 0.0)) throw Error(ErrorCode::invalid_argument, "tol must be positive");
    o.sqp.tol = *cfg.tol;
  }
  if (cfg.max_iter) {
    if (*cfg.max_iter < 1) throw Error(ErrorCode::invalid_argument, "max_iter must be >= 1");
    o.sqp.max_iter = *cfg.max_iter;
  }
  return o;
}

DistanceFn default_distance(const OcpSpec& spec) {
  if (const auto* q = std::get_if<QuadraticCost>(&spec.cost)) return trim_state_distance(q->x_ref.s, q->x_ref.v_th);
  return trim_residual_distance(spec.model, 1.0);
}

Json run_solve(const ExperimentConfig& cfg) {
  const OcpSpec spec = resolve_spec(cfg);
  const OcpSolution sol = solve_ocp(spec, resolve_options(cfg));
  write_text(out_path(cfg, "trajectory.csv"), trajectory_to_csv(sol.trajectory));
  Json s = solution_summary(sol);
  s["horizon"] = spec.horizon;
  s["intervals"] = spec.intervals;
  write_json(cfg, "summary.json", s);
  return s;
}

Json run_trim(const ExperimentConfig& cfg) {
  const OcpSpec spec = resolve_spec(cfg);
  TrimRequest r;
  if (cfg.trim) {
    r = *cfg.trim;
  } else {
    r.unknown = TrimUnknown::cyclic_velocity;
    r.s = spec.x0.s;
    r.guess = spec.x0.v_th != 0.0 ? spec.x0.v_th : 1.0;
  }
  if (r.u.size() == 0) r.u = Control::Zero(spec.model.control_dim);
  const TrimPoint tp = solve_trim(spec.model, r);
  Json j = trim_to_json(tp);
  write_json(cfg, "trim.json", j);
  return j;
}

Json run_sop(const ExperimentConfig& cfg) {
  const OcpSpec spec = resolve_spec(cfg);
  SopGuess g;
  g.s = spec.x0.s;
  g.v_th = spec.x0.v_th;
  g.u = cost_u_ref(spec.cost, spec.model.control_dim);
  SqpOptions o = sop_default_options();
  if (cfg.max_iter) o.max_iter = *cfg.max_iter;
  const SopSolution sol = solve_sop(spec.model, spec.cost, g, o);
  Json j = sop_to_json(sol);
  j["nco"] = nco_to_json(sop_stationarity_residuals(spec.model, spec.cost, sol.s_bar, sol.v_theta_bar, sol.u_bar,
                                                    sol.lambda, sol.lambda_cyclic));
  write_json(cfg, "sop.json", j);
  return j;
}

Json run_nco_check(const ExperimentConfig& cfg) {
  const OcpSpec spec = resolve_spec(cfg);
  const OcpOptions opts = resolve_options(cfg);
  Json j;
  const OcpSolution sol = solve_ocp(spec, opts);
  j["full"] = nco_to_json(ocp_nco_report(spec, sol, 1e-3, cfg.nco_window));
  j["full"]["solve"] = solution_summary(sol);
  if (cfg.tocp) {
    const TocpSolution t = solve_tocp(tocp_from_ocp(spec), opts);
    write_text(out_path(cfg, "tocp_trajectory.csv"), trajectory_to_csv(t.trajectory()));
    j["tocp"] = tocp_summary(t);
    j["reduced"] = nco_to_json(reduced_nco_report(spec.model, spec.cost, t, 1e-4, cfg.nco_window));
    const Correspondence c = correspondence_full_from_reduced(spec.model, spec.cost, t, 1e-3, cfg.nco_window);
    j["correspondence"] = nco_to_json(c.report);
    j["correspondence"]["lambda_s"] = c.lambda_s;
  }
  if (std::isfinite(cfg.nco_window.from) || std::isfinite(cfg.nco_window.to)) {
    j["window"] = {cfg.nco_window.from, cfg.nco_window.to};
  }
  write_json(cfg, "nco_report.json", j);
  return j;
}

Json run_turnpike_scan(const ExperimentConfig& cfg) {
  const OcpSpec spec = resolve_spec(cfg);
  ScanConfig sc = cfg.turnpike_scan.value_or(ScanConfig{});
  if (sc.horizons.empty()) sc.horizons = {spec.horizon, 2.0 * spec.horizon, 3.0 * spec.horizon};
  const TurnpikeScan scan = turnpike_scan(spec, sc.horizons, default_distance(spec), sc.epsilon, resolve_options(cfg));
  write_text(out_path(cfg, "turnpike.csv"), scan_to_csv(scan));
  const Json j = scan_to_json(scan);
  write_json(cfg, "turnpike.json", j);
  if (!scan.error.empty()) throw Error(ErrorCode::not_converged, "turnpike scan aborted: " + scan.error);
  return j;
}

Json run_dissipativity(const ExperimentConfig& cfg) {
  const OcpSpec spec = resolve_spec(cfg);
  DissipativityConfig dc = cfg.dissipativity.value_or(DissipativityConfig{});
  if (dc.horizons.empty()) dc.horizons = {0.3 * spec.horizon, spec.horizon};
  std::vector<CostedTrajectory> trajs;
  for (double t : dc.horizons) {
    const OcpSpec s = with_horizon(spec, t);
    const OcpSolution sol = solve_ocp(s, resolve_options(cfg));
    if (sol.status != NlpStatus::converged) {
      throw Error(ErrorCode::not_converged, "dissipativity: solve at T = " + std::to_string(t) + " did not converge");
    }
    trajs.push_back(with_costs(s.model, s.cost, sol.trajectory));
  }
  const DistanceFn dist = trim_residual_distance(spec.model, dc.w);
  const FitResult fit = fit_max_c(trajs, dist, dc.storage);
  Json j = certificate_to_json(fit.certificate);
  j["fit_max_c"] = fit.certificate.c;
  j["unbounded"] = fit.unbounded;
  j["bisections"] = fit.bisections;
  j["distance"] = "sqrt(v_s^2 + w T^2)";
  j["w"] = dc.w;
  j["sample"] = "optimal trajectories from x0 of the spec";
  write_json(cfg, "dissipativity.json", j);
  return j;
}

RunOutcome run(const ExperimentConfig& cfg) {
  RunOutcome out;
  out.summary["solve"] = run_solve(cfg);
  const bool converged = out.summary["solve"]["status"] == "converged";
  if (cfg.nco_check || cfg.tocp) out.summary["nco_check"] = run_nco_check(cfg);
  if (cfg.sop) out.summary["sop"] = run_sop(cfg);
  if (cfg.turnpike_scan) out.summary["turnpike_scan"] = run_turnpike_scan(cfg);
  if (cfg.dissipativity) out.summary["dissipativity"] = run_dissipativity(cfg);
  out.exit_code = converged ? 0 : static_cast<int>(ErrorCode::not_converged);
  return out;
}

}  // namespace mtp
