#include "mtp/io.hpp"

#include "mtp/error.hpp"
#include "mtp/kepler.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace mtp {

namespace {

const char* kComponents[4] = {"s", "v_s", "theta", "v_theta"};

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == sep) {
      out.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur.push_back(ch);
    }
  }
  out.push_back(cur);
  return out;
}

double parse_double(const std::string& s, int line) {
  double v = 0.0;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last) {
    throw Error(ErrorCode::parse, "csv line " + std::to_string(line) + ": bad number '" + s + "'");
  }
  return v;
}

Json vec_json(const Eigen::VectorXd& v) {
  Json a = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

Eigen::VectorXd vec_from(const Json& j, const char* what) {
  if (!j.is_array()) throw Error(ErrorCode::parse, std::string(what) + ": expected an array");
  Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
  return v;
}

int component_index(const Json& j) {
  if (j.is_number_integer()) return j.get<int>();
  const std::string name = j.get<std::string>();
  for (int i = 0; i < 4; ++i) {
    if (name == kComponents[i]) return i;
  }
  throw Error(ErrorCode::parse, "unknown state component '" + name + "'");
}

Json kkt_json(const KktResiduals& k) {
  return {{"stationarity", k.stationarity}, {"feasibility", k.feasibility}, {"complementarity", k.complementarity}};
}

Json entries_json(const std::vector<NcoEntry>& list) {
  Json o = Json::object();
  for (const auto& e : list) {
    o[e.name] = {{"scaled", e.value}, {"raw", e.raw}, {"magnitude", e.magnitude}, {"time", e.time}};
  }
  return o;
}

}  // namespace

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc()) throw Error(ErrorCode::internal, "format_double failed");
  return std::string(buf, ptr);
}

std::string trajectory_to_csv(const Trajectory& traj) {
  traj.validate();
  const Eigen::Index m = traj.controls.empty() ? 0 : traj.controls.front().size();
  const bool lam = !traj.costates.empty();
  std::ostringstream os;
  os << "t,s,v_s,theta,v_theta";
  for (Eigen::Index k = 0; k < m; ++k) os << ",u_" << k + 1;
  if (lam) os << ",l_s,l_vs,l_th,l_vth";
  os << '\n';
  for (std::size_t i = 0; i < traj.size(); ++i) {
    const State& x = traj.states[i];
    os << format_double(traj.times[i]) << ',' << format_double(x.s) << ',' << format_double(x.v_s) << ','
       << format_double(x.th) << ',' << format_double(x.v_th);
    for (Eigen::Index k = 0; k < m; ++k) {
      os << ',';
      if (i < traj.controls.size()) os << format_double(traj.controls[i][k]);
    }
    if (lam) {
      const CoState& l = traj.costates[i];
      os << ',' << format_double(l.l_s) << ',' << format_double(l.l_vs) << ',' << format_double(l.l_th) << ','
         << format_double(l.l_vth);
    }
    os << '\n';
  }
  return os.str();
}

Trajectory trajectory_from_csv(const std::string& text) {
  std::istringstream is(text);
  std::string line;
  if (!std::getline(is, line)) throw Error(ErrorCode::parse, "csv: empty input");
  const std::vector<std::string> head = split(line, ',');
  if (head.size() < 5 || head[0] != "t" || head[1] != "s" || head[2] != "v_s" || head[3] != "theta" ||
      head[4] != "v_theta") {
    throw Error(ErrorCode::parse, "csv: header must start with t,s,v_s,theta,v_theta");
  }
  std::size_t m = 0;
  while (5 + m < head.size() && head[5 + m] == "u_" + std::to_string(m + 1)) ++m;
  const std::size_t rest = head.size() - 5 - m;
  if (rest != 0 && rest != 4) throw Error(ErrorCode::parse, "csv: unexpected columns after controls");
  const bool lam = rest == 4;

  Trajectory tr;
  std::vector<std::vector<std::string>> rows;
  int line_no = 1;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    auto f = split(line, ',');
    if (f.size() != head.size()) {
      throw Error(ErrorCode::parse, "csv line " + std::to_string(line_no) + ": expected " +
                                        std::to_string(head.size()) + " fields");
    }
    tr.times.push_back(parse_double(f[0], line_no));
    tr.states.push_back({parse_double(f[1], line_no), parse_double(f[2], line_no), parse_double(f[3], line_no),
                         parse_double(f[4], line_no)});
    if (m > 0 && !f[5].empty()) {
      Control u(static_cast<Eigen::Index>(m));
      for (std::size_t k = 0; k < m; ++k) u[static_cast<Eigen::Index>(k)] = parse_double(f[5 + k], line_no);
      if (tr.controls.size() + 1 != tr.states.size()) {
        throw Error(ErrorCode::parse, "csv line " + std::to_string(line_no) + ": control after an empty control row");
      }
      tr.controls.push_back(u);
    }
    if (lam) {
      const std::size_t o = 5 + m;
      tr.costates.push_back({parse_double(f[o], line_no), parse_double(f[o + 1], line_no),
                             parse_double(f[o + 2], line_no), parse_double(f[o + 3], line_no)});
    }
  }
  if (tr.states.empty()) throw Error(ErrorCode::parse, "csv: no data rows");
  try {
    tr.validate();
  } catch (const Error& e) {
    throw Error(ErrorCode::parse, std::string("csv: ") + e.what());
  }
  return tr;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error(ErrorCode::io, "cannot open '" + path + "' for writing");
  os << text;
  if (!os) throw Error(ErrorCode::io, "write to '" + path + "' failed");
}

std::string read_text(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error(ErrorCode::io, "cannot open '" + path + "'");
  std::ostringstream os;
  os << is.rdbuf();
  return os.str();
}

Json state_to_json(const State& x) { return Json::array({x.s, x.v_s, x.th, x.v_th}); }

State state_from_json(const Json& j) {
  if (j.is_array()) {
    if (j.size() != 4) throw Error(ErrorCode::parse, "state: expected 4 entries");
    return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>(), j[3].get<double>()};
  }
  if (j.is_object()) {
    return {j.value("s", 0.0), j.value("v_s", 0.0), j.value("theta", 0.0), j.value("v_theta", 0.0)};
  }
  throw Error(ErrorCode::parse, "state: expected an array or object");
}

Json spec_to_json(const OcpSpec& spec) {
  Json j;
  j["model"] = {{"preset", spec.model_preset}, {"k", spec.kepler.k}, {"m2", spec.kepler.m2}};
  j["horizon"] = spec.horizon;
  j["intervals"] = spec.intervals;
  if (const auto* q = std::get_if<QuadraticCost>(&spec.cost)) {
    j["cost"] = {{"type", "quadratic"},      {"x_ref", state_to_json(q->x_ref)}, {"q", vec_json(q->q)},
                 {"u_ref", vec_json(q->u_ref)}, {"r", vec_json(q->r)}};
  } else if (const auto* t = std::get_if<TrimPenaltyCost>(&spec.cost)) {
    j["cost"] = {{"type", "trim_penalty"}, {"w_t", t->w_t},           {"s_ref", t->s_ref},
                 {"s_weight", t->s_weight}, {"u_ref", vec_json(t->u_ref)}, {"r", vec_json(t->r)}};
  } else {
    throw Error(ErrorCode::invalid_argument, "spec_to_json: custom costs cannot be serialized");
  }
  j["x0"] = state_to_json(spec.x0);
  if (spec.terminal.general) {
    throw Error(ErrorCode::invalid_argument, "spec_to_json: general terminal constraints cannot be serialized");
  }
  Json fixed = Json::array();
  for (const auto& f : spec.terminal.fixed) fixed.push_back({{"component", kComponents[f.index]}, {"value", f.value}});
  j["terminal"] = {{"fixed", fixed}};
  Json b = Json::object();
  if (spec.bounds.lower.size()) b["lower"] = vec_json(spec.bounds.lower);
  if (spec.bounds.upper.size()) b["upper"] = vec_json(spec.bounds.upper);
  j["bounds"] = b;
  return j;
}

OcpSpec spec_from_json(const Json& j) {
  try {
    if (!j.is_object()) throw Error(ErrorCode::parse, "spec: expected a JSON object");
    OcpSpec spec;
    KeplerParams kp;
    std::string preset = "kepler";
    if (j.contains("model")) {
      const Json& m = j["model"];
      if (m.is_string()) {
        preset = m.get<std::string>();
      } else if (m.is_object()) {
        preset = m.value("preset", std::string("kepler"));
        kp.k = m.value("k", kp.k);
        kp.m2 = m.value("m2", kp.m2);
      } else {
        throw Error(ErrorCode::parse, "spec.model: expected a string or object");
      }
    }
    if (preset != "kepler") throw Error(ErrorCode::unknown_preset, "unknown preset: model '" + preset + "'");
    if (!(kp.k > 0.0) || !(kp.m2 > 0.0)) throw Error(ErrorCode::invalid_argument, "spec.model: k and m2 must be positive");
    spec.model = kepler_model(kp);
    spec.model_preset = preset;
    spec.kepler = kp;
    spec.horizon = j.at("horizon").get<double>();
    spec.intervals = j.at("intervals").get<int>();

    const Json& c = j.at("cost");
    const std::string type = c.at("type").get<std::string>();
    const int mdim = spec.model.control_dim;
    if (type == "quadratic") {
      QuadraticCost q;
      q.x_ref = state_from_json(c.at("x_ref"));
      const Eigen::VectorXd w = vec_from(c.at("q"), "cost.q");
      if (w.size() != 4) throw Error(ErrorCode::parse, "cost.q: expected 4 entries");
      q.q = w;
      q.u_ref = c.contains("u_ref") ? vec_from(c["u_ref"], "cost.u_ref") : Eigen::VectorXd::Zero(mdim);
      q.r = vec_from(c.at("r"), "cost.r");
      spec.cost = q;
    } else if (type == "trim_penalty") {
      TrimPenaltyCost t;
      t.w_t = c.value("w_t", t.w_t);
      t.s_ref = c.at("s_ref").get<double>();
      t.s_weight = c.value("s_weight", t.s_weight);
      t.u_ref = c.contains("u_ref") ? vec_from(c["u_ref"], "cost.u_ref") : Eigen::VectorXd::Zero(mdim);
      t.r = vec_from(c.at("r"), "cost.r");
      spec.cost = t;
    } else {
      throw Error(ErrorCode::parse, "cost.type must be 'quadratic' or 'trim_penalty'");
    }
    spec.x0 = state_from_json(j.at("x0"));
    if (j.contains("terminal") && j["terminal"].contains("fixed")) {
      for (const auto& f : j["terminal"]["fixed"]) {
        const Json& idx = f.contains("component") ? f["component"] : f.at("index");
        spec.terminal.fixed.push_back({component_index(idx), f.at("value").get<double>()});
      }
    }
    if (j.contains("bounds")) {
      const Json& b = j["bounds"];
      if (b.contains("lower")) spec.bounds.lower = vec_from(b["lower"], "bounds.lower");
      if (b.contains("upper")) spec.bounds.upper = vec_from(b["upper"], "bounds.upper");
    }
    if (j.contains("warm_start")) spec.warm_start = trajectory_from_csv(read_text(j["warm_start"].get<std::string>()));
    spec.validate();
    return spec;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::parse, std::string("spec: ") + e.what());
  }
}

Json solution_summary(const OcpSolution& sol) {
  return {{"objective", sol.objective},
          {"status", to_string(sol.status)},
          {"kkt", kkt_json(sol.kkt)},
          {"iterations", sol.iterations},
          {"max_defect", sol.max_defect},
          {"initial_error", sol.initial_error},
          {"timings", {{"solve_seconds", sol.seconds}}},
          {"warnings", sol.warnings}};
}

Json tocp_summary(const TocpSolution& sol) {
  return {{"s_bar", sol.s_bar},
          {"objective", sol.objective},
          {"status", to_string(sol.status)},
          {"kkt", kkt_json(sol.kkt)},
          {"iterations", sol.iterations},
          {"max_trim_residual", sol.max_trim_residual},
          {"timings", {{"solve_seconds", sol.seconds}}}};
}

Json trim_to_json(const TrimPoint& tp) {
  return {{"s", tp.s}, {"v_theta", tp.v_th}, {"u", vec_json(tp.u)}, {"residual", tp.residual}, {"iterations", tp.iterations}};
}

Json sop_to_json(const SopSolution& sol) {
  return {{"s_bar", sol.s_bar},
          {"v_theta_bar", sol.v_theta_bar},
          {"u_bar", vec_json(sol.u_bar)},
          {"lambda", sol.lambda},
          {"lambda_cyclic", sol.lambda_cyclic},
          {"cyclic_constraint", sol.cyclic_constraint},
          {"objective", sol.objective},
          {"trim_residual", sol.trim_residual},
          {"status", to_string(sol.status)},
          {"kkt", kkt_json(sol.kkt)},
          {"iterations", sol.iterations}};
}

Json nco_to_json(const NcoResidualReport& report) {
  return {{"residuals", entries_json(report.residuals)},
          {"diagnostics", entries_json(report.diagnostics)},
          {"max_abs", report.max_abs},
          {"tol", report.tol},
          {"pass", report.pass},
          {"caveat", report.caveat},
          {"note", report.note}};
}

Json turnpike_to_json(const TurnpikeReport& report) {
  Json exc = Json::array();
  for (const auto& [a, b] : report.excursions) exc.push_back({a, b});
  return {{"epsilon", report.epsilon},
          {"dwell_measure", report.dwell_measure},
          {"excursions", exc},
          {"horizon", report.horizon},
          {"bound_estimate", report.bound_estimate}};
}

Json scan_to_json(const TurnpikeScan& scan) {
  Json reps = Json::array();
  for (std::size_t i = 0; i < scan.reports.size(); ++i) {
    Json r = turnpike_to_json(scan.reports[i]);
    r["objective"] = scan.objectives[i];
    r["status"] = to_string(scan.statuses[i]);
    reps.push_back(r);
  }
  return {{"reports", reps},
          {"ratio", std::isfinite(scan.ratio) ? Json(scan.ratio) : Json(nullptr)},
          {"growth", std::isfinite(scan.growth) ? Json(scan.growth) : Json(nullptr)},
          {"bounded", scan.bounded},
          {"error", scan.error}};
}

std::string scan_to_csv(const TurnpikeScan& scan) {
  std::ostringstream os;
  os << "T,dwell,epsilon,objective\n";
  for (std::size_t i = 0; i < scan.reports.size(); ++i) {
    os << format_double(scan.horizons[i]) << ',' << format_double(scan.reports[i].dwell_measure) << ','
       << format_double(scan.reports[i].epsilon) << ',' << format_double(scan.objectives[i]) << '\n';
  }
  return os.str();
}

Json certificate_to_json(const DissipativityCertificate& cert) {
  return {{"alpha_coeff", cert.c},     {"storage", cert.storage}, {"worst_margin", cert.worst_margin},
          {"worst_time", cert.worst_time}, {"horizons", cert.horizons}, {"tol", cert.tol},
          {"valid", cert.valid},       {"alpha_form", "c*r^2"},  {"storage_form", "constant"}};
}

Json probe_to_json(const CostControllabilityProbe& probe) {
  Json rows = Json::array();
  for (const auto& r : probe.rows) {
    rows.push_back({{"x0", state_to_json(r.x0)},
                    {"horizon", r.horizon},
                    {"value", r.value},
                    {"l_star", r.l_star},
                    {"ratio", std::isfinite(r.ratio) ? Json(r.ratio) : Json(nullptr)},
                    {"status", to_string(r.status)},
                    {"flag", r.flag}});
  }
  return {{"rows", rows}, {"horizons", probe.horizons}, {"bound", probe.bound}};
}

}  // namespace mtp
