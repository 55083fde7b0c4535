#include "mtp/nco.hpp"

#include "mtp/error.hpp"
#include "mtp/trim.hpp"

#include <algorithm>
#include <cmath>
#include <initializer_list>

namespace mtp {

namespace {

double max_abs_of(std::initializer_list<double> terms) {
  double m = 0.0;
  for (double t : terms) m = std::max(m, std::abs(t));
  return m;
}

void keep_max(std::vector<NcoEntry>& list, const std::string& name, double raw, double magnitude, double time) {
  const double scaled = std::abs(raw) / (1.0 + std::abs(magnitude));
  auto it = std::find_if(list.begin(), list.end(), [&](const NcoEntry& e) { return e.name == name; });
  if (it == list.end()) {
    list.push_back({name, scaled, raw, std::abs(magnitude), time});
  } else if (scaled > it->value || std::isnan(scaled)) {
    *it = {name, scaled, raw, std::abs(magnitude), time};
  }
}

struct Point {
  double m11, m11_d, m11_dd, m22, m22_d, m22_dd, v_d, v_dd;
  double inv11, inv11_d, inv22, inv22_d;
  double fs, fth;
  Eigen::RowVectorXd fs_jac, fth_jac;
};

Point evaluate(const MechModel& model, double s, const Control& u) {
  Point p{};
  p.m11 = model.m11(s);
  p.m11_d = model.m11_d(s);
  p.m11_dd = model.m11_dd(s);
  p.m22 = model.m22(s);
  p.m22_d = model.m22_d(s);
  p.m22_dd = model.m22_dd(s);
  p.v_d = model.pot_d(s);
  p.v_dd = model.pot_dd(s);
  p.inv11 = 1.0 / p.m11;
  p.inv22 = 1.0 / p.m22;
  p.inv11_d = inv_mass_d(p.m11, p.m11_d);
  p.inv22_d = inv_mass_d(p.m22, p.m22_d);
  p.fs = model.f_s(u);
  p.fth = model.f_th(u);
  p.fs_jac = model.f_s_jac(u);
  p.fth_jac = model.f_th_jac(u);
  return p;
}

// dT/ds at (s, v_th, u)
double trim_ds(const Point& p, double v_th) {
  return p.inv11_d * (0.5 * p.m22_d * v_th * v_th - p.v_d + p.fs) +
         p.inv11 * (0.5 * p.m22_dd * v_th * v_th - p.v_dd);
}

double rate(const std::vector<double>& y, double h, std::size_t i) {
  const std::size_t n = y.size();
  if (n < 2) return 0.0;
  if (i == 0) return (y[1] - y[0]) / h;
  if (i + 1 >= n) return (y[n - 1] - y[n - 2]) / h;
  return (y[i + 1] - y[i - 1]) / (2.0 * h);
}

}  // namespace

void NcoResidualReport::record(const std::string& name, double raw, double magnitude, double time) {
  keep_max(residuals, name, raw, magnitude, time);
}

void NcoResidualReport::record_diagnostic(const std::string& name, double raw, double magnitude, double time) {
  keep_max(diagnostics, name, raw, magnitude, time);
}

void NcoResidualReport::finish(double tolerance) {
  tol = tolerance;
  max_abs = 0.0;
  bool finite = true;
  for (const auto& e : residuals) {
    if (!std::isfinite(e.value)) finite = false;
    max_abs = std::max(max_abs, e.value);
  }
  pass = finite && max_abs <= tol;
}

const NcoEntry& NcoResidualReport::entry(const std::string& name) const {
  for (const auto* list : {&residuals, &diagnostics}) {
    for (const auto& e : *list) {
      if (e.name == name) return e;
    }
  }
  throw Error(ErrorCode::invalid_argument, "nco report has no entry '" + name + "'");
}

double NcoResidualReport::value(const std::string& name) const { return entry(name).value; }

double ocp_hamiltonian(const MechModel& model, const StageCost& cost, const State& x, const Control& u,
                       const CoState& lam) {
  return stage_cost(model, cost, x, u) + lam.vec().dot(el_rhs(model, x, u));
}

CoState adjoint_rhs(const MechModel& model, const StageCost& cost, const State& x, const Control& u,
                    const CoState& lam) {
  const Point p = evaluate(model, x.s, u);
  const CostGradient g = stage_cost_gradient(model, cost, x, u);
  const double vs = x.v_s, vt = x.v_th;
  const double l1 = p.inv11_d * (-0.5 * p.m11_d * vs * vs + 0.5 * p.m22_d * vt * vt - p.v_d + p.fs) +
                    p.inv11 * (-0.5 * p.m11_dd * vs * vs + 0.5 * p.m22_dd * vt * vt - p.v_dd);
  const double l2 = -p.inv22_d * p.m22_d * vt * vs - p.inv22 * p.m22_dd * vt * vs + p.inv22_d * p.fth;

  Matrix4 a = Matrix4::Zero();
  a(0, 1) = 1.0;
  a(1, 0) = l1;
  a(1, 1) = -p.inv11 * p.m11_d * vs;
  a(1, 3) = p.inv11 * p.m22_d * vt;
  a(2, 3) = 1.0;
  a(3, 0) = l2;
  a(3, 1) = -p.inv22 * p.m22_d * vt;
  a(3, 3) = -p.inv22 * p.m22_d * vs;

  Vector4 grad = g.dx;
  grad[2] = 0.0;
  Vector4 dot = -a.transpose() * lam.vec() - grad;
  dot[2] = 0.0;
  return CoState::from(dot);
}

Eigen::VectorXd stationarity_residual(const MechModel& model, const StageCost& cost, const State& x,
                                      const Control& u, const CoState& lam) {
  const Point p = evaluate(model, x.s, u);
  const CostGradient g = stage_cost_gradient(model, cost, x, u);
  return (p.inv11 * p.fs_jac.transpose() * lam.l_vs + p.inv22 * p.fth_jac.transpose() * lam.l_vth + g.du).eval();
}

NcoResidualReport reduced_nco_residuals(const MechModel& model, const StageCost& cost, double s_bar,
                                        double v_bar, const Control& u_bar, const ReducedCostate& rc,
                                        const ReducedRates& rates) {
  const Point p = evaluate(model, s_bar, u_bar);
  const State x{s_bar, 0.0, 0.0, v_bar};
  const CostGradient g = stage_cost_gradient(model, cost, x, u_bar);
  const double t_v = p.inv11 * p.m22_d * v_bar;
  const double t_s = trim_ds(p, v_bar);
  const double lt = rc.l_trim, lv = rc.l_vth_bar;

  NcoResidualReport r;
  r.record("eq_steadystate1", rates.l_th_bar, std::abs(rates.l_th_bar));
  {
    const double a = g.dx[3], b = t_v * lt;
    r.record("eq_steadystate2", rates.l_vth_bar + a + b, max_abs_of({rates.l_vth_bar, a, b}));
  }
  for (Eigen::Index k = 0; k < u_bar.size(); ++k) {
    const double a = g.du[k], b = p.fth_jac[k] * p.inv22 * lv, c = p.inv11 * p.fs_jac[k] * lt;
    r.record("eq_steadystate3", a + b + c, max_abs_of({a, b, c}));
  }
  {
    const double a = g.dx[0], b = lv * p.inv22_d * p.fth, c = t_s * lt;
    r.record("eq_steadystate4", a + b + c, max_abs_of({a, b, c}));
  }
  {
    const double a = 0.5 * p.m22_d * v_bar * v_bar, b = p.v_d, c = p.fs;
    r.record("eq_steadystate5", p.inv11 * (a - b + c), p.inv11 * max_abs_of({a, b, c}));
  }
  r.record("eq_steadystate6", rates.th - v_bar, max_abs_of({rates.th, v_bar}));
  {
    const double a = p.inv22 * p.fth;
    r.record("eq_steadystate7", rates.v_th - a, max_abs_of({rates.v_th, a}));
  }
  r.record("lambda_th_bar_zero", rc.l_th_bar, 0.0);
  r.finish(1e-4);
  return r;
}

NcoResidualReport reduced_nco_report(const MechModel& model, const StageCost& cost, const TocpSolution& tocp,
                                     double tol, const TimeWindow& window) {
  const std::size_t n = tocp.u.size();
  if (n == 0 || tocp.theta.size() != n + 1 || tocp.l_trim.size() != n) {
    throw Error(ErrorCode::invalid_argument, "reduced_nco_report: inconsistent T-OCP solution");
  }
  const double h = tocp.times[1] - tocp.times[0];
  NcoResidualReport out;
  double s_sum = 0.0, s_mag = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const ReducedCostate rc{tocp.l_theta[i], tocp.l_vtheta[i], tocp.l_trim[i]};
    const ReducedRates rates{rate(tocp.theta, h, i), rate(tocp.v_theta, h, i), rate(tocp.l_theta, h, i),
                             rate(tocp.l_vtheta, h, i)};
    const NcoResidualReport r = reduced_nco_residuals(model, cost, tocp.s_bar, tocp.v_theta[i], tocp.u[i], rc, rates);
    for (const auto& e : r.residuals) {
      const double mag = e.magnitude;
      if (e.name == "eq_steadystate4") {
        s_sum += h * e.raw;
        s_mag = std::max(s_mag, mag);
        if (window.contains(tocp.times[i])) out.record_diagnostic("eq_steadystate4_pointwise", e.raw, mag, tocp.times[i]);
      } else if (window.contains(tocp.times[i])) {
        out.record(e.name, e.raw, mag, tocp.times[i]);
      }
    }
  }
  out.record("eq_steadystate4", s_sum / (h * static_cast<double>(n)), s_mag);
  out.finish(tol);
  return out;
}

NcoResidualReport sop_stationarity_residuals(const MechModel& model, const StageCost& cost, double s_bar,
                                             double v_bar, const Control& u_bar, double lam_bar,
                                             double lam_cyclic, double tol) {
  const Point p = evaluate(model, s_bar, u_bar);
  const CostGradient g = stage_cost_gradient(model, cost, {s_bar, 0.0, 0.0, v_bar}, u_bar);
  const double t_s = trim_ds(p, v_bar);
  const double t_v = p.inv11 * p.m22_d * v_bar;

  NcoResidualReport r;
  r.record("eq_sspL1", g.dx[0] + lam_bar * t_s, max_abs_of({g.dx[0], lam_bar * t_s}));
  r.record("eq_sspL2", g.dx[3] + lam_bar * t_v, max_abs_of({g.dx[3], lam_bar * t_v}));
  for (Eigen::Index k = 0; k < u_bar.size(); ++k) {
    const double a = g.du[k], b = lam_bar * p.inv11 * p.fs_jac[k], c = lam_cyclic * p.fth_jac[k];
    r.record("eq_sspL3", a + b + c, max_abs_of({a, b, c}));
  }
  const double a = 0.5 * p.m22_d * v_bar * v_bar, b = p.v_d, c = p.fs;
  r.record("eq_sspL4", p.inv11 * (a - b + c), p.inv11 * max_abs_of({a, b, c}));
  r.finish(tol);
  return r;
}

Correspondence correspondence_full_from_reduced(const MechModel& model, const StageCost& cost,
                                                const TocpSolution& tocp, double tol,
                                                const TimeWindow& window) {
  const std::size_t n = tocp.u.size();
  if (n == 0 || tocp.theta.size() != n + 1 || tocp.l_trim.size() != n) {
    throw Error(ErrorCode::invalid_argument, "correspondence: inconsistent T-OCP solution");
  }
  const double h = tocp.times[1] - tocp.times[0];
  const double s = tocp.s_bar;

  Correspondence c;
  c.full = tocp.trajectory();

  // lam_vs per node; transversality at the last node
  std::vector<double> l_vs(tocp.l_trim);
  l_vs.push_back(0.0);

  {
    const Point p = evaluate(model, s, tocp.u[0]);
    const State x0{s, 0.0, tocp.theta[0], tocp.v_theta[0]};
    const CostGradient g = stage_cost_gradient(model, cost, x0, tocp.u[0]);
    c.lambda_s = -rate(tocp.l_trim, h, 0) + p.inv22 * p.m22_d * tocp.v_theta[0] * tocp.l_vtheta[0] - g.dx[1];
  }
  c.full.costates.resize(n + 1);
  for (std::size_t i = 0; i <= n; ++i) c.full.costates[i] = {c.lambda_s, l_vs[i], 0.0, tocp.l_vtheta[i]};

  NcoResidualReport& r = c.report;
  for (std::size_t i = 0; i < n; ++i) {
    const double t = tocp.times[i];
    if (!window.contains(t)) continue;
    const Control& u = tocp.u[i];
    const double vt = tocp.v_theta[i];
    const CoState& lam = c.full.costates[i];
    const State x{s, 0.0, tocp.theta[i], vt};
    const Point p = evaluate(model, s, u);
    const CostGradient g = stage_cost_gradient(model, cost, x, u);
    const double dl_vs = rate(tocp.l_trim, h, i);
    const double dl_vth = rate(tocp.l_vtheta, h, i);

    {
      const double a = trim_ds(p, vt) * lam.l_vs, b = p.inv22_d * p.fth * lam.l_vth, d = g.dx[0];
      r.record("eq_dynamicsys1", a + b + d, max_abs_of({a, b, d}), t);
    }
    {
      const double b = p.inv22 * p.m22_d * vt * lam.l_vth;
      r.record("eq_dynamicsys2", dl_vs + lam.l_s - b + g.dx[1], max_abs_of({dl_vs, lam.l_s, b, g.dx[1]}), t);
      const double recon = -dl_vs + b - g.dx[1];
      r.record_diagnostic("lambda_s_constancy", recon - c.lambda_s, max_abs_of({recon, c.lambda_s}), t);
    }
    {
      const double a = p.inv11 * p.m22_d * vt * lam.l_vs;
      r.record("eq_dynamicsys4", dl_vth + a + g.dx[3], max_abs_of({dl_vth, a, g.dx[3]}), t);
    }
    for (Eigen::Index k = 0; k < u.size(); ++k) {
      const double a = p.inv11 * p.fs_jac[k] * lam.l_vs, b = p.inv22 * p.fth_jac[k] * lam.l_vth, d = g.du[k];
      r.record("eq_dynamicsys5", a + b + d, max_abs_of({a, b, d}), t);
    }
    const Vector4 f = el_rhs(model, x, u);
    r.record("primal_s", 0.0 - f[0], std::abs(f[0]), t);
    {
      const double a = 0.5 * p.m22_d * vt * vt, b = p.v_d, d = p.fs;
      r.record("primal_v_s", 0.0 - f[1], p.inv11 * max_abs_of({a, b, d}), t);
    }
    const double th_dot = rate(tocp.theta, h, i), v_dot = rate(tocp.v_theta, h, i);
    r.record("primal_theta", th_dot - f[2], max_abs_of({th_dot, f[2]}), t);
    r.record("primal_v_theta", v_dot - f[3], max_abs_of({v_dot, f[3]}), t);
  }
  r.record("eq_adjoint_theta", 0.0, 0.0);
  r.finish(tol);
  return c;
}

NcoResidualReport ocp_nco_report(const OcpSpec& spec, const OcpSolution& sol, double tol,
                                 const TimeWindow& window) {
  const Trajectory& tr = sol.trajectory;
  const std::size_t n = tr.controls.size();
  if (n < 3 || tr.costates.size() != n + 1) {
    throw Error(ErrorCode::invalid_argument, "ocp_nco_report: trajectory needs costates and >= 3 intervals");
  }
  const double h = tr.times[1] - tr.times[0];
  static const char* names[4] = {"eq_adjoint_s", "eq_adjoint_vs", "eq_adjoint_theta", "eq_adjoint_vtheta"};
  NcoResidualReport r;
  r.caveat = !spec.terminal.none();
  if (r.caveat) r.note = "terminal constraints present: costates near t = T are not checked against transversality";
  for (std::size_t i = 1; i + 1 < n; ++i) {
    if (!window.contains(tr.times[i])) continue;
    const State& x = tr.states[i];
    const Control& u = tr.controls[i];
    // central difference over [t_{i-1}, t_{i+1}] sees both neighbouring controls
    const Vector4 lam_dot = (tr.costates[i + 1].vec() - tr.costates[i - 1].vec()) / (2.0 * h);
    const Vector4 rhs = 0.5 * (adjoint_rhs(spec.model, spec.cost, x, u, tr.costates[i]).vec() +
                               adjoint_rhs(spec.model, spec.cost, x, tr.controls[i - 1], tr.costates[i]).vec());
    for (int k = 0; k < 4; ++k) {
      r.record(names[k], lam_dot[k] - rhs[k], std::max(std::abs(lam_dot[k]), std::abs(rhs[k])), tr.times[i]);
    }
    const CoState mid = CoState::from(0.5 * (tr.costates[i].vec() + tr.costates[i + 1].vec()));
    const State xm = State::from(0.5 * (x.vec() + tr.states[i + 1].vec()));
    const Eigen::VectorXd hu = stationarity_residual(spec.model, spec.cost, xm, u, mid);
    const CostGradient g = stage_cost_gradient(spec.model, spec.cost, xm, u);
    for (Eigen::Index k = 0; k < hu.size(); ++k) {
      r.record("eq_gradeq", hu[k], std::max(std::abs(g.du[k]), std::abs(hu[k] - g.du[k])), tr.times[i]);
    }
  }
  r.record("primal_dynamics", sol.max_defect, 1.0);
  r.finish(tol);
  return r;
}

CoState legendre_adjoint_transform(const MechModel& model, const HamState& z, const CoState& nu) {
  const double m11 = model.m11(z.s), m22 = model.m22(z.s);
  const double a = model.m11_d(z.s) / m11 * z.p_s;
  const double b = model.m22_d(z.s) / m22 * z.p_th;
  return {nu.l_s + a * nu.l_vs + b * nu.l_vth, m11 * nu.l_vs, nu.l_th, m22 * nu.l_vth};
}

CoState legendre_adjoint_inverse(const MechModel& model, const HamState& z, const CoState& lam) {
  const double m11 = model.m11(z.s), m22 = model.m22(z.s);
  const double n_ps = lam.l_vs / m11;
  const double n_pth = lam.l_vth / m22;
  const double a = model.m11_d(z.s) / m11 * z.p_s;
  const double b = model.m22_d(z.s) / m22 * z.p_th;
  return {lam.l_s - a * n_ps - b * n_pth, n_ps, lam.l_th, n_pth};
}

}  // namespace mtp
