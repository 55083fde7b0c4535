#include "mtp/model.hpp"

#include "mtp/error.hpp"

#include <cmath>
#include <random>
#include <sstream>

namespace mtp {

void Trajectory::validate() const {
  if (times.size() != states.size()) {
    throw Error(ErrorCode::invalid_argument, "trajectory: times and states differ in length");
  }
  if (!states.empty() && controls.size() + 1 != states.size()) {
    throw Error(ErrorCode::invalid_argument, "trajectory: expected one control per interval");
  }
  if (!costates.empty() && costates.size() != states.size()) {
    throw Error(ErrorCode::invalid_argument, "trajectory: expected one costate per node");
  }
  for (std::size_t i = 1; i < times.size(); ++i) {
    if (!(times[i] > times[i - 1])) {
      throw Error(ErrorCode::invalid_argument, "trajectory: time grid not strictly increasing");
    }
  }
}

void require_domain(const MechModel& model, double s, const char* where) {
  if (!(s > model.s_min)) {
    std::ostringstream os;
    os << where << ": shape coordinate s=" << s << " outside domain s > " << model.s_min;
    throw DomainError(os.str());
  }
}

double inv_mass_d(double m, double m_d) { return -m_d / (m * m); }

Vector4 el_rhs(const MechModel& model, const State& x, const Control& u) {
  require_domain(model, x.s, "el_rhs");
  const double m11 = model.m11(x.s);
  const double m22 = model.m22(x.s);
  const double m11d = model.m11_d(x.s);
  const double m22d = model.m22_d(x.s);
  Vector4 dx;
  dx[0] = x.v_s;
  dx[1] = (0.5 * m22d * x.v_th * x.v_th - 0.5 * m11d * x.v_s * x.v_s - model.pot_d(x.s) +
           model.f_s(u)) /
          m11;
  dx[2] = x.v_th;
  dx[3] = (-m22d * x.v_th * x.v_s + model.f_th(u)) / m22;
  return dx;
}

ElJacobians el_jacobians(const MechModel& model, const State& x, const Control& u) {
  require_domain(model, x.s, "el_jacobians");
  const double s = x.s, vs = x.v_s, vt = x.v_th;
  const double m11 = model.m11(s), m11d = model.m11_d(s), m11dd = model.m11_dd(s);
  const double m22 = model.m22(s), m22d = model.m22_d(s), m22dd = model.m22_dd(s);
  const double a = 1.0 / m11, ad = inv_mass_d(m11, m11d);
  const double b = 1.0 / m22, bd = inv_mass_d(m22, m22d);
  const double fs = model.f_s(u), ft = model.f_th(u);
  const double shape_force = 0.5 * m22d * vt * vt - 0.5 * m11d * vs * vs - model.pot_d(s) + fs;
  const double cyclic_force = -m22d * vt * vs + ft;

  ElJacobians j;
  j.fx.setZero();
  j.fx(0, 1) = 1.0;
  j.fx(1, 0) = ad * shape_force + a * (0.5 * m22dd * vt * vt - 0.5 * m11dd * vs * vs - model.pot_dd(s));
  j.fx(1, 1) = -a * m11d * vs;
  j.fx(1, 3) = a * m22d * vt;
  j.fx(2, 3) = 1.0;
  j.fx(3, 0) = bd * cyclic_force - b * m22dd * vt * vs;
  j.fx(3, 1) = -b * m22d * vt;
  j.fx(3, 3) = -b * m22d * vs;

  j.fu.setZero(4, model.control_dim);
  j.fu.row(1) = a * model.f_s_jac(u);
  j.fu.row(3) = b * model.f_th_jac(u);
  return j;
}

Vector4 ham_rhs(const MechModel& model, const HamState& z, const Control& u) {
  require_domain(model, z.s, "ham_rhs");
  const double m11 = model.m11(z.s), m22 = model.m22(z.s);
  const double a_d = inv_mass_d(m11, model.m11_d(z.s));
  const double b_d = inv_mass_d(m22, model.m22_d(z.s));
  Vector4 dz;
  dz[0] = z.p_s / m11;
  dz[1] = -0.5 * a_d * z.p_s * z.p_s - 0.5 * b_d * z.p_th * z.p_th - model.pot_d(z.s) + model.f_s(u);
  dz[2] = z.p_th / m22;
  dz[3] = model.f_th(u);
  return dz;
}

HamState legendre_to_ham(const MechModel& model, const State& x) {
  require_domain(model, x.s, "legendre_to_ham");
  return {x.s, model.m11(x.s) * x.v_s, x.th, model.m22(x.s) * x.v_th};
}

State legendre_to_el(const MechModel& model, const HamState& z) {
  require_domain(model, z.s, "legendre_to_el");
  return {z.s, z.p_s / model.m11(z.s), z.th, z.p_th / model.m22(z.s)};
}

double lagrangian(const MechModel& model, const State& x) {
  require_domain(model, x.s, "lagrangian");
  return 0.5 * (model.m11(x.s) * x.v_s * x.v_s + model.m22(x.s) * x.v_th * x.v_th) - model.pot(x.s);
}

double hamiltonian_energy(const MechModel& model, const HamState& z) {
  require_domain(model, z.s, "hamiltonian_energy");
  return 0.5 * (z.p_s * z.p_s / model.m11(z.s) + z.p_th * z.p_th / model.m22(z.s)) + model.pot(z.s);
}

double momentum(const MechModel& model, const State& x) {
  require_domain(model, x.s, "momentum");
  return model.m22(x.s) * x.v_th;
}

namespace {

State axpy(const State& x, double h, const Vector4& k) { return State::from(x.vec() + h * k); }

}  // namespace

State rk4_step(const MechModel& model, const State& x, const Control& u, double h) {
  const Vector4 k1 = el_rhs(model, x, u);
  const Vector4 k2 = el_rhs(model, axpy(x, 0.5 * h, k1), u);
  const Vector4 k3 = el_rhs(model, axpy(x, 0.5 * h, k2), u);
  const Vector4 k4 = el_rhs(model, axpy(x, h, k3), u);
  return State::from(x.vec() + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4));
}

Rk4Sensitivity rk4_step_sensitivity(const MechModel& model, const State& x, const Control& u,
                                    double h) {
  using MatU = Eigen::Matrix<double, 4, Eigen::Dynamic>;
  const Matrix4 id = Matrix4::Identity();

  const Vector4 k1 = el_rhs(model, x, u);
  const ElJacobians j1 = el_jacobians(model, x, u);
  const Matrix4 k1x = j1.fx;
  const MatU k1u = j1.fu;

  const State x2 = axpy(x, 0.5 * h, k1);
  const Vector4 k2 = el_rhs(model, x2, u);
  const ElJacobians j2 = el_jacobians(model, x2, u);
  const Matrix4 k2x = j2.fx * (id + 0.5 * h * k1x);
  const MatU k2u = j2.fx * (0.5 * h * k1u) + j2.fu;

  const State x3 = axpy(x, 0.5 * h, k2);
  const Vector4 k3 = el_rhs(model, x3, u);
  const ElJacobians j3 = el_jacobians(model, x3, u);
  const Matrix4 k3x = j3.fx * (id + 0.5 * h * k2x);
  const MatU k3u = j3.fx * (0.5 * h * k2u) + j3.fu;

  const State x4 = axpy(x, h, k3);
  const Vector4 k4 = el_rhs(model, x4, u);
  const ElJacobians j4 = el_jacobians(model, x4, u);
  const Matrix4 k4x = j4.fx * (id + h * k3x);
  const MatU k4u = j4.fx * (h * k3u) + j4.fu;

  Rk4Sensitivity out;
  out.next = State::from(x.vec() + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4));
  out.fx = id + (h / 6.0) * (k1x + 2.0 * k2x + 2.0 * k3x + k4x);
  out.fu = (h / 6.0) * (k1u + 2.0 * k2u + 2.0 * k3u + k4u);
  return out;
}

std::vector<double> uniform_grid(double horizon, int intervals) {
  if (intervals < 0 || !(horizon >= 0.0)) {
    throw Error(ErrorCode::invalid_argument, "uniform_grid: need horizon >= 0 and intervals >= 0");
  }
  std::vector<double> grid(static_cast<std::size_t>(intervals) + 1);
  for (int i = 0; i <= intervals; ++i) {
    grid[static_cast<std::size_t>(i)] = intervals == 0 ? 0.0 : horizon * i / intervals;
  }
  return grid;
}

Trajectory simulate(const MechModel& model, const State& x0, const std::vector<Control>& controls,
                    const std::vector<double>& grid) {
  if (grid.empty()) {
    throw Error(ErrorCode::invalid_argument, "simulate: empty grid");
  }
  if (controls.size() + 1 != grid.size()) {
    throw Error(ErrorCode::invalid_argument, "simulate: need one control per grid interval");
  }
  require_domain(model, x0.s, "simulate");
  Trajectory traj;
  traj.times = grid;
  traj.controls = controls;
  traj.states.reserve(grid.size());
  traj.states.push_back(x0);
  for (std::size_t i = 0; i + 1 < grid.size(); ++i) {
    const double h = grid[i + 1] - grid[i];
    if (!(h > 0.0)) {
      throw Error(ErrorCode::invalid_argument, "simulate: grid must be strictly increasing");
    }
    try {
      State next = rk4_step(model, traj.states.back(), controls[i], h);
      require_domain(model, next.s, "simulate");
      traj.states.push_back(next);
    } catch (const DomainError& e) {
      std::ostringstream os;
      os << "simulate: left domain during step starting at t=" << grid[i] << " (" << e.what() << ")";
      throw DomainError(os.str(), grid[i]);
    }
  }
  return traj;
}

namespace {

double central_diff(const ScalarFn& f, double s) {
  const double h = 1e-5 * std::max(1.0, std::abs(s));
  return (f(s + h) - f(s - h)) / (2.0 * h);
}

bool close(double analytic, double fd, double tol) {
  return std::abs(analytic - fd) <= tol * std::max(1.0, std::max(std::abs(analytic), std::abs(fd)));
}

}  // namespace

DerivativeReport check_derivatives(const MechModel& model, const DerivativeCheckOptions& opts) {
  DerivativeReport report;
  report.samples = opts.samples;
  report.tol = opts.tol;
  const double lo = opts.s_lo.value_or(model.s_min + 0.5);
  const double hi = opts.s_hi.value_or(lo + 10.0);
  std::mt19937 rng(opts.seed);
  std::uniform_real_distribution<double> s_dist(lo, hi);
  std::uniform_real_distribution<double> u_dist(-opts.u_range, opts.u_range);

  const auto check = [&](const char* name, const ScalarFn& base, const ScalarFn& deriv, double s) {
    const double a = deriv(s);
    const double fd = central_diff(base, s);
    if (!close(a, fd, opts.tol)) {
      report.violations.push_back({name, s, a, fd});
    }
  };

  for (int k = 0; k < opts.samples; ++k) {
    const double s = s_dist(rng);
    check("m11_d", model.m11, model.m11_d, s);
    check("m11_dd", model.m11_d, model.m11_dd, s);
    check("m22_d", model.m22, model.m22_d, s);
    check("m22_dd", model.m22_d, model.m22_dd, s);
    check("pot_d", model.pot, model.pot_d, s);
    check("pot_dd", model.pot_d, model.pot_dd, s);

    Control u(model.control_dim);
    for (int i = 0; i < model.control_dim; ++i) u[i] = u_dist(rng);
    const Eigen::RowVectorXd js = model.f_s_jac(u);
    const Eigen::RowVectorXd jt = model.f_th_jac(u);
    for (int i = 0; i < model.control_dim; ++i) {
      const auto component = [&](const ForcingFn& f) {
        return [&, i](double v) {
          Control w = u;
          w[i] = v;
          return f(w);
        };
      };
      const double fd_s = central_diff(component(model.f_s), u[i]);
      const double fd_t = central_diff(component(model.f_th), u[i]);
      if (!close(js[i], fd_s, opts.tol)) {
        report.violations.push_back({"f_s_jac[" + std::to_string(i) + "]", u[i], js[i], fd_s});
      }
      if (!close(jt[i], fd_t, opts.tol)) {
        report.violations.push_back({"f_th_jac[" + std::to_string(i) + "]", u[i], jt[i], fd_t});
      }
    }
  }
  return report;
}

}  // namespace mtp
