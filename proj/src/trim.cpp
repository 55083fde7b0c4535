#include "mtp/trim.hpp"

#include "mtp/error.hpp"

#include <cmath>
#include <limits>
#include <sstream>

namespace mtp {

double trim_residual(const MechModel& model, double s, double v_th, const Control& u) {
  require_domain(model, s, "trim_residual");
  return (0.5 * model.m22_d(s) * v_th * v_th - model.pot_d(s) + model.f_s(u)) / model.m11(s);
}

TrimGradients trim_residual_grads(const MechModel& model, double s, double v_th, const Control& u) {
  require_domain(model, s, "trim_residual_grads");
  const double m11 = model.m11(s);
  const double a_d = inv_mass_d(m11, model.m11_d(s));
  const double force = 0.5 * model.m22_d(s) * v_th * v_th - model.pot_d(s) + model.f_s(u);
  TrimGradients g;
  g.ds = a_d * force + (0.5 * model.m22_dd(s) * v_th * v_th - model.pot_dd(s)) / m11;
  g.dv_th = model.m22_d(s) * v_th / m11;
  g.du = model.f_s_jac(u) / m11;
  return g;
}

double forced_potential(const MechModel& model, double s, const Control& u) {
  require_domain(model, s, "forced_potential");
  return model.pot(s) - s * model.f_s(u);
}

AmendedPotential forced_amended_potential(const MechModel& model, double s, double mu,
                                          const Control& u) {
  require_domain(model, s, "forced_amended_potential");
  const double m22 = model.m22(s);
  AmendedPotential ap;
  ap.value = forced_potential(model, s, u) + 0.5 * mu * mu / m22;
  ap.grad_s = model.pot_d(s) + 0.5 * mu * mu * inv_mass_d(m22, model.m22_d(s)) - model.f_s(u);
  return ap;
}

TrimPoint solve_trim(const MechModel& model, const TrimRequest& req) {
  if (req.unknown == TrimUnknown::control &&
      (req.control_index < 0 || req.control_index >= model.control_dim)) {
    throw Error(ErrorCode::invalid_argument, "solve_trim: control_index out of range");
  }
  if (req.u.size() != model.control_dim) {
    throw Error(ErrorCode::invalid_argument, "solve_trim: control vector has wrong dimension");
  }

  double s = req.s;
  double v = req.v_th;
  Control u = req.u;
  auto assign = [&](double value) {
    switch (req.unknown) {
      case TrimUnknown::shape: s = value; break;
      case TrimUnknown::cyclic_velocity: v = value; break;
      case TrimUnknown::control: u[req.control_index] = value; break;
    }
  };
  auto derivative = [&] {
    const TrimGradients g = trim_residual_grads(model, s, v, u);
    switch (req.unknown) {
      case TrimUnknown::shape: return g.ds;
      case TrimUnknown::cyclic_velocity: return g.dv_th;
      case TrimUnknown::control: return g.du[req.control_index];
    }
    return 0.0;
  };
  // Residual that treats leaving the shape domain as an infinitely bad iterate.
  auto residual_at = [&](double value) {
    assign(value);
    if (!(s > model.s_min)) return std::numeric_limits<double>::infinity();
    return trim_residual(model, s, v, u);
  };

  double z = req.guess;
  double r = residual_at(z);
  if (!std::isfinite(r)) {
    throw Error(ErrorCode::invalid_argument, "solve_trim: initial guess outside the model domain");
  }
  int iter = 0;
  while (std::abs(r) > req.tol) {
    if (iter >= req.max_iter) {
      std::ostringstream os;
      os << "solve_trim: no convergence after " << req.max_iter << " iterations, |T|=" << std::abs(r);
      throw Error(ErrorCode::not_converged, os.str());
    }
    assign(z);
    const double d = derivative();
    if (d == 0.0 || !std::isfinite(d)) {
      throw Error(ErrorCode::not_converged, "solve_trim: singular Newton step");
    }
    const double step = -r / d;
    double t = 1.0;
    double z_new = z + step;
    double r_new = residual_at(z_new);
    for (int halvings = 0; halvings < 20 && !(std::abs(r_new) < std::abs(r)); ++halvings) {
      t *= 0.5;
      z_new = z + t * step;
      r_new = residual_at(z_new);
    }
    if (!std::isfinite(r_new)) {
      throw Error(ErrorCode::not_converged, "solve_trim: damped step left the model domain");
    }
    z = z_new;
    r = r_new;
    ++iter;
  }
  assign(z);

  TrimPoint tp;
  tp.s = s;
  tp.v_th = v;
  tp.u = u;
  tp.residual = r;
  tp.trim_tol = req.tol;
  tp.iterations = iter;
  return tp;
}

Trajectory trim_trajectory(const TrimPoint& tp, const MechModel& model, double th0,
                           const std::vector<double>& grid) {
  require_domain(model, tp.s, "trim_trajectory");
  if (grid.empty()) {
    throw Error(ErrorCode::invalid_argument, "trim_trajectory: empty grid");
  }
  Trajectory traj;
  traj.times = grid;
  const double t0 = grid.front();
  for (double t : grid) {
    traj.states.push_back({tp.s, 0.0, th0 + tp.v_th * (t - t0), tp.v_th});
  }
  traj.controls.assign(grid.size() - 1, tp.u);
  return traj;
}

namespace {

// min over u of |T(s, v_th, u)|: minimum-norm Newton, then a coarse scan if it stalls.
double min_abs_trim_residual(const MechModel& model, double s, double v_th, bool& fallback) {
  Control u = Control::Zero(model.control_dim);
  double r = trim_residual(model, s, v_th, u);
  for (int it = 0; it < 50 && std::abs(r) > 1e-12; ++it) {
    const Eigen::RowVectorXd g = trim_residual_grads(model, s, v_th, u).du;
    const double gg = g.squaredNorm();
    if (gg == 0.0 || !std::isfinite(gg)) break;
    const Control trial = u - (r / gg) * g.transpose();
    const double r_trial = trim_residual(model, s, v_th, trial);
    if (!(std::abs(r_trial) < std::abs(r))) break;
    u = trial;
    r = r_trial;
  }
  if (std::abs(r) <= 1e-10) return std::abs(r);

  fallback = true;
  double best = std::abs(r);
  constexpr int kPoints = 201;
  constexpr double kRange = 10.0;
  for (int i = 0; i < model.control_dim; ++i) {
    for (int k = 0; k < kPoints; ++k) {
      Control w = Control::Zero(model.control_dim);
      w[i] = -kRange + 2.0 * kRange * k / (kPoints - 1);
      best = std::min(best, std::abs(trim_residual(model, s, v_th, w)));
    }
  }
  return best;
}

}  // namespace

ManifoldDistance manifold_distance_detail(const MechModel& model, const State& x) {
  require_domain(model, x.s, "manifold_distance");
  ManifoldDistance d;
  if (model.forcing_surjective) {
    d.value = std::abs(x.v_s);
    return d;
  }
  d.surrogate = true;
  d.value = std::abs(x.v_s) + min_abs_trim_residual(model, x.s, x.v_th, d.used_fallback);
  return d;
}

double manifold_distance(const MechModel& model, const State& x) {
  return manifold_distance_detail(model, x).value;
}

double combined_residual(const MechModel& model, const State& x, const Control& u, double w) {
  const double t = trim_residual(model, x.s, x.v_th, u);
  return std::sqrt(x.v_s * x.v_s + w * t * t);
}

}  // namespace mtp
