#include "mtp/ocp.hpp"

#include "mtp/error.hpp"
#include "mtp/trim.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <memory>
#include <sstream>

namespace mtp {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
using Triplets = std::vector<Eigen::Triplet<double>>;

double elapsed(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

Control cost_u_ref(const StageCost& cost, int m) {
  if (const auto* q = std::get_if<QuadraticCost>(&cost)) return q->u_ref;
  if (const auto* t = std::get_if<TrimPenaltyCost>(&cost)) return t->u_ref;
  return Control::Zero(m);
}

void check_bounds(const ControlBounds& b, int m) {
  if ((b.lower.size() != 0 && b.lower.size() != m) || (b.upper.size() != 0 && b.upper.size() != m)) {
    throw Error(ErrorCode::invalid_argument, "control bounds need control_dim entries");
  }
}

void set_control_bounds(const ControlBounds& b, int m, int offset, Vec& lower, Vec& upper) {
  for (int k = 0; k < m; ++k) {
    if (b.lower.size()) lower[offset + k] = b.lower[k];
    if (b.upper.size()) upper[offset + k] = b.upper[k];
  }
}

// Central-difference Jacobian of a block gradient, symmetrized and convexified.
template <class GradFn>
Eigen::MatrixXd fd_block_hessian(const Vec& point, GradFn&& grad, double floor) {
  const Eigen::Index n = point.size();
  Eigen::MatrixXd hb(n, n);
  for (Eigen::Index k = 0; k < n; ++k) {
    const double step = 1e-6 * std::max(1.0, std::abs(point[k]));
    Vec p = point, q = point;
    p[k] += step;
    q[k] -= step;
    hb.col(k) = (grad(p) - grad(q)) / (2.0 * step);
  }
  hb = 0.5 * (hb + hb.transpose()).eval();
  convexify(hb, floor);
  return hb;
}

void scatter(Triplets& trip, const Eigen::MatrixXd& block, const std::vector<int>& index) {
  for (int c = 0; c < block.cols(); ++c) {
    for (int r = 0; r < block.rows(); ++r) {
      if (block(r, c) != 0.0) trip.emplace_back(index[r], index[c], block(r, c));
    }
  }
}

}  // namespace

void OcpSpec::validate() const {
  if (!(horizon > 0.0)) throw Error(ErrorCode::invalid_argument, "ocp: horizon must be positive");
  if (intervals < 1) throw Error(ErrorCode::invalid_argument, "ocp: intervals must be >= 1");
  validate_cost(cost, model);
  require_domain(model, x0.s, "ocp initial state");
  for (const auto& f : terminal.fixed) {
    if (f.index < 0 || f.index > 3) {
      throw Error(ErrorCode::invalid_argument, "ocp: terminal component index outside 0..3");
    }
  }
  if (terminal.general && (terminal.general->count < 1 || !terminal.general->psi || !terminal.general->jacobian)) {
    throw Error(ErrorCode::invalid_argument, "ocp: general terminal constraint incomplete");
  }
  check_bounds(bounds, model.control_dim);
  if (warm_start) {
    warm_start->validate();
    if (warm_start->size() != static_cast<std::size_t>(intervals + 1)) {
      throw Error(ErrorCode::invalid_argument, "ocp: warm start must have intervals + 1 nodes");
    }
  }
}

OcpLayout ocp_layout(const OcpSpec& spec) { return {spec.intervals + 1, spec.model.control_dim}; }

NlpProblem transcribe(const OcpSpec& spec_in, const OcpOptions& opts) {
  spec_in.validate();
  // the callbacks own a copy so the problem outlives the caller's spec
  auto sp = std::make_shared<const OcpSpec>(spec_in);
  const OcpLayout lay = ocp_layout(*sp);
  const int n_int = sp->intervals;
  const int m = lay.m;
  const double h = sp->horizon / n_int;
  const int n_fixed = static_cast<int>(sp->terminal.fixed.size());

  auto state_at = [lay](const Vec& z, int i) { return State::from(z.segment<4>(lay.x(i))); };
  auto control_at = [lay, m](const Vec& z, int i) { return Control(z.segment(lay.u(i), m)); };

  NlpProblem p;
  p.n = lay.size();
  p.objective = [=](const Vec& z) {
    double f = 0.0;
    for (int i = 0; i < n_int; ++i) f += h * stage_cost(sp->model, sp->cost, state_at(z, i), control_at(z, i));
    return f;
  };
  p.gradient = [=](const Vec& z) {
    Vec g = Vec::Zero(z.size());
    for (int i = 0; i < n_int; ++i) {
      const CostGradient cg = stage_cost_gradient(sp->model, sp->cost, state_at(z, i), control_at(z, i));
      g.segment<4>(lay.x(i)) = h * cg.dx;
      g.segment(lay.u(i), m) = h * cg.du;
    }
    return g;
  };

  p.n_eq = 4 + 4 * n_int + n_fixed;
  p.eq = [=](const Vec& z) {
    Vec c(4 + 4 * n_int + n_fixed);
    c.head<4>() = z.segment<4>(0) - sp->x0.vec();
    for (int i = 0; i < n_int; ++i) {
      const State next = rk4_step(sp->model, state_at(z, i), control_at(z, i), h);
      c.segment<4>(4 + 4 * i) = z.segment<4>(lay.x(i + 1)) - next.vec();
    }
    for (int k = 0; k < n_fixed; ++k) {
      const auto& f = sp->terminal.fixed[k];
      c[4 + 4 * n_int + k] = z[lay.x(n_int) + f.index] - f.value;
    }
    return c;
  };
  p.eq_jac = [=](const Vec& z) {
    Triplets trip;
    trip.reserve(static_cast<std::size_t>(4 + n_int * (4 + 16 + 4 * m) + n_fixed));
    for (int r = 0; r < 4; ++r) trip.emplace_back(r, r, 1.0);
    for (int i = 0; i < n_int; ++i) {
      const Rk4Sensitivity sens = rk4_step_sensitivity(sp->model, state_at(z, i), control_at(z, i), h);
      const int row = 4 + 4 * i;
      for (int r = 0; r < 4; ++r) {
        trip.emplace_back(row + r, lay.x(i + 1) + r, 1.0);
        for (int c = 0; c < 4; ++c) {
          if (sens.fx(r, c) != 0.0) trip.emplace_back(row + r, lay.x(i) + c, -sens.fx(r, c));
        }
        for (int c = 0; c < m; ++c) {
          if (sens.fu(r, c) != 0.0) trip.emplace_back(row + r, lay.u(i) + c, -sens.fu(r, c));
        }
      }
    }
    for (int k = 0; k < n_fixed; ++k) {
      trip.emplace_back(4 + 4 * n_int + k, lay.x(n_int) + sp->terminal.fixed[k].index, 1.0);
    }
    SpMat j(4 + 4 * n_int + n_fixed, lay.size());
    j.setFromTriplets(trip.begin(), trip.end());
    return j;
  };

  if (sp->terminal.general) {
    const int q = sp->terminal.general->count;
    p.n_in = q;
    p.ineq = [=](const Vec& z) { return Vec(sp->terminal.general->psi(state_at(z, n_int))); };
    p.ineq_jac = [=](const Vec& z) {
      const Eigen::MatrixXd jt = sp->terminal.general->jacobian(state_at(z, n_int));
      Triplets trip;
      for (int r = 0; r < q; ++r) {
        for (int c = 0; c < 4; ++c) trip.emplace_back(r, lay.x(n_int) + c, jt(r, c));
      }
      SpMat j(q, lay.size());
      j.setFromTriplets(trip.begin(), trip.end());
      return j;
    };
  }

  p.lower = Vec::Constant(lay.size(), -kInf);
  p.upper = Vec::Constant(lay.size(), kInf);
  for (int i = 0; i <= n_int; ++i) p.lower[lay.x(i)] = sp->model.s_min + opts.domain_margin;
  for (int i = 0; i < n_int; ++i) set_control_bounds(sp->bounds, m, lay.u(i), p.lower, p.upper);

  for (int i = 0; i < n_int; ++i) p.hessian_blocks.emplace_back(lay.x(i), 4 + m);
  p.hessian_blocks.emplace_back(lay.x(n_int), 4);

  const double floor = 1e-8;
  p.lagrangian_hessian = [=](const Vec& z, const Vec& mu, const Vec& lam) {
    Triplets trip;
    std::vector<int> index(4 + m);
    for (int i = 0; i < n_int; ++i) {
      const Vec mu_i = mu.segment<4>(4 + 4 * i);
      auto grad = [&](const Vec& w) {
        const State x = State::from(w.head<4>());
        const Control u = w.tail(m);
        const CostGradient cg = stage_cost_gradient(sp->model, sp->cost, x, u);
        const Rk4Sensitivity sens = rk4_step_sensitivity(sp->model, x, u, h);
        Vec g(4 + m);
        g.head<4>() = h * cg.dx - sens.fx.transpose() * mu_i;
        g.tail(m) = h * cg.du - sens.fu.transpose() * mu_i;
        return g;
      };
      Vec w(4 + m);
      w << z.segment<4>(lay.x(i)), z.segment(lay.u(i), m);
      for (int k = 0; k < 4 + m; ++k) index[k] = lay.x(i) + k;
      try {
        scatter(trip, fd_block_hessian(w, grad, floor), index);
      } catch (const DomainError&) {
        for (int k = 0; k < 4 + m; ++k) trip.emplace_back(index[k], index[k], 1.0);
      }
    }
    if (sp->terminal.general && lam.size()) {
      auto grad = [&](const Vec& w) {
        return Vec(sp->terminal.general->jacobian(State::from(w.head<4>())).transpose() * lam);
      };
      const Vec w = z.segment<4>(lay.x(n_int));
      scatter(trip, fd_block_hessian(w, grad, floor), {lay.x(n_int), lay.x(n_int) + 1, lay.x(n_int) + 2,
                                                        lay.x(n_int) + 3});
    }
    SpMat hm(lay.size(), lay.size());
    hm.setFromTriplets(trip.begin(), trip.end());
    return hm;
  };

  p.gauss_newton_hessian = [=](const Vec& z) {
    // curvature of the stage cost only, by differences of its gradient
    Triplets trip;
    std::vector<int> index(4 + m);
    for (int i = 0; i < n_int; ++i) {
      auto grad = [&](const Vec& w) {
        const CostGradient cg = stage_cost_gradient(sp->model, sp->cost, State::from(w.head<4>()), w.tail(m));
        Vec g(4 + m);
        g << h * cg.dx, h * cg.du;
        return g;
      };
      Vec w(4 + m);
      w << z.segment<4>(lay.x(i)), z.segment(lay.u(i), m);
      for (int k = 0; k < 4 + m; ++k) index[k] = lay.x(i) + k;
      scatter(trip, fd_block_hessian(w, grad, floor), index);
    }
    SpMat hm(lay.size(), lay.size());
    hm.setFromTriplets(trip.begin(), trip.end());
    return hm;
  };
  return p;
}

Vec initial_guess(const OcpSpec& spec) {
  const OcpLayout lay = ocp_layout(spec);
  const int m = lay.m;
  Vec z(lay.size());
  if (spec.warm_start) {
    const Trajectory& w = *spec.warm_start;
    for (int i = 0; i < lay.n_nodes; ++i) z.segment<4>(lay.x(i)) = w.states[i].vec();
    for (int i = 0; i + 1 < lay.n_nodes; ++i) z.segment(lay.u(i), m) = w.controls[i];
    return z;
  }
  const Control u = cost_u_ref(spec.cost, m);
  for (int i = 0; i < lay.n_nodes; ++i) z.segment<4>(lay.x(i)) = spec.x0.vec();
  for (int i = 0; i + 1 < lay.n_nodes; ++i) z.segment(lay.u(i), m) = u;
  return z;
}

std::vector<CoState> recover_costates(const OcpSpec& spec, const NlpSolution& nlp) {
  const int n_int = spec.intervals;
  if (nlp.mult_eq.size() < 4 + 4 * n_int) {
    throw Error(ErrorCode::invalid_argument, "recover_costates: multiplier vector too short");
  }
  std::vector<CoState> lam(static_cast<std::size_t>(n_int + 1));
  lam[0] = CoState::from(-nlp.mult_eq.segment<4>(0));
  for (int i = 0; i < n_int; ++i) lam[i + 1] = CoState::from(-nlp.mult_eq.segment<4>(4 + 4 * i));
  return lam;
}

std::vector<double> stage_costs(const MechModel& model, const StageCost& cost, const Trajectory& traj) {
  std::vector<double> out;
  out.reserve(traj.controls.size());
  for (std::size_t i = 0; i < traj.controls.size(); ++i) {
    out.push_back(stage_cost(model, cost, traj.states[i], traj.controls[i]));
  }
  return out;
}

OcpSolution solve_ocp(const OcpSpec& spec, const OcpOptions& opts) {
  const auto start = std::chrono::steady_clock::now();
  const NlpProblem p = transcribe(spec, opts);
  const OcpLayout lay = ocp_layout(spec);
  const int n_int = spec.intervals;
  const int m = lay.m;

  OcpSolution out;
  out.nlp = solve_sqp(p, initial_guess(spec), opts.sqp);
  const Vec& z = out.nlp.x_star;
  out.status = out.nlp.status;
  out.kkt = out.nlp.kkt;
  out.iterations = out.nlp.iterations;
  out.objective = out.nlp.objective;

  Trajectory& tr = out.trajectory;
  tr.times = uniform_grid(spec.horizon, n_int);
  for (int i = 0; i <= n_int; ++i) tr.states.push_back(State::from(z.segment<4>(lay.x(i))));
  for (int i = 0; i < n_int; ++i) tr.controls.emplace_back(z.segment(lay.u(i), m));
  if (out.nlp.mult_eq.size() == p.n_eq) {
    tr.costates = recover_costates(spec, out.nlp);
    const int n_fixed = static_cast<int>(spec.terminal.fixed.size());
    out.terminal_multipliers.resize(n_fixed + p.n_in);
    out.terminal_multipliers.head(n_fixed) = out.nlp.mult_eq.tail(n_fixed);
    if (p.n_in) out.terminal_multipliers.tail(p.n_in) = out.nlp.mult_ineq;
  }

  try {
    const Vec c = p.eq(z);
    out.initial_error = c.head<4>().lpNorm<Eigen::Infinity>();
    out.max_defect = c.segment(4, 4 * n_int).lpNorm<Eigen::Infinity>();
  } catch (const DomainError&) {
    out.max_defect = kInf;
    out.warnings.emplace_back("dynamics could not be evaluated at the returned iterate");
  }
  if (out.status == NlpStatus::converged && spec.terminal.none() && !tr.costates.empty() &&
      tr.costates.back().vec().lpNorm<Eigen::Infinity>() > 1e-6) {
    std::ostringstream os;
    os << "terminal costate " << tr.costates.back().vec().lpNorm<Eigen::Infinity>()
       << " exceeds 1e-6 without terminal constraints";
    out.warnings.push_back(os.str());
  }
  if (out.status != NlpStatus::converged) {
    out.warnings.push_back(std::string("nlp status ") + to_string(out.status));
  }
  out.seconds = elapsed(start);
  return out;
}

// ---------------------------------------------------------------------------
// Reduced problem

namespace {

struct TocpLayout {
  int n_int = 0;
  int m = 0;
  [[nodiscard]] int th(int i) const { return 1 + i * (2 + m); }
  [[nodiscard]] int v(int i) const { return th(i) + 1; }
  [[nodiscard]] int u(int i) const { return th(i) + 2; }
  [[nodiscard]] int size() const { return 1 + n_int * (2 + m) + 2; }
};

// One RK4 step of th' = v, v' = a with a constant over the step; RK4 is exact here.
struct ReducedStep {
  double th = 0.0, v = 0.0;
  double a = 0.0, da_ds = 0.0;
  Eigen::RowVectorXd da_du;
};

ReducedStep reduced_step(const MechModel& model, double s, double th, double v, const Control& u, double h) {
  require_domain(model, s, "reduced dynamics");
  const double m22 = model.m22(s);
  ReducedStep r;
  r.a = model.f_th(u) / m22;
  r.da_ds = inv_mass_d(m22, model.m22_d(s)) * model.f_th(u);
  r.da_du = model.f_th_jac(u) / m22;
  r.th = th + h * v + 0.5 * h * h * r.a;
  r.v = v + h * r.a;
  return r;
}

}  // namespace

TocpSpec tocp_from_ocp(const OcpSpec& spec) {
  TocpSpec t;
  t.model = spec.model;
  t.cost = spec.cost;
  t.th0 = spec.x0.th;
  t.v_th0 = spec.x0.v_th;
  t.horizon = spec.horizon;
  t.intervals = spec.intervals;
  t.s_guess = spec.x0.s;
  t.bounds = spec.bounds;
  return t;
}

Trajectory TocpSolution::trajectory() const {
  Trajectory tr;
  tr.times = times;
  for (std::size_t i = 0; i < times.size(); ++i) tr.states.push_back({s_bar, 0.0, theta[i], v_theta[i]});
  tr.controls = u;
  return tr;
}

TocpSolution solve_tocp(const TocpSpec& spec_in, const OcpOptions& opts) {
  const auto start = std::chrono::steady_clock::now();
  if (!(spec_in.horizon > 0.0) || spec_in.intervals < 1) {
    throw Error(ErrorCode::invalid_argument, "tocp: horizon > 0 and intervals >= 1 required");
  }
  validate_cost(spec_in.cost, spec_in.model);
  check_bounds(spec_in.bounds, spec_in.model.control_dim);
  auto sp = std::make_shared<const TocpSpec>(spec_in);
  const int n_int = sp->intervals;
  const int m = sp->model.control_dim;
  const TocpLayout lay{n_int, m};
  const double h = sp->horizon / n_int;

  auto ctrl = [lay, m](const Vec& z, int i) { return Control(z.segment(lay.u(i), m)); };
  auto node_state = [lay](const Vec& z, int i) { return State{z[0], 0.0, z[lay.th(i)], z[lay.v(i)]}; };

  NlpProblem p;
  p.n = lay.size();
  p.objective = [=](const Vec& z) {
    double f = 0.0;
    for (int i = 0; i < n_int; ++i) f += h * stage_cost(sp->model, sp->cost, node_state(z, i), ctrl(z, i));
    return f;
  };
  p.gradient = [=](const Vec& z) {
    Vec g = Vec::Zero(z.size());
    for (int i = 0; i < n_int; ++i) {
      const CostGradient cg = stage_cost_gradient(sp->model, sp->cost, node_state(z, i), ctrl(z, i));
      g[0] += h * cg.dx[0];
      g[lay.v(i)] = h * cg.dx[3];
      g.segment(lay.u(i), m) = h * cg.du;
    }
    return g;
  };

  // rows: initial (2), defects (2N), trim path constraints (N)
  const int n_eq = 2 + 3 * n_int;
  const int trim_row = 2 + 2 * n_int;
  p.n_eq = n_eq;
  p.eq = [=](const Vec& z) {
    Vec c(n_eq);
    c[0] = z[lay.th(0)] - sp->th0;
    c[1] = z[lay.v(0)] - sp->v_th0;
    for (int i = 0; i < n_int; ++i) {
      const ReducedStep r = reduced_step(sp->model, z[0], z[lay.th(i)], z[lay.v(i)], ctrl(z, i), h);
      c[2 + 2 * i] = z[lay.th(i + 1)] - r.th;
      c[3 + 2 * i] = z[lay.v(i + 1)] - r.v;
      c[trim_row + i] = trim_residual(sp->model, z[0], z[lay.v(i)], ctrl(z, i));
    }
    return c;
  };
  p.eq_jac = [=](const Vec& z) {
    Triplets trip;
    trip.emplace_back(0, lay.th(0), 1.0);
    trip.emplace_back(1, lay.v(0), 1.0);
    for (int i = 0; i < n_int; ++i) {
      const Control u = ctrl(z, i);
      const ReducedStep r = reduced_step(sp->model, z[0], z[lay.th(i)], z[lay.v(i)], u, h);
      const int rt = 2 + 2 * i, rv = 3 + 2 * i;
      trip.emplace_back(rt, lay.th(i + 1), 1.0);
      trip.emplace_back(rt, lay.th(i), -1.0);
      trip.emplace_back(rt, lay.v(i), -h);
      trip.emplace_back(rt, 0, -0.5 * h * h * r.da_ds);
      trip.emplace_back(rv, lay.v(i + 1), 1.0);
      trip.emplace_back(rv, lay.v(i), -1.0);
      trip.emplace_back(rv, 0, -h * r.da_ds);
      for (int k = 0; k < m; ++k) {
        trip.emplace_back(rt, lay.u(i) + k, -0.5 * h * h * r.da_du[k]);
        trip.emplace_back(rv, lay.u(i) + k, -h * r.da_du[k]);
      }
      const TrimGradients tg = trim_residual_grads(sp->model, z[0], z[lay.v(i)], u);
      trip.emplace_back(trim_row + i, 0, tg.ds);
      trip.emplace_back(trim_row + i, lay.v(i), tg.dv_th);
      for (int k = 0; k < m; ++k) trip.emplace_back(trim_row + i, lay.u(i) + k, tg.du[k]);
    }
    SpMat j(n_eq, lay.size());
    j.setFromTriplets(trip.begin(), trip.end());
    return j;
  };

  p.lower = Vec::Constant(lay.size(), -kInf);
  p.upper = Vec::Constant(lay.size(), kInf);
  p.lower[0] = sp->model.s_min + opts.domain_margin;
  for (int i = 0; i < n_int; ++i) set_control_bounds(sp->bounds, m, lay.u(i), p.lower, p.upper);

  const double floor = 1e-8;
  p.lagrangian_hessian = [=](const Vec& z, const Vec& mu, const Vec& /*lam*/) {
    Triplets trip;
    std::vector<int> index(3 + m);
    for (int i = 0; i < n_int; ++i) {
      const double mu_t = mu[2 + 2 * i], mu_v = mu[3 + 2 * i], mu_trim = mu[trim_row + i];
      // block variables (s_bar, th_i, v_i, u_i)
      auto grad = [&](const Vec& w) {
        const double s = w[0], v = w[2];
        const Control u = w.tail(m);
        const State x{s, 0.0, w[1], v};
        const CostGradient cg = stage_cost_gradient(sp->model, sp->cost, x, u);
        const ReducedStep r = reduced_step(sp->model, s, w[1], v, u, h);
        const TrimGradients tg = trim_residual_grads(sp->model, s, v, u);
        Vec g = Vec::Zero(3 + m);
        g[0] = h * cg.dx[0] + mu_t * (-0.5 * h * h * r.da_ds) + mu_v * (-h * r.da_ds) + mu_trim * tg.ds;
        g[1] = -mu_t;
        g[2] = h * cg.dx[3] - mu_t * h - mu_v + mu_trim * tg.dv_th;
        g.tail(m) = h * cg.du + (mu_t * (-0.5 * h * h) + mu_v * (-h)) * r.da_du.transpose() +
                    mu_trim * tg.du.transpose();
        return g;
      };
      Vec w(3 + m);
      w << z[0], z[lay.th(i)], z[lay.v(i)], z.segment(lay.u(i), m);
      index[0] = 0;
      index[1] = lay.th(i);
      index[2] = lay.v(i);
      for (int k = 0; k < m; ++k) index[3 + k] = lay.u(i) + k;
      try {
        scatter(trip, fd_block_hessian(w, grad, floor), index);
      } catch (const DomainError&) {
        for (int k = 0; k < 3 + m; ++k) trip.emplace_back(index[k], index[k], 1.0);
      }
    }
    trip.emplace_back(lay.th(n_int), lay.th(n_int), floor);
    trip.emplace_back(lay.v(n_int), lay.v(n_int), floor);
    SpMat hm(lay.size(), lay.size());
    hm.setFromTriplets(trip.begin(), trip.end());
    return hm;
  };

  Vec z0(lay.size());
  z0[0] = sp->s_guess;
  const Control u0 = cost_u_ref(sp->cost, m);
  for (int i = 0; i <= n_int; ++i) {
    z0[lay.th(i)] = sp->th0 + sp->v_th0 * h * i;
    z0[lay.v(i)] = sp->v_th0;
    if (i < n_int) z0.segment(lay.u(i), m) = u0;
  }

  const NlpSolution nlp = solve_sqp(p, z0, opts.sqp);
  const Vec& z = nlp.x_star;
  TocpSolution out;
  out.status = nlp.status;
  out.kkt = nlp.kkt;
  out.iterations = nlp.iterations;
  out.objective = nlp.objective;
  out.s_bar = z[0];
  out.times = uniform_grid(sp->horizon, n_int);
  for (int i = 0; i <= n_int; ++i) {
    out.theta.push_back(z[lay.th(i)]);
    out.v_theta.push_back(z[lay.v(i)]);
  }
  for (int i = 0; i < n_int; ++i) out.u.push_back(ctrl(z, i));
  if (nlp.mult_eq.size() == n_eq) {
    out.l_theta.push_back(-nlp.mult_eq[0]);
    out.l_vtheta.push_back(-nlp.mult_eq[1]);
    for (int i = 0; i < n_int; ++i) {
      out.l_theta.push_back(-nlp.mult_eq[2 + 2 * i]);
      out.l_vtheta.push_back(-nlp.mult_eq[3 + 2 * i]);
      out.l_trim.push_back(nlp.mult_eq[trim_row + i] / h);
    }
  }
  for (int i = 0; i < n_int; ++i) {
    try {
      out.max_trim_residual =
          std::max(out.max_trim_residual, std::abs(trim_residual(sp->model, out.s_bar, out.v_theta[i], out.u[i])));
    } catch (const DomainError&) {
      out.max_trim_residual = kInf;
    }
  }
  out.seconds = elapsed(start);
  return out;
}

// ---------------------------------------------------------------------------
// Steady-state problem

SqpOptions sop_default_options() {
  SqpOptions o;
  o.hessian = HessianMode::exact;
  o.tol = 1e-10;
  return o;
}

SopSolution solve_sop(const MechModel& model_in, const StageCost& cost_in, const SopGuess& guess,
                      const SqpOptions& opts) {
  validate_cost(cost_in, model_in);
  const int m = model_in.control_dim;
  if (guess.u.size() != m) throw Error(ErrorCode::invalid_argument, "solve_sop: guess.u needs control_dim entries");
  auto model = std::make_shared<const MechModel>(model_in);
  auto cost = std::make_shared<const StageCost>(cost_in);
  const bool cyclic = !model->orthogonal_forcing;

  auto split = [m](const Vec& z) { return std::pair{State{z[0], 0.0, 0.0, z[1]}, Control(z.tail(m))}; };

  NlpProblem p;
  p.n = 2 + m;
  p.objective = [=](const Vec& z) {
    const auto [x, u] = split(z);
    return stage_cost(*model, *cost, x, u);
  };
  p.gradient = [=](const Vec& z) {
    const auto [x, u] = split(z);
    const CostGradient cg = stage_cost_gradient(*model, *cost, x, u);
    Vec g(2 + m);
    g << cg.dx[0], cg.dx[3], cg.du;
    return g;
  };
  p.n_eq = cyclic ? 2 : 1;
  p.eq = [=](const Vec& z) {
    const auto [x, u] = split(z);
    Vec c(cyclic ? 2 : 1);
    c[0] = trim_residual(*model, x.s, x.v_th, u);
    if (cyclic) c[1] = model->f_th(u);
    return c;
  };
  p.eq_jac = [=](const Vec& z) {
    const auto [x, u] = split(z);
    const TrimGradients tg = trim_residual_grads(*model, x.s, x.v_th, u);
    Eigen::MatrixXd j = Eigen::MatrixXd::Zero(cyclic ? 2 : 1, 2 + m);
    j(0, 0) = tg.ds;
    j(0, 1) = tg.dv_th;
    j.block(0, 2, 1, m) = tg.du;
    if (cyclic) j.block(1, 2, 1, m) = model->f_th_jac(u);
    return SpMat(j.sparseView());
  };
  p.lower = Vec::Constant(2 + m, -kInf);
  p.upper = Vec::Constant(2 + m, kInf);
  p.lower[0] = model->s_min + 1e-6;

  Vec z0(2 + m);
  z0 << guess.s, guess.v_th, guess.u;
  const NlpSolution nlp = solve_sqp(p, z0, opts);
  SopSolution out;
  out.s_bar = nlp.x_star[0];
  out.v_theta_bar = nlp.x_star[1];
  out.u_bar = nlp.x_star.tail(m);
  out.cyclic_constraint = cyclic;
  if (nlp.mult_eq.size() == p.n_eq) {
    out.lambda = nlp.mult_eq[0];
    if (cyclic) out.lambda_cyclic = nlp.mult_eq[1];
  }
  out.objective = nlp.objective;
  out.status = nlp.status;
  out.kkt = nlp.kkt;
  out.iterations = nlp.iterations;
  try {
    out.trim_residual = trim_residual(*model, out.s_bar, out.v_theta_bar, out.u_bar);
  } catch (const DomainError&) {
    out.trim_residual = kInf;
  }
  return out;
}

}  // namespace mtp
