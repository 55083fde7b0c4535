#include "mtp/nlp.hpp"

#include "mtp/error.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <optional>
#include <sstream>

namespace mtp {

const char* to_string(NlpStatus status) {
  switch (status) {
    case NlpStatus::converged: return "converged";
    case NlpStatus::max_iter: return "maxiter";
    case NlpStatus::infeasible: return "infeasible";
    case NlpStatus::evaluation_error: return "evaluation_error";
    case NlpStatus::line_search_failure: return "line_search_failure";
  }
  return "unknown";
}

void damped_bfgs_update(Eigen::MatrixXd& b, const Vec& s, const Vec& y) {
  const double ss = s.squaredNorm();
  if (ss == 0.0) return;
  const Vec bs = b * s;
  const double sbs = s.dot(bs);
  if (!(sbs > 0.0)) return;
  double sy = s.dot(y);
  Vec r = y;
  if (sy < 0.2 * sbs) {
    const double theta = 0.8 * sbs / (sbs - sy);
    r = theta * y + (1.0 - theta) * bs;
    sy = s.dot(r);
  }
  if (!(sy > 0.0) || !r.allFinite()) return;
  b += -(bs * bs.transpose()) / sbs + (r * r.transpose()) / sy;
  b = 0.5 * (b + b.transpose()).eval();
  // repeated damping shrinks curvature geometrically; keep the spectrum bounded away from 0
  if (b.rows() <= 256) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(b);
    const double top = es.eigenvalues().maxCoeff();
    if (es.eigenvalues().minCoeff() < 1e-8 * top) convexify(b, 1e-8 * top);
  } else if (Eigen::LLT<Eigen::MatrixXd>(b).info() != Eigen::Success) {
    b = Eigen::MatrixXd::Identity(b.rows(), b.cols()) * std::max(1e-8, b.diagonal().cwiseAbs().maxCoeff());
  }
}

void convexify(Eigen::MatrixXd& block, double floor) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (block + block.transpose()));
  Vec ev = es.eigenvalues();
  for (Eigen::Index i = 0; i < ev.size(); ++i) ev[i] = std::max(std::abs(ev[i]), floor);
  block = es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct Eval {
  double f = 0.0;
  Vec g;
  Vec c;
  SpMat j;
  Vec ci;
  SpMat ji;
};

class Sqp {
 public:
  Sqp(const NlpProblem& problem, const SqpOptions& opts) : p_(problem), opts_(opts) {
    n_ = problem.n;
    lower_ = problem.lower.size() == n_ ? problem.lower : Vec::Constant(n_, -kInf);
    upper_ = problem.upper.size() == n_ ? problem.upper : Vec::Constant(n_, kInf);
  }

  NlpSolution run(const Vec& x0) {
    NlpSolution sol;
    sol.mult_eq = Vec::Zero(p_.n_eq);
    sol.mult_ineq = Vec::Zero(p_.n_in);
    sol.mult_bounds = Vec::Zero(n_);
    if (x0.size() != n_) {
      throw Error(ErrorCode::invalid_argument, "solve_sqp: x0 has wrong length");
    }
    for (Eigen::Index i = 0; i < n_; ++i) {
      if (lower_[i] > upper_[i]) {
        sol.status = NlpStatus::infeasible;
        sol.x_star = x0;
        return sol;
      }
    }
    Vec x = x0.cwiseMax(lower_).cwiseMin(upper_);
    auto ev = evaluate(x);
    if (!ev) {
      sol.status = NlpStatus::evaluation_error;
      sol.x_star = x;
      return sol;
    }
    if (p_.validate) validate_derivatives(x, *ev);

    Vec mu = Vec::Zero(p_.n_eq), lam = Vec::Zero(p_.n_in), z = Vec::Zero(n_);
    double nu = opts_.initial_penalty;
    init_bfgs();
    QpWorkingSet working;
    bool have_working = false;

    for (int k = 0;; ++k) {
      const KktResiduals kkt = residuals(x, *ev, mu, lam, z);
      IterationRecord rec{k, ev->f, kkt.stationarity, kkt.feasibility, 0.0, nu};
      const bool done = k > 0 && converged(kkt, mu, lam, z);
      if (done || k >= opts_.max_iter) {
        sol.history.push_back(rec);
        sol.status = done ? NlpStatus::converged : NlpStatus::max_iter;
        return finish(sol, x, *ev, mu, lam, z, kkt, k);
      }

      const SpMat h = hessian(x, *ev, mu, lam);
      QpProblem qp;
      qp.h = h;
      qp.g = ev->g;
      qp.a_eq = ev->j;
      qp.b_eq = -ev->c;
      qp.a_in = ev->ji;
      qp.b_in = -ev->ci;
      qp.lower = lower_ - x;
      qp.upper = upper_ - x;
      QpResult qr = qp_solve(qp, {}, have_working ? &working : nullptr);

      double lin_violation = 0.0;  // L1 violation of the linearized constraints at the step
      if (qr.status != QpStatus::optimal) {
        qr = elastic_qp(qp, nu, lin_violation);
        const double viol = violation(*ev);
        if (qr.status != QpStatus::optimal || lin_violation >= (1.0 - 1e-6) * viol) {
          sol.history.push_back(rec);
          sol.status = NlpStatus::infeasible;
          return finish(sol, x, *ev, mu, lam, z, kkt, k);
        }
      } else {
        working = qr.working_set;
        have_working = true;
      }
      const Vec& d = qr.d;
      rec.step_norm = d.lpNorm<Eigen::Infinity>();

      const double mult_max = std::max(qr.mult_eq.size() ? qr.mult_eq.lpNorm<Eigen::Infinity>() : 0.0,
                                       qr.mult_in.size() ? qr.mult_in.lpNorm<Eigen::Infinity>() : 0.0);
      nu = std::max(nu, opts_.penalty_margin * mult_max + 1e-8);
      rec.penalty = nu;

      const double viol0 = violation(*ev);
      const double phi0 = ev->f + nu * viol0;
      double dir = ev->g.dot(d) - nu * (viol0 - lin_violation);
      if (!(dir < 0.0)) dir = -1e-16;

      std::optional<std::pair<Vec, Eval>> accepted;
      double alpha = 1.0;
      bool saw_eval_error = false;
      while (alpha >= opts_.min_step) {
        const Vec trial = (x + alpha * d).cwiseMax(lower_).cwiseMin(upper_);
        auto et = evaluate(trial);
        if (!et) saw_eval_error = true;
        if (et && et->f + nu * violation(*et) <= phi0 + opts_.armijo * alpha * dir) {
          accepted.emplace(trial, std::move(*et));
          break;
        }
        if (alpha == 1.0 && et && opts_.second_order_correction) {
          if (auto corr = second_order_correction(qp, d, *et, working)) {
            const Vec trial2 = (x + *corr).cwiseMax(lower_).cwiseMin(upper_);
            auto e2 = evaluate(trial2);
            if (e2 && e2->f + nu * violation(*e2) <= phi0 + opts_.armijo * dir) {
              accepted.emplace(trial2, std::move(*e2));
              break;
            }
          }
        }
        alpha *= opts_.backtrack;
      }
      if (!accepted && rec.step_norm <= 1e-14 * (1.0 + x.lpNorm<Eigen::Infinity>())) {
        auto et = evaluate(x + d);
        if (et) accepted.emplace(x + d, std::move(*et));
      }
      sol.history.push_back(rec);
      if (!accepted) {
        sol.status = saw_eval_error ? NlpStatus::evaluation_error : NlpStatus::line_search_failure;
        return finish(sol, x, *ev, mu, lam, z, kkt, k);
      }

      mu = qr.mult_eq;
      lam = qr.mult_in;
      z = qr.mult_bounds;
      if (opts_.hessian == HessianMode::bfgs) {
        const Vec s = accepted->first - x;
        const Vec y = lagrangian_gradient(accepted->second, mu, lam) - lagrangian_gradient(*ev, mu, lam);
        update_bfgs(s, y);
      }
      x = std::move(accepted->first);
      ev = std::move(accepted->second);
    }
  }

  KktResiduals residuals(const Vec& x, const Eval& e, const Vec& mu, const Vec& lam, const Vec& z) const {
    KktResiduals r;
    const Vec grad = lagrangian_gradient(e, mu, lam) + z;
    r.stationarity = grad.size() ? grad.lpNorm<Eigen::Infinity>() : 0.0;
    double feas = 0.0;
    if (e.c.size()) feas = e.c.lpNorm<Eigen::Infinity>();
    for (Eigen::Index j = 0; j < e.ci.size(); ++j) feas = std::max(feas, e.ci[j]);
    for (Eigen::Index i = 0; i < n_; ++i) {
      feas = std::max({feas, lower_[i] - x[i], x[i] - upper_[i]});
    }
    r.feasibility = feas;
    double comp = 0.0;
    for (Eigen::Index j = 0; j < e.ci.size(); ++j) comp = std::max(comp, std::abs(lam[j] * e.ci[j]));
    for (Eigen::Index i = 0; i < n_; ++i) {
      if (z[i] > 0.0 && std::isfinite(upper_[i])) comp = std::max(comp, z[i] * (upper_[i] - x[i]));
      if (z[i] < 0.0 && std::isfinite(lower_[i])) comp = std::max(comp, -z[i] * (x[i] - lower_[i]));
      // a bound multiplier on an infinite bound can never be complementary
      if ((z[i] > 0.0 && !std::isfinite(upper_[i])) || (z[i] < 0.0 && !std::isfinite(lower_[i]))) {
        comp = std::max(comp, std::abs(z[i]));
      }
    }
    r.complementarity = comp;
    return r;
  }

  std::optional<Eval> evaluate(const Vec& x) const {
    Eval e;
    try {
      e.f = p_.objective(x);
      e.g = p_.gradient(x);
      if (p_.n_eq > 0) {
        e.c = p_.eq(x);
        e.j = p_.eq_jac(x);
      } else {
        e.c.resize(0);
        e.j.resize(0, n_);
      }
      if (p_.n_in > 0) {
        e.ci = p_.ineq(x);
        e.ji = p_.ineq_jac(x);
      } else {
        e.ci.resize(0);
        e.ji.resize(0, n_);
      }
    } catch (const DomainError&) {
      return std::nullopt;
    }
    if (!std::isfinite(e.f) || !e.g.allFinite() || !e.c.allFinite() || !e.ci.allFinite()) {
      return std::nullopt;
    }
    if (e.g.size() != n_ || e.c.size() != p_.n_eq || e.ci.size() != p_.n_in ||
        e.j.rows() != p_.n_eq || e.j.cols() != n_ || e.ji.rows() != p_.n_in || e.ji.cols() != n_) {
      throw Error(ErrorCode::invalid_argument, "solve_sqp: callback output has wrong dimensions");
    }
    for (Eigen::Index k = 0; k < e.j.outerSize(); ++k) {
      for (SpMat::InnerIterator it(e.j, k); it; ++it) {
        if (!std::isfinite(it.value())) return std::nullopt;
      }
    }
    return e;
  }

 private:
  [[nodiscard]] double stationarity_scale(const Vec& mu, const Vec& lam, const Vec& z) const {
    const double count = static_cast<double>(std::max<Eigen::Index>(1, mu.size() + lam.size() + z.size()));
    const double mean = (mu.lpNorm<1>() + lam.lpNorm<1>() + z.lpNorm<1>()) / count;
    return std::max(1.0, mean / 100.0);
  }

  [[nodiscard]] bool converged(const KktResiduals& r, const Vec& mu, const Vec& lam, const Vec& z) const {
    return r.stationarity <= opts_.tol * stationarity_scale(mu, lam, z) && r.feasibility <= opts_.tol &&
           r.complementarity <= opts_.tol;
  }

  static double violation(const Eval& e) {
    double v = e.c.size() ? e.c.lpNorm<1>() : 0.0;
    for (Eigen::Index j = 0; j < e.ci.size(); ++j) v += std::max(0.0, e.ci[j]);
    return v;
  }

  static Vec lagrangian_gradient(const Eval& e, const Vec& mu, const Vec& lam) {
    Vec g = e.g;
    if (mu.size()) g += e.j.transpose() * mu;
    if (lam.size()) g += e.ji.transpose() * lam;
    return g;
  }

  NlpSolution& finish(NlpSolution& sol, const Vec& x, const Eval& e, const Vec& mu, const Vec& lam,
                      const Vec& z, const KktResiduals& kkt, int iterations) const {
    sol.x_star = x;
    sol.objective = e.f;
    sol.mult_eq = mu;
    sol.mult_ineq = lam;
    sol.mult_bounds = z;
    sol.kkt = kkt;
    sol.iterations = iterations;
    return sol;
  }

  void init_bfgs() {
    blocks_ = p_.hessian_blocks;
    if (blocks_.empty()) blocks_.emplace_back(0, static_cast<int>(n_));
    int covered = 0;
    for (const auto& [start, size] : blocks_) {
      if (start != covered || size <= 0) {
        throw Error(ErrorCode::invalid_argument, "solve_sqp: hessian_blocks must partition the variables");
      }
      covered += size;
    }
    if (covered != n_) {
      throw Error(ErrorCode::invalid_argument, "solve_sqp: hessian_blocks must partition the variables");
    }
    bfgs_.clear();
    if (opts_.hessian == HessianMode::bfgs) {
      for (const auto& blk : blocks_) bfgs_.push_back(Eigen::MatrixXd::Identity(blk.second, blk.second));
    }
  }

  void update_bfgs(const Vec& s, const Vec& y) {
    for (std::size_t b = 0; b < blocks_.size(); ++b) {
      const auto [start, size] = blocks_[b];
      damped_bfgs_update(bfgs_[b], s.segment(start, size), y.segment(start, size));
    }
  }

  SpMat hessian(const Vec& x, const Eval& e, const Vec& mu, const Vec& lam) const {
    SpMat h(n_, n_);
    switch (opts_.hessian) {
      case HessianMode::bfgs: {
        std::vector<Eigen::Triplet<double>> trip;
        for (std::size_t b = 0; b < blocks_.size(); ++b) {
          const auto [start, size] = blocks_[b];
          for (int c = 0; c < size; ++c) {
            for (int r = 0; r < size; ++r) {
              const double v = bfgs_[b](r, c);
              if (v != 0.0) trip.emplace_back(start + r, start + c, v);
            }
          }
        }
        h.setFromTriplets(trip.begin(), trip.end());
        return h;
      }
      case HessianMode::gauss_newton:
        if (!p_.gauss_newton_hessian) {
          throw Error(ErrorCode::invalid_argument, "solve_sqp: gauss-newton mode needs gauss_newton_hessian");
        }
        h = p_.gauss_newton_hessian(x);
        break;
      case HessianMode::exact:
        h = p_.lagrangian_hessian ? p_.lagrangian_hessian(x, mu, lam) : dense_fd_hessian(x, e, mu, lam);
        break;
    }
    SpMat reg(n_, n_);
    reg.setIdentity();
    return h + opts_.hessian_floor * reg;
  }

  // Central differences of the Lagrangian gradient, then eigenvalue modification.
  SpMat dense_fd_hessian(const Vec& x, const Eval& e, const Vec& mu, const Vec& lam) const {
    if (n_ > 2000) {
      throw Error(ErrorCode::invalid_argument, "solve_sqp: dense FD Hessian limited to n <= 2000");
    }
    Eigen::MatrixXd hd(n_, n_);
    for (Eigen::Index i = 0; i < n_; ++i) {
      const double step = 1e-6 * std::max(1.0, std::abs(x[i]));
      Vec xp = x, xm = x;
      xp[i] += step;
      xm[i] -= step;
      auto ep = evaluate(xp);
      auto em = evaluate(xm);
      if (!ep || !em) {
        hd.col(i).setZero();
        continue;
      }
      hd.col(i) = (lagrangian_gradient(*ep, mu, lam) - lagrangian_gradient(*em, mu, lam)) / (2.0 * step);
    }
    (void)e;
    convexify(hd, 1e-8 * std::max(1.0, hd.lpNorm<Eigen::Infinity>()));
    return hd.sparseView();
  }

  QpResult elastic_qp(const QpProblem& qp, double nu, double& lin_violation) const {
    const Eigen::Index n = n_;
    const Eigen::Index p = qp.b_eq.size();
    const Eigen::Index q = qp.b_in.size();
    const Eigen::Index ne = n + 2 * p + q;
    QpProblem el;
    std::vector<Eigen::Triplet<double>> th;
    for (Eigen::Index k = 0; k < qp.h.outerSize(); ++k) {
      for (SpMat::InnerIterator it(qp.h, k); it; ++it) th.emplace_back(it.row(), it.col(), it.value());
    }
    for (Eigen::Index i = n; i < ne; ++i) th.emplace_back(i, i, 1e-8);
    el.h.resize(ne, ne);
    el.h.setFromTriplets(th.begin(), th.end());
    el.g = Vec::Constant(ne, nu);
    el.g.head(n) = qp.g;

    std::vector<Eigen::Triplet<double>> te;
    for (Eigen::Index k = 0; k < qp.a_eq.outerSize(); ++k) {
      for (SpMat::InnerIterator it(qp.a_eq, k); it; ++it) te.emplace_back(it.row(), it.col(), it.value());
    }
    for (Eigen::Index i = 0; i < p; ++i) {
      te.emplace_back(i, n + i, -1.0);
      te.emplace_back(i, n + p + i, 1.0);
    }
    el.a_eq.resize(p, ne);
    el.a_eq.setFromTriplets(te.begin(), te.end());
    el.b_eq = qp.b_eq;

    std::vector<Eigen::Triplet<double>> ti;
    for (Eigen::Index k = 0; k < qp.a_in.outerSize(); ++k) {
      for (SpMat::InnerIterator it(qp.a_in, k); it; ++it) ti.emplace_back(it.row(), it.col(), it.value());
    }
    for (Eigen::Index j = 0; j < q; ++j) ti.emplace_back(j, n + 2 * p + j, -1.0);
    el.a_in.resize(q, ne);
    el.a_in.setFromTriplets(ti.begin(), ti.end());
    el.b_in = qp.b_in;
    el.lower = Vec::Zero(ne);
    el.upper = Vec::Constant(ne, kInf);
    el.lower.head(n) = qp.lower;
    el.upper.head(n) = qp.upper;

    QpResult r = qp_solve(el);
    if (r.status != QpStatus::optimal) return r;
    lin_violation = r.d.tail(2 * p + q).sum();
    QpResult out = r;
    out.d = r.d.head(n);
    out.mult_bounds = r.mult_bounds.head(n);
    return out;
  }

  std::optional<Vec> second_order_correction(const QpProblem& qp, const Vec& d, const Eval& at_trial,
                                             const QpWorkingSet& working) const {
    QpProblem corr = qp;
    corr.b_eq = qp.a_eq * d - at_trial.c;
    corr.b_in = qp.a_in * d - at_trial.ci;
    QpOptions o;
    o.phase_one = false;
    QpResult r = qp_solve(corr, o, &working);
    if (r.status != QpStatus::optimal) return std::nullopt;
    return r.d;
  }

  void validate_derivatives(const Vec& x, const Eval& e) const {
    const auto close = [](double a, double b) {
      return std::abs(a - b) <= 1e-4 * std::max(1.0, std::max(std::abs(a), std::abs(b)));
    };
    const Eigen::MatrixXd jd = Eigen::MatrixXd(e.j);
    const Eigen::MatrixXd jid = Eigen::MatrixXd(e.ji);
    for (Eigen::Index i = 0; i < n_; ++i) {
      const double step = 1e-6 * std::max(1.0, std::abs(x[i]));
      Vec xp = x, xm = x;
      xp[i] += step;
      xm[i] -= step;
      const double fd = (p_.objective(xp) - p_.objective(xm)) / (2.0 * step);
      if (!close(fd, e.g[i])) {
        std::ostringstream os;
        os << "solve_sqp: gradient component " << i << " mismatch (analytic " << e.g[i] << ", fd " << fd << ")";
        throw Error(ErrorCode::invalid_argument, os.str());
      }
      if (p_.n_eq > 0) {
        const Vec col = (p_.eq(xp) - p_.eq(xm)) / (2.0 * step);
        for (Eigen::Index r = 0; r < col.size(); ++r) {
          if (!close(col[r], jd(r, i))) {
            throw Error(ErrorCode::invalid_argument, "solve_sqp: equality Jacobian mismatch");
          }
        }
      }
      if (p_.n_in > 0) {
        const Vec col = (p_.ineq(xp) - p_.ineq(xm)) / (2.0 * step);
        for (Eigen::Index r = 0; r < col.size(); ++r) {
          if (!close(col[r], jid(r, i))) {
            throw Error(ErrorCode::invalid_argument, "solve_sqp: inequality Jacobian mismatch");
          }
        }
      }
    }
  }

  const NlpProblem& p_;
  SqpOptions opts_;
  Eigen::Index n_ = 0;
  Vec lower_, upper_;
  std::vector<std::pair<int, int>> blocks_;
  std::vector<Eigen::MatrixXd> bfgs_;
};

}  // namespace

KktResiduals kkt_residuals(const NlpProblem& problem, const Vec& x, const NlpMultipliers& mult) {
  Sqp sqp(problem, {});
  auto e = sqp.evaluate(x);
  if (!e) throw Error(ErrorCode::domain, "kkt_residuals: evaluation failed at the given point");
  const Vec mu = mult.eq.size() ? mult.eq : Vec::Zero(problem.n_eq);
  const Vec lam = mult.ineq.size() ? mult.ineq : Vec::Zero(problem.n_in);
  const Vec z = mult.bounds.size() ? mult.bounds : Vec::Zero(problem.n);
  return sqp.residuals(x, *e, mu, lam, z);
}

NlpSolution solve_sqp(const NlpProblem& problem, const Vec& x0, const SqpOptions& opts) {
  if (!(opts.tol > 0.0)) throw Error(ErrorCode::invalid_argument, "solve_sqp: tol must be positive");
  if (!problem.objective || !problem.gradient) {
    throw Error(ErrorCode::invalid_argument, "solve_sqp: objective and gradient are required");
  }
  Sqp sqp(problem, opts);
  return sqp.run(x0);
}

void write_iteration_log(const NlpSolution& solution, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::io, "cannot open " + path);
  out.precision(17);
  out << "iter,objective,stationarity,feasibility,step_norm,penalty\n";
  for (const auto& r : solution.history) {
    out << r.iter << ',' << r.objective << ',' << r.stationarity << ',' << r.feasibility << ','
        << r.step_norm << ',' << r.penalty << '\n';
  }
}

}  // namespace mtp
