#include "mtp/qp.hpp"

#include "mtp/error.hpp"

#include <Eigen/SparseLU>

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>

namespace mtp {

const char* to_string(QpStatus status) {
  switch (status) {
    case QpStatus::optimal: return "optimal";
    case QpStatus::infeasible: return "infeasible";
    case QpStatus::singular: return "singular";
    case QpStatus::max_iter: return "max_iter";
  }
  return "unknown";
}

bool solve_kkt_system(const SpMat& h, const SpMat& a, const Vec& rhs, Vec& solution,
                      int* regularizations) {
  const Eigen::Index n = h.rows();
  const Eigen::Index m = a.rows();
  const Eigen::Index dim = n + m;
  const double rhs_scale = std::max(1.0, rhs.lpNorm<Eigen::Infinity>());

  std::vector<Eigen::Triplet<double>> base;
  base.reserve(static_cast<std::size_t>(h.nonZeros() + 2 * a.nonZeros() + dim));
  for (Eigen::Index k = 0; k < h.outerSize(); ++k) {
    for (SpMat::InnerIterator it(h, k); it; ++it) base.emplace_back(it.row(), it.col(), it.value());
  }
  for (Eigen::Index k = 0; k < a.outerSize(); ++k) {
    for (SpMat::InnerIterator it(a, k); it; ++it) {
      base.emplace_back(n + it.row(), it.col(), it.value());
      base.emplace_back(it.col(), n + it.row(), it.value());
    }
  }

  constexpr double kDeltas[] = {0.0, 1e-8, 1e-6, 1e-4};
  int attempt = 0;
  for (double delta : kDeltas) {
    std::vector<Eigen::Triplet<double>> trip = base;
    for (Eigen::Index i = 0; i < dim; ++i) {
      // explicit zeros keep the diagonal structurally present for the LU
      trip.emplace_back(i, i, i < n ? delta : -delta);
    }
    SpMat k(dim, dim);
    k.setFromTriplets(trip.begin(), trip.end());
    k.makeCompressed();

    Eigen::SparseLU<SpMat, Eigen::COLAMDOrdering<int>> lu;
    lu.compute(k);
    if (lu.info() == Eigen::Success) {
      Vec x = lu.solve(rhs);
      if (lu.info() == Eigen::Success && x.allFinite()) {
        const double res = (k * x - rhs).lpNorm<Eigen::Infinity>();
        if (res <= 1e-8 * rhs_scale * std::max(1.0, x.lpNorm<Eigen::Infinity>())) {
          solution = std::move(x);
          if (regularizations) *regularizations = attempt;
          return true;
        }
      }
    }
    ++attempt;
  }
  return false;
}

namespace {

enum class Kind { ineq, lower, upper };

struct Row {
  Kind kind;
  int index;
  bool pinned = false;  // fixed variable: permanent member, multiplier of free sign

  bool operator==(const Row& o) const { return kind == o.kind && index == o.index; }
};

struct EqpSolution {
  Vec d;
  Vec mult_eq;
  Vec mult_w;
};

struct Start {
  Vec d;
  std::vector<Row> working;
};

class ActiveSetQp {
 public:
  ActiveSetQp(const QpProblem& qp, const QpOptions& opts) : qp_(qp), opts_(opts), a_in_rows_(qp.a_in) {
    n_ = qp.g.size();
    for (int j = 0; j < static_cast<int>(qp.b_in.size()); ++j) {
      candidates_.push_back({Kind::ineq, j});
    }
    for (int i = 0; i < n_; ++i) {
      const double lo = qp.lower[i], up = qp.upper[i];
      if (std::isfinite(lo) && std::isfinite(up) && lo == up) {
        pinned_.push_back({Kind::upper, i, true});
        continue;
      }
      if (std::isfinite(lo)) candidates_.push_back({Kind::lower, i});
      if (std::isfinite(up)) candidates_.push_back({Kind::upper, i});
    }
    max_iter_ = opts.max_iter > 0 ? opts.max_iter
                                  : 50 + 3 * static_cast<int>(candidates_.size());
    mult_tol_ = opts.mult_tol * std::max(1.0, qp.g.lpNorm<Eigen::Infinity>());
  }

  [[nodiscard]] int max_iter() const { return max_iter_; }

  /// Add-most-violated loop from the warm start. Cheap and exact whenever
  /// the guessed active set is right, which is the common SQP case.
  std::optional<Start> heuristic_start(const QpWorkingSet* warm, int& iterations, int& regs) {
    std::vector<Row> w = pinned_;
    if (warm) {
      for (int j : warm->inequalities) add_if_candidate(w, {Kind::ineq, j});
      for (int i : warm->lower_bounds) add_if_candidate(w, {Kind::lower, i});
      for (int i : warm->upper_bounds) add_if_candidate(w, {Kind::upper, i});
    }
    const int limit = 10 + static_cast<int>(w.size());
    for (int k = 0; k < limit; ++k) {
      ++iterations;
      auto sol = solve_eqp(w, regs);
      if (!sol) return std::nullopt;
      const auto worst = most_violated(sol->d, w);
      if (!worst) {
        // a regularized solve of an inconsistent working set may violate its own rows
        for (const Row& r : w) {
          if (!r.pinned && row_value(r, sol->d) - row_rhs(r) > feas_tol(r)) return std::nullopt;
        }
        if (qp_.a_eq.rows() > 0 &&
            (qp_.a_eq * sol->d - qp_.b_eq).lpNorm<Eigen::Infinity>() >
                opts_.feas_tol * std::max(1.0, qp_.b_eq.lpNorm<Eigen::Infinity>())) {
          return std::nullopt;
        }
        // drop members that are not active at the point (keeps W consistent)
        std::vector<Row> active;
        for (const Row& r : w) {
          if (r.pinned || std::abs(row_value(r, sol->d) - row_rhs(r)) <= feas_tol(r)) active.push_back(r);
        }
        return Start{sol->d, active};
      }
      w.push_back(*worst);
    }
    return std::nullopt;
  }

  QpResult primal_active_set(Start start, int iterations, int regs) {
    Vec d = std::move(start.d);
    std::vector<Row> w = std::move(start.working);
    for (const Row& p : pinned_) add_if_missing(w, p);

    QpResult res;
    for (int it = 0; it < max_iter_; ++it) {
      ++iterations;
      auto sol = solve_eqp(w, regs);
      if (!sol) {
        res.status = QpStatus::singular;
        res.iterations = iterations;
        res.regularizations = regs;
        return res;
      }
      const Vec p = sol->d - d;
      double alpha = 1.0;
      std::optional<Row> blocking;
      if (p.lpNorm<Eigen::Infinity>() > 1e-14 * (1.0 + d.lpNorm<Eigen::Infinity>())) {
        for (const Row& c : candidates_) {
          if (contains(w, c)) continue;
          const double ap = row_value(c, p);
          if (ap <= 1e-14) continue;
          const double slack = std::max(0.0, row_rhs(c) - row_value(c, d));
          const double ratio = slack / ap;
          if (ratio < alpha) {
            alpha = ratio;
            blocking = c;
          }
        }
      }
      if (blocking) {
        d += alpha * p;
        w.push_back(*blocking);
        continue;
      }
      d = sol->d;
      // full step: the EQP minimizer is feasible, inspect multipliers
      int drop = -1;
      double most_negative = -mult_tol_;
      for (std::size_t k = 0; k < w.size(); ++k) {
        if (w[k].pinned) continue;
        const double lam = sol->mult_w[static_cast<Eigen::Index>(k)];
        if (lam < most_negative) {
          most_negative = lam;
          drop = static_cast<int>(k);
        }
      }
      if (drop < 0) {
        return finish(*sol, w, iterations, regs);
      }
      w.erase(w.begin() + drop);
    }
    res.status = QpStatus::max_iter;
    res.d = d;
    res.iterations = iterations;
    res.regularizations = regs;
    return res;
  }

 private:
  [[nodiscard]] double row_value(const Row& r, const Vec& d) const {
    switch (r.kind) {
      case Kind::ineq: return a_in_rows_.row(r.index).dot(d);
      case Kind::lower: return -d[r.index];
      case Kind::upper: return d[r.index];
    }
    return 0.0;
  }

  [[nodiscard]] double row_rhs(const Row& r) const {
    switch (r.kind) {
      case Kind::ineq: return qp_.b_in[r.index];
      case Kind::lower: return -qp_.lower[r.index];
      case Kind::upper: return qp_.upper[r.index];
    }
    return 0.0;
  }

  [[nodiscard]] double feas_tol(const Row& r) const {
    return opts_.feas_tol * std::max(1.0, std::abs(row_rhs(r)));
  }

  static bool contains(const std::vector<Row>& w, const Row& r) {
    return std::find(w.begin(), w.end(), r) != w.end();
  }

  static void add_if_missing(std::vector<Row>& w, const Row& r) {
    if (!contains(w, r)) w.push_back(r);
  }

  void add_if_candidate(std::vector<Row>& w, const Row& r) const {
    if (contains(candidates_, r)) add_if_missing(w, r);
  }

  std::optional<Row> most_violated(const Vec& d, const std::vector<Row>& w) const {
    std::optional<Row> worst;
    double worst_violation = 0.0;
    for (const Row& c : candidates_) {
      if (contains(w, c)) continue;
      const double v = row_value(c, d) - row_rhs(c);
      if (v > feas_tol(c) && v > worst_violation) {
        worst_violation = v;
        worst = c;
      }
    }
    return worst;
  }

  std::optional<EqpSolution> solve_eqp(const std::vector<Row>& w, int& regs) const {
    const Eigen::Index p = qp_.a_eq.rows();
    const Eigen::Index m = p + static_cast<Eigen::Index>(w.size());
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(static_cast<std::size_t>(qp_.a_eq.nonZeros()) + w.size() * 8);
    for (Eigen::Index k = 0; k < qp_.a_eq.outerSize(); ++k) {
      for (SpMat::InnerIterator it(qp_.a_eq, k); it; ++it) trip.emplace_back(it.row(), it.col(), it.value());
    }
    Vec rhs(n_ + m);
    rhs.head(n_) = -qp_.g;
    rhs.segment(n_, p) = qp_.b_eq;
    for (std::size_t k = 0; k < w.size(); ++k) {
      const Row& r = w[k];
      const Eigen::Index row = p + static_cast<Eigen::Index>(k);
      switch (r.kind) {
        case Kind::ineq:
          for (RowMajorMat::InnerIterator it(a_in_rows_, r.index); it; ++it) {
            trip.emplace_back(row, it.col(), it.value());
          }
          break;
        case Kind::lower: trip.emplace_back(row, r.index, -1.0); break;
        case Kind::upper: trip.emplace_back(row, r.index, 1.0); break;
      }
      rhs[n_ + row] = row_rhs(r);
    }
    SpMat a(m, n_);
    a.setFromTriplets(trip.begin(), trip.end());

    Vec sol;
    int used = 0;
    if (!solve_kkt_system(qp_.h, a, rhs, sol, &used)) return std::nullopt;
    regs = std::max(regs, used);
    EqpSolution out;
    out.d = sol.head(n_);
    out.mult_eq = sol.segment(n_, p);
    out.mult_w = sol.tail(static_cast<Eigen::Index>(w.size()));
    return out;
  }

  QpResult finish(const EqpSolution& sol, const std::vector<Row>& w, int iterations, int regs) const {
    QpResult res;
    res.status = QpStatus::optimal;
    res.d = sol.d;
    res.mult_eq = sol.mult_eq;
    res.mult_in = Vec::Zero(qp_.b_in.size());
    res.mult_bounds = Vec::Zero(n_);
    res.iterations = iterations;
    res.regularizations = regs;
    for (std::size_t k = 0; k < w.size(); ++k) {
      const Row& r = w[k];
      const double lam = sol.mult_w[static_cast<Eigen::Index>(k)];
      switch (r.kind) {
        case Kind::ineq:
          res.mult_in[r.index] = lam;
          res.working_set.inequalities.push_back(r.index);
          break;
        case Kind::lower:
          res.mult_bounds[r.index] -= lam;
          res.working_set.lower_bounds.push_back(r.index);
          break;
        case Kind::upper:
          res.mult_bounds[r.index] += lam;
          if (!r.pinned) res.working_set.upper_bounds.push_back(r.index);
          break;
      }
    }
    return res;
  }

  using RowMajorMat = Eigen::SparseMatrix<double, Eigen::RowMajor>;

  const QpProblem& qp_;
  QpOptions opts_;
  RowMajorMat a_in_rows_;
  Eigen::Index n_ = 0;
  std::vector<Row> candidates_;
  std::vector<Row> pinned_;
  int max_iter_ = 0;
  double mult_tol_ = 0.0;
};

// Phase 1: minimize the total constraint violation over the bound box.
// The elastic problem has the explicit feasible start d = clamp(0).
std::optional<Vec> elastic_phase_one(const QpProblem& qp, const QpOptions& opts, int& iterations,
                                     int& regs) {
  const Eigen::Index n = qp.g.size();
  const Eigen::Index p = qp.b_eq.size();
  const Eigen::Index q = qp.b_in.size();
  const Eigen::Index ne = n + 2 * p + q;
  constexpr double kReg = 1e-8;

  QpProblem el;
  el.h.resize(ne, ne);
  el.h.setIdentity();
  el.h *= kReg;
  el.g = Vec::Zero(ne);
  el.g.tail(2 * p + q).setOnes();

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
  el.upper = Vec::Constant(ne, std::numeric_limits<double>::infinity());
  el.lower.head(n) = qp.lower;
  el.upper.head(n) = qp.upper;

  // Least-norm solution of the equalities, clipped to the bounds: only rows
  // touching clipped variables start with nonzero slack.
  Vec d0 = Vec::Zero(n);
  if (p > 0) {
    SpMat eye(n, n);
    eye.setIdentity();
    Vec rhs = Vec::Zero(n + p);
    rhs.tail(p) = qp.b_eq;
    Vec sol;
    if (solve_kkt_system(eye, qp.a_eq, rhs, sol, &regs)) d0 = sol.head(n);
  }
  Vec start = Vec::Zero(ne);
  start.head(n) = d0.cwiseMax(qp.lower).cwiseMin(qp.upper);
  const Vec r_eq = qp.a_eq * start.head(n) - qp.b_eq;
  start.segment(n, p) = r_eq.cwiseMax(0.0);
  start.segment(n + p, p) = (-r_eq).cwiseMax(0.0);
  start.tail(q) = (qp.a_in * start.head(n) - qp.b_in).cwiseMax(0.0);

  ActiveSetQp solver(el, opts);
  QpResult r = solver.primal_active_set(Start{start, {}}, 0, regs);
  iterations += r.iterations;
  if (r.status != QpStatus::optimal) return std::nullopt;
  const double violation = r.d.tail(2 * p + q).sum();
  const double scale = std::max({1.0, qp.b_eq.lpNorm<Eigen::Infinity>(), qp.b_in.lpNorm<Eigen::Infinity>()});
  if (violation > opts.feas_tol * scale * static_cast<double>(std::max<Eigen::Index>(1, p + q))) {
    return std::nullopt;
  }
  return Vec(r.d.head(n));
}

}  // namespace

QpResult qp_solve(const QpProblem& qp, const QpOptions& opts, const QpWorkingSet* warm_start) {
  const Eigen::Index n = qp.g.size();
  if (qp.h.rows() != n || qp.h.cols() != n || qp.lower.size() != n || qp.upper.size() != n ||
      qp.a_eq.rows() != qp.b_eq.size() || qp.a_in.rows() != qp.b_in.size() ||
      (qp.a_eq.rows() > 0 && qp.a_eq.cols() != n) || (qp.a_in.rows() > 0 && qp.a_in.cols() != n)) {
    throw Error(ErrorCode::invalid_argument, "qp_solve: inconsistent dimensions");
  }
  QpResult infeasible;
  infeasible.status = QpStatus::infeasible;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (qp.lower[i] > qp.upper[i]) return infeasible;
  }

  QpProblem normalized = qp;
  if (normalized.a_eq.rows() == 0) normalized.a_eq.resize(0, n);
  if (normalized.a_in.rows() == 0) normalized.a_in.resize(0, n);

  ActiveSetQp solver(normalized, opts);
  int iterations = 0;
  int regs = 0;
  std::optional<Start> start = solver.heuristic_start(warm_start, iterations, regs);
  if (!start) {
    if (!opts.phase_one) {
      infeasible.iterations = iterations;
      return infeasible;
    }
    auto d = elastic_phase_one(normalized, opts, iterations, regs);
    if (!d) {
      infeasible.iterations = iterations;
      return infeasible;
    }
    start = Start{*d, {}};
  }
  return solver.primal_active_set(std::move(*start), iterations, regs);
}

}  // namespace mtp
