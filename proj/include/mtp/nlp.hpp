#pragma once

// Smooth NLP
//
//   min f(x)  s.t.  c_eq(x) = 0,  c_in(x) <= 0,  lower <= x <= upper
//
// Lagrangian convention: L = f + mu' c_eq + lam' c_in + z' x, lam >= 0.
// Costate recovery in the OCP transcriptions relies on these signs.

#include "mtp/qp.hpp"

#include <functional>
#include <string>
#include <utility>
#include <vector>

namespace mtp {

struct NlpProblem {
  int n = 0;
  std::function<double(const Vec&)> objective;
  std::function<Vec(const Vec&)> gradient;

  int n_eq = 0;
  std::function<Vec(const Vec&)> eq;
  std::function<SpMat(const Vec&)> eq_jac;

  int n_in = 0;
  std::function<Vec(const Vec&)> ineq;
  std::function<SpMat(const Vec&)> ineq_jac;

  Vec lower;  // empty means unbounded
  Vec upper;

  /// Hessian of L at (x, mu, lam), already convexified by the provider.
  std::function<SpMat(const Vec& x, const Vec& mu, const Vec& lam)> lagrangian_hessian;
  /// Positive semidefinite model of the objective curvature only.
  std::function<SpMat(const Vec& x)> gauss_newton_hessian;
  /// Partition (start, size) for block-wise quasi-Newton updates.
  std::vector<std::pair<int, int>> hessian_blocks;

  /// Compare derivatives against finite differences at the initial point.
  bool validate = false;
};

enum class HessianMode { bfgs, gauss_newton, exact };

struct SqpOptions {
  double tol = 1e-8;
  int max_iter = 200;
  HessianMode hessian = HessianMode::bfgs;
  double initial_penalty = 1.0;
  double penalty_margin = 1.1;  // nu >= margin * max |multiplier|
  double backtrack = 0.5;
  double armijo = 1e-4;
  double min_step = 1e-12;
  bool second_order_correction = true;
  double hessian_floor = 1e-8;  // added to the diagonal of supplied Hessians
};

enum class NlpStatus { converged, max_iter, infeasible, evaluation_error, line_search_failure };

const char* to_string(NlpStatus status);

struct KktResiduals {
  double stationarity = 0.0;
  double feasibility = 0.0;
  double complementarity = 0.0;
};

struct NlpMultipliers {
  Vec eq;
  Vec ineq;
  Vec bounds;
};

struct IterationRecord {
  int iter = 0;
  double objective = 0.0;
  double stationarity = 0.0;
  double feasibility = 0.0;
  double step_norm = 0.0;
  double penalty = 0.0;
};

struct NlpSolution {
  Vec x_star;
  Vec mult_eq;
  Vec mult_ineq;
  Vec mult_bounds;
  KktResiduals kkt;
  double objective = 0.0;
  int iterations = 0;
  NlpStatus status = NlpStatus::max_iter;
  std::vector<IterationRecord> history;
};

/// Infinity-norm KKT residuals of the convention above.
KktResiduals kkt_residuals(const NlpProblem& problem, const Vec& x, const NlpMultipliers& mult);

/// SQP: QP subproblem per iteration, L1 exact-penalty merit with Armijo
/// backtracking and a second-order correction, elastic QP when the
/// linearization is inconsistent.
NlpSolution solve_sqp(const NlpProblem& problem, const Vec& x0, const SqpOptions& opts = {});

/// CSV `iter,objective,stationarity,feasibility,step_norm,penalty`.
void write_iteration_log(const NlpSolution& solution, const std::string& path);

/// Powell-damped BFGS update of a dense block. Keeps the block positive definite.
void damped_bfgs_update(Eigen::MatrixXd& b, const Vec& s, const Vec& y);

/// Symmetric eigenvalue modification: eigenvalues replaced by max(|ev|, floor).
void convexify(Eigen::MatrixXd& block, double floor);

}  // namespace mtp
