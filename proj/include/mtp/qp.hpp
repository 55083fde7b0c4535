#pragma once

// Convex QP
//
//   min  1/2 d'Hd + g'd
//   s.t. A_eq d  = b_eq
//        A_in d <= b_in
//        lower <= d <= upper
//
// Multiplier convention: H d + g + A_eq' y + A_in' lam + z = 0 with lam >= 0,
// z_i > 0 on an active upper bound and z_i < 0 on an active lower bound.

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <vector>

namespace mtp {

using Vec = Eigen::VectorXd;
using SpMat = Eigen::SparseMatrix<double>;

struct QpProblem {
  SpMat h;
  Vec g;
  SpMat a_eq;
  Vec b_eq;
  SpMat a_in;
  Vec b_in;
  Vec lower;
  Vec upper;
};

enum class QpStatus { optimal, infeasible, singular, max_iter };

const char* to_string(QpStatus status);

/// Active constraints, reusable as a warm start for a related QP.
struct QpWorkingSet {
  std::vector<int> inequalities;
  std::vector<int> lower_bounds;
  std::vector<int> upper_bounds;
};

struct QpResult {
  QpStatus status = QpStatus::singular;
  Vec d;
  Vec mult_eq;
  Vec mult_in;
  Vec mult_bounds;
  int iterations = 0;
  int regularizations = 0;
  QpWorkingSet working_set;
};

struct QpOptions {
  int max_iter = 0;  // 0: 50 + 3 * (number of inequality rows and finite bounds)
  double feas_tol = 1e-9;
  double mult_tol = 1e-12;
  /// Without a cheap feasible start, give up instead of running the elastic phase one.
  bool phase_one = true;
};

QpResult qp_solve(const QpProblem& qp, const QpOptions& opts = {},
                  const QpWorkingSet* warm_start = nullptr);

/// Solves [H + dI, A'; A, -dI] [x; y] = rhs, escalating d = 0, 1e-8, 1e-6, 1e-4
/// until the factorization succeeds with a small residual.
/// Returns false when every attempt fails.
bool solve_kkt_system(const SpMat& h, const SpMat& a, const Vec& rhs, Vec& solution,
                      int* regularizations = nullptr);

}  // namespace mtp
