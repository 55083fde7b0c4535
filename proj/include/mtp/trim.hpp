#pragma once

#include "mtp/model.hpp"

#include <string>

namespace mtp {

/// (s, v_th, u) with trim residual below `trim_tol`: seeds a trim primitive
/// s = const, v_s = 0, theta = theta0 + v_th t, u = const.
struct TrimPoint {
  double s = 0.0;
  double v_th = 0.0;
  Control u;
  double residual = 0.0;
  double trim_tol = 1e-10;
  int iterations = 0;
};

/// T(s, v_th, u) = M11^{-1} (1/2 M22' v_th^2 - V' + f_s(u))
double trim_residual(const MechModel& model, double s, double v_th, const Control& u);

struct TrimGradients {
  double ds = 0.0;
  double dv_th = 0.0;
  Eigen::RowVectorXd du;
};
TrimGradients trim_residual_grads(const MechModel& model, double s, double v_th, const Control& u);

/// V^u(s, u) = V(s) - s f_s(u)
double forced_potential(const MechModel& model, double s, const Control& u);

struct AmendedPotential {
  double value = 0.0;   // V^u + 1/2 mu^2 / M22(s)
  double grad_s = 0.0;  // V' + 1/2 mu^2 (1/M22)' - f_s(u)
};
AmendedPotential forced_amended_potential(const MechModel& model, double s, double mu,
                                          const Control& u);

enum class TrimUnknown { shape, cyclic_velocity, control };

struct TrimRequest {
  TrimUnknown unknown = TrimUnknown::cyclic_velocity;
  double s = 0.0;
  double v_th = 0.0;
  Control u;
  int control_index = 0;  // which component of u is free when unknown == control
  double guess = 1.0;
  double tol = 1e-10;
  int max_iter = 50;
};

/// Damped scalar Newton on T = 0 in the single free variable.
/// Throws Error(not_converged) on stagnation or a vanishing derivative.
TrimPoint solve_trim(const MechModel& model, const TrimRequest& request);

Trajectory trim_trajectory(const TrimPoint& tp, const MechModel& model, double th0,
                           const std::vector<double>& grid);

struct ManifoldDistance {
  double value = 0.0;
  bool surrogate = false;     // non-surjective forcing: |v_s| + min_u |T|
  bool used_fallback = false; // Newton in u failed, dense scan used
};

ManifoldDistance manifold_distance_detail(const MechModel& model, const State& x);
double manifold_distance(const MechModel& model, const State& x);

/// sqrt(v_s^2 + w T(s, v_th, u)^2) with the applied control.
double combined_residual(const MechModel& model, const State& x, const Control& u, double w = 1.0);

}  // namespace mtp
