#pragma once

// Stage costs l(s, v_s, v_th, u). None of them depends on theta.

#include "mtp/model.hpp"

#include <functional>
#include <string>
#include <variant>

namespace mtp {

/// 1/2 (x - x_ref)' diag(q) (x - x_ref) + (u - u_ref)' diag(r) (u - u_ref).
/// q is indexed like State (s, v_s, th, v_th); q[2] must be 0.
struct QuadraticCost {
  State x_ref;
  Vector4 q = Vector4::Zero();
  Control u_ref;
  Eigen::VectorXd r;
};

/// w_t T(s, v_th, u)^2 + 1/2 s_weight (s - s_ref)^2 + 1/2 (u - u_ref)' diag(r) (u - u_ref).
struct TrimPenaltyCost {
  double w_t = 5e3;
  double s_ref = 0.0;
  double s_weight = 1.0;
  Control u_ref;
  Eigen::VectorXd r;
};

struct CostGradient {
  Vector4 dx = Vector4::Zero();  // d/dth is always 0
  Eigen::VectorXd du;
};

struct CustomCost {
  std::string name = "custom";
  std::function<double(double s, double v_s, double v_th, const Control& u)> value;
  /// dx[2] is ignored.
  std::function<CostGradient(double s, double v_s, double v_th, const Control& u)> gradient;
};

using StageCost = std::variant<QuadraticCost, TrimPenaltyCost, CustomCost>;

/// Throws on dimension mismatch or a nonzero theta weight.
void validate_cost(const StageCost& cost, const MechModel& model);

double stage_cost(const MechModel& model, const StageCost& cost, const State& x, const Control& u);
CostGradient stage_cost_gradient(const MechModel& model, const StageCost& cost, const State& x,
                                 const Control& u);

/// Stage cost with every weight zero (useful for feasibility problems).
StageCost zero_cost(int control_dim);

}  // namespace mtp
