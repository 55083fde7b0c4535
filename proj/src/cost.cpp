#include "mtp/cost.hpp"

#include "mtp/error.hpp"
#include "mtp/trim.hpp"

namespace mtp {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

void require_dims(const Control& u_ref, const Eigen::VectorXd& r, int m, const char* what) {
  if (u_ref.size() != m || r.size() != m) {
    throw Error(ErrorCode::invalid_argument, std::string(what) + ": u_ref and r need control_dim entries");
  }
}

}  // namespace

void validate_cost(const StageCost& cost, const MechModel& model) {
  const int m = model.control_dim;
  std::visit(overloaded{
                 [&](const QuadraticCost& c) {
                   require_dims(c.u_ref, c.r, m, "quadratic cost");
                   if (c.q[2] != 0.0) {
                     throw Error(ErrorCode::invalid_argument, "quadratic cost: theta weight must be 0");
                   }
                 },
                 [&](const TrimPenaltyCost& c) { require_dims(c.u_ref, c.r, m, "trim penalty cost"); },
                 [&](const CustomCost& c) {
                   if (!c.value || !c.gradient) {
                     throw Error(ErrorCode::invalid_argument, "custom cost: value and gradient required");
                   }
                 },
             },
             cost);
}

double stage_cost(const MechModel& model, const StageCost& cost, const State& x, const Control& u) {
  return std::visit(overloaded{
                        [&](const QuadraticCost& c) {
                          const Vector4 e = x.vec() - c.x_ref.vec();
                          const Eigen::VectorXd du = u - c.u_ref;
                          return 0.5 * e.dot(c.q.cwiseProduct(e)) + du.dot(c.r.cwiseProduct(du));
                        },
                        [&](const TrimPenaltyCost& c) {
                          const double t = trim_residual(model, x.s, x.v_th, u);
                          const double es = x.s - c.s_ref;
                          const Eigen::VectorXd du = u - c.u_ref;
                          return c.w_t * t * t + 0.5 * c.s_weight * es * es + 0.5 * du.dot(c.r.cwiseProduct(du));
                        },
                        [&](const CustomCost& c) { return c.value(x.s, x.v_s, x.v_th, u); },
                    },
                    cost);
}

CostGradient stage_cost_gradient(const MechModel& model, const StageCost& cost, const State& x,
                                 const Control& u) {
  CostGradient g = std::visit(
      overloaded{
          [&](const QuadraticCost& c) {
            CostGradient out;
            out.dx = c.q.cwiseProduct(x.vec() - c.x_ref.vec());
            out.du = 2.0 * c.r.cwiseProduct(u - c.u_ref);
            return out;
          },
          [&](const TrimPenaltyCost& c) {
            const double t = trim_residual(model, x.s, x.v_th, u);
            const TrimGradients tg = trim_residual_grads(model, x.s, x.v_th, u);
            CostGradient out;
            out.dx[0] = 2.0 * c.w_t * t * tg.ds + c.s_weight * (x.s - c.s_ref);
            out.dx[3] = 2.0 * c.w_t * t * tg.dv_th;
            out.du = 2.0 * c.w_t * t * tg.du.transpose() + c.r.cwiseProduct(u - c.u_ref);
            return out;
          },
          [&](const CustomCost& c) { return c.gradient(x.s, x.v_s, x.v_th, u); },
      },
      cost);
  g.dx[2] = 0.0;
  return g;
}

StageCost zero_cost(int control_dim) {
  QuadraticCost c;
  c.u_ref = Control::Zero(control_dim);
  c.r = Eigen::VectorXd::Zero(control_dim);
  return c;
}

}  // namespace mtp
