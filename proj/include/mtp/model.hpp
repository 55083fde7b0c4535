#pragma once

// Lagrangian systems with one shape coordinate s and one cyclic coordinate
// theta, block-diagonal mass matrix diag(M11(s), M22(s)) and potential V(s).
//
//   s'     = v_s
//   v_s'   = (1/M11) (1/2 M22' v_th^2 - 1/2 M11' v_s^2 - V' + f_s(u))
//   theta' = v_th
//   v_th'  = (1/M22) (-M22' v_th v_s + f_th(u))

#include <Eigen/Dense>

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace mtp {

using Control = Eigen::VectorXd;
using Vector4 = Eigen::Vector4d;
using Matrix4 = Eigen::Matrix4d;

struct State {
  double s = 0.0;
  double v_s = 0.0;
  double th = 0.0;
  double v_th = 0.0;

  [[nodiscard]] Vector4 vec() const { return {s, v_s, th, v_th}; }
  static State from(const Vector4& v) { return {v[0], v[1], v[2], v[3]}; }
};

struct CoState {
  double l_s = 0.0;
  double l_vs = 0.0;
  double l_th = 0.0;
  double l_vth = 0.0;

  [[nodiscard]] Vector4 vec() const { return {l_s, l_vs, l_th, l_vth}; }
  static CoState from(const Vector4& v) { return {v[0], v[1], v[2], v[3]}; }
};

/// Legendre image (s, p_s, theta, p_th) of a State.
struct HamState {
  double s = 0.0;
  double p_s = 0.0;
  double th = 0.0;
  double p_th = 0.0;

  [[nodiscard]] Vector4 vec() const { return {s, p_s, th, p_th}; }
  static HamState from(const Vector4& v) { return {v[0], v[1], v[2], v[3]}; }
};

using ScalarFn = std::function<double(double)>;
using ForcingFn = std::function<double(const Control&)>;
using ForcingJacFn = std::function<Eigen::RowVectorXd(const Control&)>;

/// Model bundle. Derivatives are supplied analytically by the author;
/// check_derivatives() validates them against finite differences.
struct MechModel {
  std::string name;
  ScalarFn m11, m11_d, m11_dd;
  ScalarFn m22, m22_d, m22_dd;
  ScalarFn pot, pot_d, pot_dd;
  ForcingFn f_s;
  ForcingJacFn f_s_jac;
  ForcingFn f_th;
  ForcingJacFn f_th_jac;
  int control_dim = 1;
  double s_min = 0.0;
  /// f_s maps onto R, so the trim manifold reduces to {v_s = 0}.
  bool forcing_surjective = false;
  /// f_th vanishes identically (orthogonal forcing).
  bool orthogonal_forcing = false;
};

/// Piecewise-constant-control trajectory. controls[i] acts on [times[i], times[i+1]).
struct Trajectory {
  std::vector<double> times;
  std::vector<State> states;
  std::vector<Control> controls;
  std::vector<CoState> costates;  // empty or one per node

  [[nodiscard]] std::size_t size() const { return states.size(); }
  /// Throws if the length invariants are violated.
  void validate() const;
};

/// Throws DomainError when s <= s_min.
void require_domain(const MechModel& model, double s, const char* where);

Vector4 el_rhs(const MechModel& model, const State& x, const Control& u);

/// Jacobians of el_rhs with respect to the state and the control.
struct ElJacobians {
  Matrix4 fx;
  Eigen::Matrix<double, 4, Eigen::Dynamic> fu;
};
ElJacobians el_jacobians(const MechModel& model, const State& x, const Control& u);

Vector4 ham_rhs(const MechModel& model, const HamState& z, const Control& u);

HamState legendre_to_ham(const MechModel& model, const State& x);
State legendre_to_el(const MechModel& model, const HamState& z);

double lagrangian(const MechModel& model, const State& x);
double hamiltonian_energy(const MechModel& model, const HamState& z);
double momentum(const MechModel& model, const State& x);

/// (M^{-1})' = -M^{-2} M'
double inv_mass_d(double m, double m_d);

State rk4_step(const MechModel& model, const State& x, const Control& u, double h);

struct Rk4Sensitivity {
  State next;
  Matrix4 fx;                                    // d next / d x
  Eigen::Matrix<double, 4, Eigen::Dynamic> fu;  // d next / d u
};
Rk4Sensitivity rk4_step_sensitivity(const MechModel& model, const State& x, const Control& u,
                                    double h);

/// Chains rk4_step over the grid with piecewise-constant controls
/// (controls.size() == grid.size() - 1). A domain exit raises DomainError
/// carrying the start time of the offending step.
Trajectory simulate(const MechModel& model, const State& x0, const std::vector<Control>& controls,
                    const std::vector<double>& grid);

/// Uniform grid with n intervals on [0, horizon].
std::vector<double> uniform_grid(double horizon, int intervals);

struct DerivativeViolation {
  std::string quantity;
  double point = 0.0;
  double analytic = 0.0;
  double finite_difference = 0.0;
};

struct DerivativeReport {
  int samples = 0;
  double tol = 0.0;
  std::vector<DerivativeViolation> violations;
  [[nodiscard]] bool ok() const { return violations.empty(); }
};

struct DerivativeCheckOptions {
  int samples = 50;
  double tol = 1e-5;
  std::optional<double> s_lo;  // default s_min + 0.5
  std::optional<double> s_hi;  // default s_lo + 10
  double u_range = 2.0;
  unsigned seed = 12345;
};

DerivativeReport check_derivatives(const MechModel& model, const DerivativeCheckOptions& opts = {});

}  // namespace mtp
