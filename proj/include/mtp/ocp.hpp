#pragma once

// Direct multiple shooting with RK4 and piecewise-constant controls.
//
// Full OCP variables are interleaved per node: [x_0, u_0, x_1, u_1, ..., x_N].
// Constraints: x_0 = x0 (4), x_{i+1} - RK4(x_i, u_i, h) = 0 (4N), terminal
// components, optional psi(x_N) <= 0. Objective sum_i l(x_i, u_i) h.
//
// Costates: lambda_0 = -mu_init, lambda_{i+1} = -mu_defect_i.

#include "mtp/cost.hpp"
#include "mtp/kepler.hpp"
#include "mtp/nlp.hpp"

#include <optional>
#include <string>
#include <vector>

namespace mtp {

struct FixedComponent {
  int index = 0;  // 0 s, 1 v_s, 2 theta, 3 v_theta
  double value = 0.0;
};

/// psi(x_N) <= 0 with an analytic Jacobian (rows x 4).
struct GeneralTerminal {
  int count = 0;
  std::function<Eigen::VectorXd(const State&)> psi;
  std::function<Eigen::MatrixXd(const State&)> jacobian;
};

struct Terminal {
  std::vector<FixedComponent> fixed;
  std::optional<GeneralTerminal> general;

  [[nodiscard]] bool none() const { return fixed.empty() && !general; }
};

/// Empty vectors mean unbounded.
struct ControlBounds {
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;
};

struct OcpSpec {
  MechModel model;
  /// Preset used to rebuild the model when the spec is read back from JSON.
  std::string model_preset = "kepler";
  KeplerParams kepler;
  double horizon = 1.0;
  int intervals = 1;
  StageCost cost;
  State x0;
  Terminal terminal;
  ControlBounds bounds;
  std::optional<Trajectory> warm_start;

  /// Throws when the spec is inconsistent.
  void validate() const;
};

struct OcpOptions {
  SqpOptions sqp = [] {
    SqpOptions o;
    o.hessian = HessianMode::exact;
    o.max_iter = 300;
    return o;
  }();
  /// Margin kept between s and s_min by the bound constraints.
  double domain_margin = 1e-6;
};

/// Variable layout of the full transcription.
struct OcpLayout {
  int n_nodes = 0;  // N + 1
  int m = 0;
  [[nodiscard]] int x(int i) const { return i * (4 + m); }
  [[nodiscard]] int u(int i) const { return i * (4 + m) + 4; }
  [[nodiscard]] int size() const { return (n_nodes - 1) * (4 + m) + 4; }
};

OcpLayout ocp_layout(const OcpSpec& spec);

/// Equality rows: [initial (4), defects (4N), fixed terminal components].
NlpProblem transcribe(const OcpSpec& spec, const OcpOptions& opts = {});

/// Constant hold of x0 with u = u_ref, or the spec's warm start.
Eigen::VectorXd initial_guess(const OcpSpec& spec);

struct OcpSolution {
  Trajectory trajectory;  // costates filled
  double objective = 0.0;
  NlpStatus status = NlpStatus::max_iter;
  KktResiduals kkt;
  int iterations = 0;
  double max_defect = 0.0;
  double initial_error = 0.0;
  double seconds = 0.0;
  /// Multipliers of the fixed terminal components and psi.
  Eigen::VectorXd terminal_multipliers;
  std::vector<std::string> warnings;
  NlpSolution nlp;
};

OcpSolution solve_ocp(const OcpSpec& spec, const OcpOptions& opts = {});

/// Maps defect multipliers to node costates (see header comment).
std::vector<CoState> recover_costates(const OcpSpec& spec, const NlpSolution& nlp);

/// l(x_i, u_i) for every interval i (left-rectangle integrand).
std::vector<double> stage_costs(const MechModel& model, const StageCost& cost, const Trajectory& traj);

// Reduced problem on the trim manifold.
//
// Variables [s_bar, (th_i, v_i, u_i) for i < N, th_N, v_N]. Dynamics
// th' = v, v' = f_th(u) / M22(s_bar); path constraint T(s_bar, v_i, u_i) = 0
// for every interval; objective sum_i l(s_bar, 0, v_i, u_i) h.

struct TocpSpec {
  MechModel model;
  StageCost cost;
  double th0 = 0.0;
  double v_th0 = 0.0;
  double horizon = 1.0;
  int intervals = 1;
  double s_guess = 1.0;
  ControlBounds bounds;
};

struct TocpSolution {
  double s_bar = 0.0;
  std::vector<double> times;
  std::vector<double> theta;      // per node
  std::vector<double> v_theta;    // per node
  std::vector<Control> u;         // per interval
  std::vector<double> l_theta;    // per node
  std::vector<double> l_vtheta;   // per node
  std::vector<double> l_trim;     // per interval, multiplier density of T = 0
  double objective = 0.0;
  NlpStatus status = NlpStatus::max_iter;
  KktResiduals kkt;
  int iterations = 0;
  double max_trim_residual = 0.0;
  double seconds = 0.0;

  /// Full-state view (s_bar, 0, theta, v_theta) without costates.
  [[nodiscard]] Trajectory trajectory() const;
};

TocpSolution solve_tocp(const TocpSpec& spec, const OcpOptions& opts = {});

/// Convenience: reduced problem matching a full spec (same model, cost, horizon, grid, initial cyclic state).
TocpSpec tocp_from_ocp(const OcpSpec& spec);

// Steady-state trim optimization: min l(s, 0, v_th, u) s.t. T(s, v_th, u) = 0.
// When the model has cyclic forcing, f_th(u) = 0 is added so that the optimum
// is a trim (v_th constant).

struct SopSolution {
  double s_bar = 0.0;
  double v_theta_bar = 0.0;
  Control u_bar;
  double lambda = 0.0;          // multiplier of T = 0
  double lambda_cyclic = 0.0;   // multiplier of f_th(u) = 0 (0 when not added)
  bool cyclic_constraint = false;
  double objective = 0.0;
  double trim_residual = 0.0;
  NlpStatus status = NlpStatus::max_iter;
  KktResiduals kkt;
  int iterations = 0;
};

struct SopGuess {
  double s = 1.0;
  double v_th = 1.0;
  Control u;
};

/// Exact (finite-difference) Hessian, tol 1e-10.
SqpOptions sop_default_options();

SopSolution solve_sop(const MechModel& model, const StageCost& cost, const SopGuess& guess,
                      const SqpOptions& opts = sop_default_options());

}  // namespace mtp
