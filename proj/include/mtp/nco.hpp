#pragma once

// First-order necessary conditions (normal case, cost multiplier 1).
//
//   H(x, u, lam) = l(x, u) + lam' f(x, u)
//   lam' = -H_x,   0 = H_u
//
// Residuals are scaled as |r| / (1 + max |term|) with the terms of the
// respective equation, so tolerances are dimensionless.

#include "mtp/cost.hpp"
#include "mtp/ocp.hpp"

#include <limits>
#include <string>
#include <vector>

namespace mtp {

/// Closed time window over which trajectory residuals are collected.
struct TimeWindow {
  double from = -std::numeric_limits<double>::infinity();
  double to = std::numeric_limits<double>::infinity();
  [[nodiscard]] bool contains(double t) const { return t >= from - 1e-12 && t <= to + 1e-12; }
};

struct ReducedCostate {
  double l_th_bar = 0.0;
  double l_vth_bar = 0.0;
  double l_trim = 0.0;  // multiplier density of T = 0
};

/// Time derivatives of the reduced primal and dual variables at a node.
struct ReducedRates {
  double th = 0.0;
  double v_th = 0.0;
  double l_th_bar = 0.0;
  double l_vth_bar = 0.0;
};

struct NcoEntry {
  std::string name;
  double value = 0.0;  // scaled
  double raw = 0.0;
  double magnitude = 0.0;  // largest term of the equation
  double time = 0.0;   // where the maximum occurred
};

struct NcoResidualReport {
  std::vector<NcoEntry> residuals;    // gate the pass flag
  std::vector<NcoEntry> diagnostics;  // reported only
  double max_abs = 0.0;
  double tol = 1e-4;
  bool pass = false;
  /// Terminal constraints present: transversality is not checked.
  bool caveat = false;
  std::string note;

  /// Keeps the entry with the largest scaled value per name.
  void record(const std::string& name, double raw, double magnitude, double time = 0.0);
  void record_diagnostic(const std::string& name, double raw, double magnitude, double time = 0.0);
  /// Recomputes max_abs and pass.
  void finish(double tolerance);
  /// Scaled value of a residual or diagnostic; throws if absent.
  [[nodiscard]] double value(const std::string& name) const;
  [[nodiscard]] const NcoEntry& entry(const std::string& name) const;
};

double ocp_hamiltonian(const MechModel& model, const StageCost& cost, const State& x, const Control& u,
                       const CoState& lam);

/// lam' = -A' lam - grad_x l with the explicit Jacobian A of the Euler-Lagrange
/// right-hand side. The theta row is always 0.
CoState adjoint_rhs(const MechModel& model, const StageCost& cost, const State& x, const Control& u,
                    const CoState& lam);

/// H_u = dT/du lam_vs + M22^{-1} f_th'(u) lam_vth + dl/du.
Eigen::VectorXd stationarity_residual(const MechModel& model, const StageCost& cost, const State& x,
                                      const Control& u, const CoState& lam);

/// Pointwise residuals of the reduced NCO: "eq_steadystate1".."eq_steadystate7"
/// and "lambda_th_bar_zero".
NcoResidualReport reduced_nco_residuals(const MechModel& model, const StageCost& cost, double s_bar,
                                        double v_bar, const Control& u_bar, const ReducedCostate& rc,
                                        const ReducedRates& rates);

/// Reduced NCO along a T-OCP solution. Rates come from central differences on
/// the node grid (one-sided at the ends). Stationarity in s_bar is reported as
/// the time average, because s_bar is one decision variable for the whole
/// horizon; the pointwise value is a diagnostic.
NcoResidualReport reduced_nco_report(const MechModel& model, const StageCost& cost, const TocpSolution& tocp,
                                     double tol = 1e-4, const TimeWindow& window = {});

/// "eq_sspL1".."eq_sspL4". lam_cyclic multiplies f_th(u) = 0 when that
/// constraint was part of the steady-state problem.
NcoResidualReport sop_stationarity_residuals(const MechModel& model, const StageCost& cost, double s_bar,
                                             double v_bar, const Control& u_bar, double lam_bar,
                                             double lam_cyclic = 0.0, double tol = 1e-8);

struct Correspondence {
  Trajectory full;     // s = s_bar, v_s = 0, costates per node
  double lambda_s = 0.0;
  NcoResidualReport report;
};

/// Lifts a reduced solution to full NCO variables:
///   lam_s constant (from the v_s adjoint equation at the first node),
///   lam_vs = l_trim, lam_th = 0, lam_vth = l_vth_bar,
/// and evaluates "eq_dynamicsys1", 2, 4, 5 plus the primal dynamics.
Correspondence correspondence_full_from_reduced(const MechModel& model, const StageCost& cost,
                                                const TocpSolution& tocp, double tol = 1e-3,
                                                const TimeWindow& window = {});

/// Full NCO along a multiple-shooting solution: adjoint equations
/// ("eq_adjoint_s", ..., central differences of node costates) and gradient
/// stationarity ("eq_gradeq", midpoint costate). Recovered costates carry an
/// O(h) error, so the residuals measure discretization as well.
NcoResidualReport ocp_nco_report(const OcpSpec& spec, const OcpSolution& sol, double tol = 1e-3,
                                 const TimeWindow& window = {});

/// lam = (dPhi/dx)' nu at x = Phi^{-1}(z), Phi the Legendre map.
CoState legendre_adjoint_transform(const MechModel& model, const HamState& z, const CoState& nu);
/// nu from lam by back substitution.
CoState legendre_adjoint_inverse(const MechModel& model, const HamState& z, const CoState& lam);

}  // namespace mtp
