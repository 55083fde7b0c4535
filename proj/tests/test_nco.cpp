#include "doctest.h"

#include "toy_models.hpp"

#include "mtp/nco.hpp"
#include "mtp/presets.hpp"
#include "mtp/trim.hpp"

#include <cmath>
#include <random>

using namespace mtp;

namespace {

const KeplerParams kp;

struct RandomPoint {
  State x;
  Eigen::Vector2d u;
  CoState lam;
};

// Near circular motion, where the trim residual stays of order one.
RandomPoint random_point(std::mt19937& rng) {
  std::uniform_real_distribution<double> sd(3.0, 8.0), one(-1.0, 1.0), ang(-3.14, 3.14);
  RandomPoint p;
  const double s = sd(rng);
  p.x = {s, 0.5 * one(rng), ang(rng), circular_speed(kp, s) * (1.0 + 0.05 * one(rng))};
  p.u = Eigen::Vector2d(2.0 * one(rng), 2.0 * one(rng));
  p.lam = {one(rng), one(rng), one(rng), one(rng)};
  return p;
}

// Fourth-order central difference.
template <class F>
double diff5(F&& f, double x, double h) {
  return (-f(x + 2 * h) + 8 * f(x + h) - 8 * f(x - h) + f(x - 2 * h)) / (12 * h);
}

double rel(double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); }

}  // namespace

TEST_CASE("Hamiltonian special cases") {
  const auto spec = preset_fig1();
  const State x{5.0, 0.3, 1.0, 2.7};
  const Eigen::Vector2d u(0.2, -0.4);
  CHECK(ocp_hamiltonian(spec.model, spec.cost, x, u, {}) == doctest::Approx(stage_cost(spec.model, spec.cost, x, u)));
  CHECK(ocp_hamiltonian(spec.model, zero_cost(2), x, u, {1.0, 0.0, 0.0, 0.0}) == doctest::Approx(0.3));
  CHECK(ocp_hamiltonian(spec.model, zero_cost(2), x, u, {0.0, 0.0, 1.0, 0.0}) == doctest::Approx(2.7));
  // linear in lam: dH/dlam is the dynamics
  const Vector4 f = el_rhs(spec.model, x, u);
  for (int k = 0; k < 4; ++k) {
    Vector4 e = Vector4::Zero();
    e[k] = 1.0;
    const double d = ocp_hamiltonian(spec.model, spec.cost, x, u, CoState::from(e)) -
                     ocp_hamiltonian(spec.model, spec.cost, x, u, {});
    CHECK(d == doctest::Approx(f[k]).epsilon(1e-10));
  }
}

TEST_CASE("adjoint and stationarity against finite differences of H") {
  std::mt19937 rng(2024);
  const OcpSpec f1 = preset_fig1();
  const OcpSpec f2 = preset_fig2();
  double worst_x = 0.0, worst_u = 0.0;
  for (int k = 0; k < 500; ++k) {
    const RandomPoint p = random_point(rng);
    const StageCost& cost = (k % 2 == 0) ? f1.cost : f2.cost;
    const MechModel& m = f1.model;
    const CoState a = adjoint_rhs(m, cost, p.x, p.u, p.lam);
    const Vector4 xv = p.x.vec();
    for (int i = 0; i < 4; ++i) {
      auto h_of = [&](double v) {
        Vector4 y = xv;
        y[i] = v;
        return ocp_hamiltonian(m, cost, State::from(y), p.u, p.lam);
      };
      const double fd = -diff5(h_of, xv[i], 2e-4 * std::max(1.0, std::abs(xv[i])));
      worst_x = std::max(worst_x, rel(a.vec()[i], fd));
    }
    CHECK(a.l_th == 0.0);
    const Eigen::VectorXd g = stationarity_residual(m, cost, p.x, p.u, p.lam);
    for (int i = 0; i < 2; ++i) {
      auto h_of = [&](double v) {
        Eigen::Vector2d w = p.u;
        w[i] = v;
        return ocp_hamiltonian(m, cost, p.x, w, p.lam);
      };
      const double fd = diff5(h_of, p.u[i], 2e-4 * std::max(1.0, std::abs(p.u[i])));
      worst_u = std::max(worst_u, rel(g[i], fd));
    }
  }
  CHECK(worst_x <= 1e-6);
  CHECK(worst_u <= 1e-6);
}

TEST_CASE("stationarity vanishes at the control reference without costates") {
  const auto spec = preset_fig1();
  const auto& c = std::get<QuadraticCost>(spec.cost);
  const Eigen::VectorXd g = stationarity_residual(spec.model, spec.cost, spec.x0, c.u_ref, {});
  CHECK(g.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("Legendre adjoint transform") {
  SUBCASE("identity map") {
    const MechModel m = toy_model(1);
    const HamState z{0.4, -1.0, 2.0, 0.5};
    const CoState nu{1.0, 2.0, 3.0, 4.0};
    CHECK((legendre_adjoint_transform(m, z, nu).vec() - nu.vec()).norm() == 0.0);
  }
  SUBCASE("zero costate") {
    const MechModel m = kepler_model();
    CHECK(legendre_adjoint_transform(m, {5.0, 1.0, 0.0, 70.0}, {}).vec().norm() == 0.0);
  }
  SUBCASE("bilinear identity, Jacobian and round trip at random points") {
    const MechModel m = kepler_model();
    std::mt19937 rng(77);
    double worst_bilinear = 0.0, worst_round = 0.0, worst_jac = 0.0;
    for (int k = 0; k < 500; ++k) {
      const RandomPoint p = random_point(rng);
      const HamState z = legendre_to_ham(m, p.x);
      const CoState nu = p.lam;
      const CoState lam = legendre_adjoint_transform(m, z, nu);
      const double lhs = lam.vec().dot(el_rhs(m, p.x, p.u));
      const double rhs = nu.vec().dot(ham_rhs(m, z, p.u));
      worst_bilinear = std::max(worst_bilinear, rel(lhs, rhs));

      // lam = (dPhi/dx)' nu with the Jacobian of the Legendre map by differences
      Eigen::Matrix4d jac;
      const Vector4 xv = p.x.vec();
      for (int i = 0; i < 4; ++i) {
        for (int r = 0; r < 4; ++r) {
          auto phi = [&](double v) {
            Vector4 y = xv;
            y[i] = v;
            return legendre_to_ham(m, State::from(y)).vec()[r];
          };
          jac(r, i) = diff5(phi, xv[i], 1e-3);
        }
      }
      const Vector4 oracle = jac.transpose() * nu.vec();
      for (int i = 0; i < 4; ++i) worst_jac = std::max(worst_jac, rel(lam.vec()[i], oracle[i]));

      const CoState back = legendre_adjoint_inverse(m, z, lam);
      worst_round = std::max(worst_round, (back.vec() - nu.vec()).cwiseAbs().maxCoeff() /
                                              std::max(1.0, nu.vec().cwiseAbs().maxCoeff()));
    }
    CHECK(worst_bilinear <= 1e-8);
    CHECK(worst_jac <= 1e-8);
    CHECK(worst_round <= 1e-12);
  }
  SUBCASE("no shape momentum: lam_s couples only through p_theta") {
    const MechModel m = kepler_model();
    const HamState z{5.0, 0.0, 0.3, 71.0};
    const CoState nu{0.7, -0.2, 0.0, 0.0};
    CHECK(legendre_adjoint_transform(m, z, nu).l_s == 0.7);
  }
}

TEST_CASE("reduced NCO residuals") {
  SUBCASE("trim point, zero cost and multipliers") {
    const MechModel m = kepler_model();
    const double v = circular_speed(kp, 5.0);
    const ReducedRates rates{v, 0.0, 0.0, 0.0};
    const auto r = reduced_nco_residuals(m, zero_cost(2), 5.0, v, Eigen::Vector2d::Zero(), {}, rates);
    CHECK(r.max_abs <= 1e-14);
    CHECK(r.pass);
  }
  SUBCASE("converged reduced solution") {
    const OcpSpec spec = preset_fig2();
    const TocpSolution t = solve_tocp(tocp_from_ocp(spec));
    REQUIRE(t.status == NlpStatus::converged);
    const auto r = reduced_nco_report(spec.model, spec.cost, t, 1e-4, TimeWindow{5.0, 90.0});
    CHECK(r.max_abs <= 1e-4);

    SUBCASE("perturbed control breaks stationarity") {
      const std::size_t i = 40;
      const double h = t.times[1] - t.times[0];
      const ReducedCostate rc{t.l_theta[i], t.l_vtheta[i], t.l_trim[i]};
      const ReducedRates rates{(t.theta[i + 1] - t.theta[i - 1]) / (2 * h),
                               (t.v_theta[i + 1] - t.v_theta[i - 1]) / (2 * h), 0.0,
                               (t.l_vtheta[i + 1] - t.l_vtheta[i - 1]) / (2 * h)};
      const auto ok = reduced_nco_residuals(spec.model, spec.cost, t.s_bar, t.v_theta[i], t.u[i], rc, rates);
      Control u = t.u[i];
      u[1] += 0.1;
      const auto bad = reduced_nco_residuals(spec.model, spec.cost, t.s_bar, t.v_theta[i], u, rc, rates);
      CHECK(bad.value("eq_steadystate3") > 10 * ok.value("eq_steadystate3"));
      CHECK(bad.value("eq_steadystate3") > 1e-5);
    }
  }
}

TEST_CASE("steady-state residuals") {
  SUBCASE("toy problem at its optimum") {
    const MechModel m = toy_model(1);
    CustomCost c;
    c.value = [](double s, double, double, const Control& u) { return s * s + u[0] * u[0]; };
    c.gradient = [](double s, double, double, const Control& u) {
      CostGradient out;
      out.dx[0] = 2 * s;
      out.du = Eigen::VectorXd::Constant(1, 2 * u[0]);
      return out;
    };
    const auto r = sop_stationarity_residuals(m, c, 0.0, 0.8, Eigen::VectorXd::Zero(1), 0.0);
    CHECK(r.max_abs == 0.0);
    const auto bad = sop_stationarity_residuals(m, c, 0.5, 0.8, Eigen::VectorXd::Constant(1, 0.2), 0.0);
    CHECK(bad.max_abs > 0.1);
  }
  SUBCASE("random Kepler point is not critical") {
    const auto spec = preset_fig1();
    const auto r = sop_stationarity_residuals(spec.model, spec.cost, 5.7, 2.0, Eigen::Vector2d(0.3, 0.1), 0.4);
    CHECK(r.max_abs > 1e-3);
    CHECK(!r.pass);
  }
}

TEST_CASE("correspondence of reduced and full conditions") {
  const OcpSpec spec = preset_fig2();
  TocpSolution t = solve_tocp(tocp_from_ocp(spec));
  REQUIRE(t.status == NlpStatus::converged);
  const TimeWindow w{5.0, 90.0};
  const Correspondence c = correspondence_full_from_reduced(spec.model, spec.cost, t, 1e-3, w);
  CHECK(c.report.pass);
  CHECK(c.report.value("primal_v_s") <= 1e-8);
  for (const auto& l : c.full.costates) CHECK(l.l_th == 0.0);
  CHECK(c.full.costates.back().l_vs == 0.0);

  SUBCASE("shifting the trim multiplier moves eq_dynamicsys4 by its coefficient") {
    const std::size_t i = 60;
    const TimeWindow one{t.times[i], t.times[i]};
    const double before = correspondence_full_from_reduced(spec.model, spec.cost, t, 1e-3, one).report.entry("eq_dynamicsys4").raw;
    for (auto& l : t.l_trim) l += 1.0;
    const double after = correspondence_full_from_reduced(spec.model, spec.cost, t, 1e-3, one).report.entry("eq_dynamicsys4").raw;
    const double s = t.s_bar, v = t.v_theta[i];
    const double coeff = spec.model.m22_d(s) * v / spec.model.m11(s);
    CHECK(std::abs(after - before) == doctest::Approx(std::abs(coeff)).epsilon(1e-10));
  }
}

TEST_CASE("correspondence without cyclic forcing") {
  TocpSpec t;
  t.model = kepler_radial_only();
  TrimPenaltyCost c;
  c.s_ref = 5.3;
  c.u_ref = Eigen::Vector2d(0.0, 1.0);
  c.r = 1e-3 * Eigen::Vector2d::Ones();
  t.cost = c;
  t.v_th0 = circular_speed(kp, 5.0);
  t.horizon = 20.0;
  t.intervals = 40;
  t.s_guess = 5.0;
  const TocpSolution sol = solve_tocp(t);
  REQUIRE(sol.status == NlpStatus::converged);
  const Correspondence corr = correspondence_full_from_reduced(t.model, t.cost, sol);
  for (const auto& l : corr.full.costates) CHECK(l.l_th == 0.0);
  CHECK(corr.report.value("primal_theta") <= 1e-10);
  CHECK(corr.report.value("eq_dynamicsys4") <= 1e-10);
  // the trim cannot be balanced through the cyclic coordinate
  CHECK(corr.report.value("eq_dynamicsys2") > 0.1);
  CHECK(!corr.report.pass);
}
