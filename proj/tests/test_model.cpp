#include "doctest.h"

#include "mtp/error.hpp"
#include "mtp/kepler.hpp"
#include "mtp/model.hpp"

#include <cmath>
#include <random>

using namespace mtp;

namespace {

const KeplerParams kp;

MechModel flat_model() {
  MechModel m;
  m.name = "flat";
  m.m11 = [](double) { return 1.0; };
  m.m11_d = [](double) { return 0.0; };
  m.m11_dd = [](double) { return 0.0; };
  m.m22 = m.m11;
  m.m22_d = m.m11_d;
  m.m22_dd = m.m11_dd;
  m.pot = [](double) { return 0.0; };
  m.pot_d = m.pot;
  m.pot_dd = m.pot;
  m.f_s = [](const Control& u) { return u[0]; };
  m.f_s_jac = [](const Control&) { return Eigen::RowVectorXd::Unit(1, 0); };
  m.f_th = [](const Control&) { return 0.0; };
  m.f_th_jac = [](const Control&) { return Eigen::RowVectorXd::Zero(1); };
  m.control_dim = 1;
  m.s_min = -1e9;
  m.forcing_surjective = true;
  m.orthogonal_forcing = true;
  return m;
}

State random_state(std::mt19937& rng) {
  std::uniform_real_distribution<double> s(1.0, 10.0), v(-3.0, 3.0), th(-5.0, 5.0);
  return {s(rng), v(rng), th(rng), v(rng)};
}

double rel(double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); }

}  // namespace

TEST_CASE("el_rhs at circular orbit has no acceleration") {
  const auto m = kepler_model();
  const State x = circular_state(kp, 5.0);
  const Vector4 f = el_rhs(m, x, Eigen::Vector2d::Zero());
  CHECK(std::abs(f[0]) < 1e-14);
  CHECK(std::abs(f[1]) < 1e-12);
  CHECK(f[2] == doctest::Approx(x.v_th));
  CHECK(std::abs(f[3]) < 1e-14);
}

TEST_CASE("el_rhs radial fall") {
  const auto m = kepler_model();
  const Vector4 f = el_rhs(m, {5.0, 0.0, 0.0, 0.0}, Eigen::Vector2d::Zero());
  // s v_th^2 - k / (m2 s^2) with v_th = 0
  CHECK(f[1] == doctest::Approx(-kp.k / 25.0).epsilon(1e-14));
  CHECK(f[1] == doctest::Approx(-40.67580771).epsilon(1e-9));
}

TEST_CASE("el_rhs flat model") {
  const Vector4 f = el_rhs(flat_model(), {0.3, 1.0, 0.0, 0.0}, Control::Zero(1));
  CHECK(f.isApprox(Vector4(1, 0, 0, 0)));
}

TEST_CASE("domain violation is rejected") {
  const auto m = kepler_model();
  CHECK_THROWS_AS(el_rhs(m, {0.05, 0, 0, 0}, Eigen::Vector2d::Zero()), DomainError);
  CHECK_THROWS_AS(legendre_to_ham(m, {0.1, 0, 0, 0}), DomainError);
}

TEST_CASE("el_jacobians against finite differences") {
  const auto m = kepler_model();
  std::mt19937 rng(7);
  std::uniform_real_distribution<double> ud(-2, 2);
  for (int k = 0; k < 20; ++k) {
    const State x = random_state(rng);
    const Eigen::Vector2d u(ud(rng), ud(rng));
    const ElJacobians j = el_jacobians(m, x, u);
    for (int c = 0; c < 4; ++c) {
      const double h = 1e-6;
      Vector4 xp = x.vec(), xm = x.vec();
      xp[c] += h;
      xm[c] -= h;
      const Vector4 fd = (el_rhs(m, State::from(xp), u) - el_rhs(m, State::from(xm), u)) / (2 * h);
      CHECK((fd - j.fx.col(c)).norm() <= 1e-6 * std::max(1.0, fd.norm()));
    }
    for (int c = 0; c < 2; ++c) {
      Eigen::Vector2d up = u, um = u;
      up[c] += 1e-6;
      um[c] -= 1e-6;
      const Vector4 fd = (el_rhs(m, x, up) - el_rhs(m, x, um)) / 2e-6;
      CHECK((fd - j.fu.col(c)).norm() <= 1e-6);
    }
  }
}

TEST_CASE("ham_rhs") {
  const auto m = kepler_model();
  SUBCASE("trim state maps to a Hamiltonian equilibrium") {
    const State x = circular_state(kp, 5.0);
    const Vector4 g = ham_rhs(m, legendre_to_ham(m, x), Eigen::Vector2d::Zero());
    CHECK(std::abs(g[0]) < 1e-14);
    CHECK(std::abs(g[1]) < 1e-10);
    CHECK(g[2] == doctest::Approx(x.v_th));
    CHECK(g[3] == 0.0);
  }
  SUBCASE("identity mass matrix: p equals v") {
    const auto f = flat_model();
    const State x{0.2, 0.7, 1.0, -0.4};
    const Control u = Control::Constant(1, 0.3);
    const Vector4 a = el_rhs(f, x, u);
    const Vector4 b = ham_rhs(f, legendre_to_ham(f, x), u);
    CHECK((a - b).norm() < 1e-14);
  }
  SUBCASE("push-forward of el_rhs through the Legendre map") {
    std::mt19937 rng(11);
    std::uniform_real_distribution<double> ud(-2, 2);
    for (int k = 0; k < 100; ++k) {
      const State x = random_state(rng);
      const Eigen::Vector2d u(ud(rng), ud(rng));
      const Vector4 f = el_rhs(m, x, u);
      // d/dt (s, M11 v_s, th, M22 v_th)
      Matrix4 dphi = Matrix4::Identity();
      dphi(1, 0) = m.m11_d(x.s) * x.v_s;
      dphi(1, 1) = m.m11(x.s);
      dphi(3, 0) = m.m22_d(x.s) * x.v_th;
      dphi(3, 3) = m.m22(x.s);
      const Vector4 push = dphi * f;
      const Vector4 g = ham_rhs(m, legendre_to_ham(m, x), u);
      CHECK((push - g).norm() <= 1e-8 * std::max(1.0, g.norm()));
    }
  }
}

TEST_CASE("Legendre map, energies and momentum") {
  const auto m = kepler_model();
  const State x = circular_state(kp, 5.0);
  const HamState z = legendre_to_ham(m, x);
  CHECK(z.p_s == 0.0);
  CHECK(z.p_th == doctest::Approx(25.0 * x.v_th).epsilon(1e-15));
  CHECK(z.p_th == doctest::Approx(71.3056).epsilon(1e-5));
  CHECK(momentum(m, x) == doctest::Approx(z.p_th));
  CHECK(hamiltonian_energy(m, z) == doctest::Approx(-kp.k / 10.0).epsilon(1e-14));
  CHECK(hamiltonian_energy(m, z) == doctest::Approx(-101.6895193).epsilon(1e-9));
  CHECK(momentum(m, {3.0, 0.1, 0.0, 0.0}) == 0.0);

  const State rest{4.0, 0.0, 1.0, 0.0};
  CHECK(lagrangian(m, rest) == doctest::Approx(-m.pot(4.0)));
  CHECK(hamiltonian_energy(m, legendre_to_ham(m, rest)) == doctest::Approx(m.pot(4.0)));
  const HamState z0 = legendre_to_ham(m, rest);
  CHECK(z0.p_s == 0.0);
  CHECK(z0.p_th == 0.0);

  std::mt19937 rng(3);
  for (int k = 0; k < 200; ++k) {
    const State y = random_state(rng);
    const State back = legendre_to_el(m, legendre_to_ham(m, y));
    CHECK((back.vec() - y.vec()).norm() <= 1e-12 * y.vec().norm());
    const double kin = m.m11(y.s) * y.v_s * y.v_s + m.m22(y.s) * y.v_th * y.v_th;
    CHECK(rel(lagrangian(m, y) + hamiltonian_energy(m, legendre_to_ham(m, y)), kin) < 1e-12);
  }
}

TEST_CASE("rk4 keeps a trim trajectory") {
  const auto m = kepler_model();
  const State x0 = circular_state(kp, 5.0);
  const auto grid = uniform_grid(30.0, 300);
  const std::vector<Control> u(300, Eigen::Vector2d::Zero());
  const Trajectory tr = simulate(m, x0, u, grid);
  REQUIRE(tr.size() == 301);
  for (std::size_t i = 0; i < tr.size(); ++i) {
    CHECK(std::abs(tr.states[i].s - 5.0) < 1e-10);
    CHECK(std::abs(tr.states[i].v_s) < 1e-10);
    CHECK(std::abs(tr.states[i].v_th - x0.v_th) < 1e-10);
    CHECK(std::abs(tr.states[i].th - x0.v_th * grid[i]) < 1e-10);
  }
  CHECK(tr.states.back().th == doctest::Approx(85.5666).epsilon(1e-5));
}

TEST_CASE("simulate edge cases") {
  const auto m = kepler_model();
  const Trajectory one = simulate(m, {2, 0, 0, 0}, {}, {0.0});
  CHECK(one.size() == 1);
  CHECK(one.controls.empty());
  // radial fall from rest hits the domain boundary
  const auto grid = uniform_grid(5.0, 500);
  const std::vector<Control> u(500, Eigen::Vector2d::Zero());
  try {
    simulate(m, {2.0, 0, 0, 0}, u, grid);
    FAIL("expected a domain error");
  } catch (const DomainError& e) {
    CHECK(e.time() > 0.0);
    CHECK(e.time() < 5.0);
  }
  CHECK_THROWS_AS(simulate(m, {2.0, 0, 0, 0}, {}, grid), Error);
}

TEST_CASE("rk4 order on an eccentric orbit") {
  const auto m = kepler_model();
  const State x0{5.0, 0.5, 0.0, 1.1 * circular_speed(kp, 5.0)};
  const double horizon = 10.0;
  auto endpoint = [&](int n) {
    const std::vector<Control> u(n, Eigen::Vector2d::Zero());
    return simulate(m, x0, u, uniform_grid(horizon, n)).states.back().vec();
  };
  const Vector4 ref = endpoint(100000);
  const double e1 = (endpoint(100) - ref).norm();
  const double e2 = (endpoint(200) - ref).norm();
  const double order = std::log2(e1 / e2);
  MESSAGE("rk4 order estimate " << order);
  CHECK(order >= 3.8);
}

TEST_CASE("momentum drift without cyclic forcing is integration error") {
  const auto m = kepler_model();
  const State x0{5.0, 0.5, 0.0, 1.1 * circular_speed(kp, 5.0)};
  auto drift = [&](int n) {
    const std::vector<Control> u(n, Eigen::Vector2d(0.3, 0.0));
    const Trajectory tr = simulate(m, x0, u, uniform_grid(30.0, n));
    double worst = 0.0;
    for (const auto& x : tr.states) worst = std::max(worst, std::abs(momentum(m, x) - momentum(m, x0)));
    return worst;
  };
  const double d1 = drift(300), d2 = drift(600);
  CHECK(d1 / std::abs(momentum(m, x0)) < 1e-4);
  CHECK(d1 / d2 > 12.0);

  const State trim = circular_state(kp, 5.0);
  const std::vector<Control> u(300, Eigen::Vector2d::Zero());
  const Trajectory tr = simulate(m, trim, u, uniform_grid(30.0, 300));
  for (const auto& x : tr.states) CHECK(rel(momentum(m, x), momentum(m, trim)) <= 1e-12);
}

TEST_CASE("check_derivatives") {
  CHECK(check_derivatives(kepler_model()).ok());
  CHECK(check_derivatives(flat_model()).ok());
  auto bad = kepler_model();
  bad.m22_d = [](double s) { return 2.1 * s; };
  const auto report = check_derivatives(bad);
  REQUIRE_FALSE(report.ok());
  CHECK(report.violations.front().quantity == "m22_d");
}

TEST_CASE("trajectory validation") {
  Trajectory t;
  t.times = {0.0, 1.0};
  t.states = {State{}, State{}};
  t.controls = {Control::Zero(1)};
  CHECK_NOTHROW(t.validate());
  t.times = {0.0, 0.0};
  CHECK_THROWS_AS(t.validate(), Error);
  t.times = {0.0, 1.0};
  t.controls.clear();
  CHECK_THROWS_AS(t.validate(), Error);
}
