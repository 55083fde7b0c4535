#include "doctest.h"

#include "mtp/error.hpp"
#include "mtp/kepler.hpp"
#include "mtp/trim.hpp"

#include <cmath>
#include <random>

using namespace mtp;

namespace {

const KeplerParams kp;

// M11 = M22 = 1, V = s^2 / 2, f_s = u, f_th = 0
MechModel toy_model() {
  MechModel m;
  m.m11 = [](double) { return 1.0; };
  m.m11_d = [](double) { return 0.0; };
  m.m11_dd = [](double) { return 0.0; };
  m.m22 = m.m11;
  m.m22_d = m.m11_d;
  m.m22_dd = m.m11_dd;
  m.pot = [](double s) { return 0.5 * s * s; };
  m.pot_d = [](double s) { return s; };
  m.pot_dd = [](double) { return 1.0; };
  m.f_s = [](const Control& u) { return u[0]; };
  m.f_s_jac = [](const Control&) { return Eigen::RowVectorXd::Ones(1); };
  m.f_th = [](const Control&) { return 0.0; };
  m.f_th_jac = [](const Control&) { return Eigen::RowVectorXd::Zero(1); };
  m.control_dim = 1;
  m.s_min = -100.0;
  m.forcing_surjective = true;
  m.orthogonal_forcing = true;
  return m;
}

}  // namespace

TEST_CASE("trim residual on circular orbits") {
  const auto m = kepler_model();
  for (double s : {0.5, 4.5, 5.0, 5.3, 6.0, 20.0}) {
    CHECK(std::abs(trim_residual(m, s, circular_speed(kp, s), Eigen::Vector2d::Zero())) < 1e-11);
  }
  CHECK(trim_residual(m, 5.0, 0.0, Eigen::Vector2d::Zero()) == doctest::Approx(-40.67580771).epsilon(1e-9));
}

TEST_CASE("trim manifold control law") {
  const auto m = kepler_model();
  std::mt19937 rng(5);
  std::uniform_real_distribution<double> vd(-4.0, 4.0);
  for (int k = 0; k < 50; ++k) {
    const double v = vd(rng);
    const double us = -kp.m2 * 4.5 * v * v + kp.k / (4.5 * 4.5);
    CHECK(std::abs(trim_residual(m, 4.5, v, Eigen::Vector2d(us, vd(rng)))) < 1e-10);
  }
}

TEST_CASE("trim residual gradients") {
  const auto m = kepler_model();
  std::mt19937 rng(9);
  std::uniform_real_distribution<double> sd(1.0, 10.0), vd(-3.0, 3.0);
  for (int k = 0; k < 200; ++k) {
    const double s = sd(rng), v = vd(rng);
    const Eigen::Vector2d u(vd(rng), vd(rng));
    const TrimGradients g = trim_residual_grads(m, s, v, u);
    CHECK(g.dv_th == doctest::Approx(2.0 * s * v).epsilon(1e-14));
    const double h = 1e-6;
    const double fs = (trim_residual(m, s + h, v, u) - trim_residual(m, s - h, v, u)) / (2 * h);
    const double fv = (trim_residual(m, s, v + h, u) - trim_residual(m, s, v - h, u)) / (2 * h);
    CHECK(std::abs(fs - g.ds) <= 1e-6 * std::max(1.0, std::abs(fs)));
    CHECK(std::abs(fv - g.dv_th) <= 1e-6 * std::max(1.0, std::abs(fv)));
    for (int c = 0; c < 2; ++c) {
      Eigen::Vector2d up = u, um = u;
      up[c] += h;
      um[c] -= h;
      const double fu = (trim_residual(m, s, v, up) - trim_residual(m, s, v, um)) / (2 * h);
      CHECK(std::abs(fu - g.du[c]) <= 1e-6 * std::max(1.0, std::abs(fu)));
    }
  }
  MechModel flat = toy_model();
  flat.pot = [](double) { return 0.0; };
  flat.pot_d = flat.pot;
  flat.pot_dd = flat.pot;
  flat.f_s = [](const Control&) { return 0.0; };
  flat.f_s_jac = [](const Control&) { return Eigen::RowVectorXd::Zero(1); };
  const TrimGradients z = trim_residual_grads(flat, 1.0, 2.0, Control::Ones(1));
  CHECK(z.ds == 0.0);
  CHECK(z.dv_th == 0.0);
  CHECK(z.du[0] == 0.0);
}

TEST_CASE("forced amended potential") {
  const auto m = kepler_model();
  SUBCASE("no forcing, no momentum") {
    const AmendedPotential ap = forced_amended_potential(m, 3.0, 0.0, Eigen::Vector2d::Zero());
    CHECK(ap.value == doctest::Approx(m.pot(3.0)));
    CHECK(ap.grad_s == doctest::Approx(m.pot_d(3.0)));
  }
  SUBCASE("gradient identity with the trim residual") {
    std::mt19937 rng(13);
    std::uniform_real_distribution<double> sd(0.5, 10.0), vd(-3.0, 3.0);
    for (int k = 0; k < 1000; ++k) {
      const double s = sd(rng), v = vd(rng);
      const Eigen::Vector2d u(vd(rng), vd(rng));
      const double mu = m.m22(s) * v;
      const double g = forced_amended_potential(m, s, mu, u).grad_s;
      const double t = trim_residual(m, s, v, u);
      const double scale = std::max({1.0, std::abs(g), std::abs(m.m11(s) * t)});
      CHECK(std::abs(g + m.m11(s) * t) <= 1e-10 * scale);
    }
  }
  SUBCASE("circular orbit is a critical point") {
    const double s = 4.2;
    const double mu = kp.m2 * s * s * circular_speed(kp, s);
    CHECK(std::abs(forced_amended_potential(m, s, mu, Eigen::Vector2d::Zero()).grad_s) < 1e-10);
  }
  SUBCASE("gradient matches finite differences of the value") {
    const double s = 3.7, mu = 40.0;
    const Eigen::Vector2d u(0.4, -1.0);
    const double h = 1e-6;
    const double fd = (forced_amended_potential(m, s + h, mu, u).value -
                       forced_amended_potential(m, s - h, mu, u).value) / (2 * h);
    CHECK(fd == doctest::Approx(forced_amended_potential(m, s, mu, u).grad_s).epsilon(1e-7));
  }
  CHECK(forced_potential(m, 2.0, Eigen::Vector2d(1.0, 0.0)) == doctest::Approx(m.pot(2.0) - 2.0));
}

TEST_CASE("solve_trim") {
  const auto m = kepler_model();
  SUBCASE("cyclic velocity at s = 4.5") {
    TrimRequest r;
    r.unknown = TrimUnknown::cyclic_velocity;
    r.s = 4.5;
    r.u = Eigen::Vector2d::Zero();
    r.guess = 1.0;
    const TrimPoint tp = solve_trim(m, r);
    CHECK(tp.v_th == doctest::Approx(circular_speed(kp, 4.5)).epsilon(1e-12));
    CHECK(tp.v_th == doctest::Approx(3.34056).epsilon(1e-5));
    CHECK(std::abs(tp.residual) <= 1e-10);
    // re-solving from the answer needs no further iteration
    r.guess = tp.v_th;
    CHECK(solve_trim(m, r).iterations <= 1);
  }
  SUBCASE("unforced control at s = 5.3") {
    TrimRequest r;
    r.unknown = TrimUnknown::control;
    r.control_index = 0;
    r.s = 5.3;
    r.v_th = circular_speed(kp, 5.3);
    r.u = Eigen::Vector2d::Zero();
    const TrimPoint tp = solve_trim(m, r);
    CHECK(std::abs(tp.u[0]) < 1e-9);
  }
  SUBCASE("linear residual converges in one step") {
    TrimRequest r;
    r.unknown = TrimUnknown::control;
    r.s = 2.0;
    r.v_th = 1.5;
    r.u = Control::Zero(1);
    r.guess = 7.0;
    const TrimPoint tp = solve_trim(toy_model(), r);
    CHECK(tp.u[0] == doctest::Approx(2.0).epsilon(1e-14));
    CHECK(tp.iterations == 1);
  }
  SUBCASE("shape") {
    TrimRequest r;
    r.unknown = TrimUnknown::shape;
    r.v_th = circular_speed(kp, 6.0);
    r.u = Eigen::Vector2d::Zero();
    r.guess = 5.0;
    CHECK(solve_trim(m, r).s == doctest::Approx(6.0).epsilon(1e-10));
  }
  SUBCASE("failures") {
    TrimRequest r;
    r.unknown = TrimUnknown::cyclic_velocity;
    r.s = 5.0;
    r.u = Eigen::Vector2d::Zero();
    r.guess = 0.0;  // dT/dv_th = 0
    CHECK_THROWS_WITH_AS(solve_trim(m, r), doctest::Contains("singular Newton step"), Error);
    r.unknown = TrimUnknown::control;
    r.control_index = 1;  // u_th does not enter T
    r.guess = 1.0;
    CHECK_THROWS_AS(solve_trim(m, r), Error);
    r.control_index = 5;
    CHECK_THROWS_AS(solve_trim(m, r), Error);
  }
}

TEST_CASE("trim trajectory") {
  const auto m = kepler_model();
  TrimPoint tp{5.0, circular_speed(kp, 5.0), Eigen::Vector2d::Zero(), 0.0};
  const Trajectory one = trim_trajectory(tp, m, 0.4, {0.0});
  REQUIRE(one.size() == 1);
  CHECK(one.states[0].th == 0.4);
  CHECK(one.states[0].v_s == 0.0);

  const auto grid = uniform_grid(30.0, 300);
  const Trajectory tr = trim_trajectory(tp, m, 0.0, grid);
  CHECK(tr.states.back().th == doctest::Approx(30.0 * tp.v_th));
  CHECK(tr.states.back().th == doctest::Approx(85.5666).epsilon(1e-5));
  for (std::size_t i = 0; i + 1 < tr.size(); ++i) {
    const Vector4 f = el_rhs(m, tr.states[i], tr.controls[i]);
    const Vector4 dx(0.0, 0.0, tp.v_th, 0.0);
    CHECK((f - dx).norm() < 1e-10);
    CHECK(tr.states[i].v_s == 0.0);
    CHECK(std::abs(trim_residual(m, tr.states[i].s, tr.states[i].v_th, tr.controls[i])) <= tp.trim_tol);
  }
}

TEST_CASE("manifold distance") {
  const auto m = kepler_model();
  CHECK(manifold_distance(m, circular_state(kp, 5.0)) == 0.0);
  CHECK(manifold_distance(m, {5.0, 0.3, 0.0, circular_speed(kp, 5.0)}) == doctest::Approx(0.3));
  CHECK(combined_residual(m, circular_state(kp, 5.0), Eigen::Vector2d::Zero()) < 1e-10);
  CHECK(combined_residual(m, {5.0, 0.3, 0, 0}, Eigen::Vector2d::Zero(), 0.0) == doctest::Approx(0.3));

  MechModel bounded = kepler_model();
  bounded.forcing_surjective = false;
  bounded.f_s = [](const Control& u) { return std::tanh(u[0]); };
  bounded.f_s_jac = [](const Control& u) {
    const double t = std::tanh(u[0]);
    return Eigen::RowVector2d(1.0 - t * t, 0.0);
  };
  // reachable: trim needs f_s = 0.5
  const double s = 5.0;
  const double v = std::sqrt((kp.k / (s * s) - 0.5) / s);
  const ManifoldDistance d = manifold_distance_detail(bounded, {s, 0.0, 0.0, v});
  CHECK(d.surrogate);
  CHECK(d.value < 1e-9);
  // unreachable: |f_s| < 1 but trim needs f_s = k / s^2
  const ManifoldDistance far = manifold_distance_detail(bounded, {s, 0.1, 0.0, 0.0});
  CHECK(far.value >= 0.1 + kp.k / (s * s) - 1.0 - 1e-6);
}
