#include "mtp/kepler.hpp"

#include "mtp/error.hpp"

#include <cmath>

namespace mtp {

MechModel kepler_model(const KeplerParams& p) {
  if (!(p.k > 0.0) || !(p.m2 > 0.0)) {
    throw Error(ErrorCode::invalid_argument, "kepler_model: k and m2 must be positive");
  }
  const double k = p.k;
  const double m2 = p.m2;
  MechModel m;
  m.name = "kepler";
  m.m11 = [m2](double) { return m2; };
  m.m11_d = [](double) { return 0.0; };
  m.m11_dd = [](double) { return 0.0; };
  m.m22 = [m2](double s) { return m2 * s * s; };
  m.m22_d = [m2](double s) { return 2.0 * m2 * s; };
  m.m22_dd = [m2](double) { return 2.0 * m2; };
  m.pot = [k](double s) { return -k / s; };
  m.pot_d = [k](double s) { return k / (s * s); };
  m.pot_dd = [k](double s) { return -2.0 * k / (s * s * s); };
  m.f_s = [](const Control& u) { return u[0]; };
  m.f_s_jac = [](const Control&) { return Eigen::RowVector2d(1.0, 0.0); };
  m.f_th = [](const Control& u) { return u[1]; };
  m.f_th_jac = [](const Control&) { return Eigen::RowVector2d(0.0, 1.0); };
  m.control_dim = 2;
  m.s_min = 0.1;
  m.forcing_surjective = true;
  m.orthogonal_forcing = false;
  return m;
}

double circular_speed(const KeplerParams& p, double s) {
  return std::sqrt(p.k / (p.m2 * s * s * s));
}

State circular_state(const KeplerParams& p, double s, double th) {
  return {s, 0.0, th, circular_speed(p, s)};
}

}  // namespace mtp
