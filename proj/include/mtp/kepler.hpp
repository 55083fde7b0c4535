#pragma once

// Planar two-body problem in polar coordinates (s = radius, theta = angle).
//   M11 = m2, M22 = m2 s^2, V = -k/s, f_s = u_1, f_th = u_2

#include "mtp/model.hpp"

namespace mtp {

struct KeplerParams {
  double k = 1.016895192894334e3;  // gamma * m1 * m2
  double m2 = 1.0;
};

MechModel kepler_model(const KeplerParams& params = {});

/// Angular velocity of the unforced circular orbit of radius s.
double circular_speed(const KeplerParams& params, double s);

/// Unforced circular-orbit state (s, 0, theta, circular_speed(s)).
State circular_state(const KeplerParams& params, double s, double th = 0.0);

}  // namespace mtp
