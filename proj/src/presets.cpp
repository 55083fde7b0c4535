#include "mtp/presets.hpp"

#include "mtp/error.hpp"

#include <cmath>

namespace mtp {

OcpSpec preset_fig1(const KeplerParams& params) {
  OcpSpec spec;
  spec.model = kepler_model(params);
  spec.model_preset = "kepler";
  spec.kepler = params;
  spec.horizon = 30.0;
  spec.intervals = 300;
  spec.x0 = circular_state(params, 5.0);
  spec.terminal.fixed = {{0, 6.0}, {1, 0.0}, {3, circular_speed(params, 6.0)}};
  QuadraticCost c;
  c.x_ref = circular_state(params, 4.5);
  c.q = Vector4(1.0, 1.0, 0.0, 1.0);
  c.u_ref = Eigen::Vector2d::Zero();
  c.r = Eigen::Vector2d::Constant(1e-2);
  spec.cost = c;
  return spec;
}

OcpSpec preset_fig2(const KeplerParams& params) {
  OcpSpec spec;
  spec.model = kepler_model(params);
  spec.model_preset = "kepler";
  spec.kepler = params;
  spec.horizon = 100.0;
  spec.intervals = 200;
  spec.x0 = circular_state(params, 5.3);
  TrimPenaltyCost c;
  c.w_t = 5e3;
  c.s_ref = 5.3;
  c.s_weight = 1.0;
  c.u_ref = Eigen::Vector2d(0.0, 1.0);
  c.r = Eigen::Vector2d::Constant(1e-3);
  spec.cost = c;
  return spec;
}

OcpSpec with_horizon(const OcpSpec& spec, double horizon) {
  if (!(horizon > 0.0)) throw Error(ErrorCode::invalid_argument, "with_horizon: horizon must be positive");
  OcpSpec out = spec;
  out.intervals = std::max(1, static_cast<int>(std::lround(spec.intervals * horizon / spec.horizon)));
  out.horizon = horizon;
  out.warm_start.reset();
  return out;
}

std::vector<std::string> preset_names() { return {"kepler-fig1", "kepler-fig2"}; }

OcpSpec preset(const std::string& name, const KeplerParams& params) {
  if (name == "kepler-fig1") return preset_fig1(params);
  if (name == "kepler-fig2") return preset_fig2(params);
  throw Error(ErrorCode::unknown_preset, "unknown preset: " + name);
}

}  // namespace mtp
