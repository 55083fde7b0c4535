#pragma once

// Kepler experiment presets.

#include "mtp/ocp.hpp"

#include <string>
#include <vector>

namespace mtp {

/// Quadratic tracking of the s = 4.5 circular orbit, transfer 5.0 -> 6.0, T = 30, N = 300.
OcpSpec preset_fig1(const KeplerParams& params = {});

/// Trim-manifold penalty from the s = 5.3 circular orbit, no terminal constraint, T = 100, N = 200.
OcpSpec preset_fig2(const KeplerParams& params = {});

/// Same problem with another horizon; intervals scale with the horizon.
OcpSpec with_horizon(const OcpSpec& spec, double horizon);

/// Names accepted by preset().
std::vector<std::string> preset_names();

/// Throws Error(unknown_preset) for other names.
OcpSpec preset(const std::string& name, const KeplerParams& params = {});

}  // namespace mtp
