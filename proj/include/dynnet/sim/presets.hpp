#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "dynnet/sim/structure.hpp"

namespace dynnet::sim {

// Built-in shear buildings:
//   nl1       4-DOF elastic-perfectly-plastic building
//             (M1 = 0.259, M2..M4 = {1, 0.75, 0.5} M1, K1 = 168,
//              K2..K4 = {7/9, 1/3, 1/4} K1, Fy = 50)
//   nl2       4-DOF cubic-elastic building
//             (M1 = 0.340, M2..M4 = {0.8, 0.75, 0.6} M1, K1 = 100,
//              K2..K4 = {3/4, 1/2, 1/4} K1, k1 = 1, k2 = 10)
//   nl1_2dof  first two stories of nl1, used for desk-scale training runs
// All presets carry Rayleigh damping with `zeta` in modes 1 and 2.
StructureModel preset(std::string_view name, double zeta = 0.02);

std::vector<std::string> preset_names();

}  // namespace dynnet::sim
