#include "dynnet/sim/presets.hpp"

#include "dynnet/errors.hpp"

namespace dynnet::sim {
namespace {

StructureModel nl1(std::size_t stories) {
  const double m1 = 0.259, k1 = 168.0, fy = 50.0;
  const double mass_ratio[] = {1.0, 1.0, 0.75, 0.5};
  const double stiff_ratio[] = {1.0, 7.0 / 9.0, 1.0 / 3.0, 1.0 / 4.0};
  StructureModel m;
  for (std::size_t i = 0; i < stories; ++i) {
    m.masses.push_back(m1 * mass_ratio[i]);
    m.springs.push_back(ElastoPlastic{k1 * stiff_ratio[i], fy});
  }
  return m;
}

StructureModel nl2() {
  const double m1 = 0.340, k1 = 100.0;
  const double mass_ratio[] = {1.0, 0.8, 0.75, 0.6};
  const double stiff_ratio[] = {1.0, 3.0 / 4.0, 1.0 / 2.0, 1.0 / 4.0};
  StructureModel m;
  for (std::size_t i = 0; i < 4; ++i) {
    m.masses.push_back(m1 * mass_ratio[i]);
    m.springs.push_back(CubicElastic{k1 * stiff_ratio[i], 1.0, 10.0});
  }
  return m;
}

}  // namespace

StructureModel preset(std::string_view name, double zeta) {
  StructureModel m;
  if (name == "nl1") {
    m = nl1(4);
  } else if (name == "nl2") {
    m = nl2();
  } else if (name == "nl1_2dof") {
    m = nl1(2);
  } else {
    throw DomainError("unknown structure preset '" + std::string(name) + "'");
  }
  if (zeta > 0.0) m.damping = rayleigh_from_modes(m, zeta, zeta);
  m.validate();
  return m;
}

std::vector<std::string> preset_names() { return {"nl1", "nl2", "nl1_2dof"}; }

}  // namespace dynnet::sim
