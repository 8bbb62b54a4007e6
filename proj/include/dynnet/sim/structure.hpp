#pragma once

// Shear-building models: story spring laws, mass/stiffness/damping assembly.
//
// Units follow the kip-inch-second system used by the presets: masses in
// kip*s^2/in, stiffness in kip/in, forces in kips, lengths in inches.

#include <Eigen/Dense>

#include <cstddef>
#include <limits>
#include <variant>
#include <vector>

namespace dynnet::sim {

inline constexpr double kGravity = 386.089;  // in/s^2

// Elastic-perfectly-plastic story spring.
struct ElastoPlastic {
  double k0 = 0.0;  // elastic stiffness
  double fy = 0.0;  // yield force
  double yield_drift() const { return fy / k0; }
};

// force = K * (k1 * x + k2 * x^3); k2 in 1/length^2.
struct CubicElastic {
  double K = 0.0;
  double k1 = 1.0;
  double k2 = 0.0;
};

using SpringLaw = std::variant<ElastoPlastic, CubicElastic>;

struct StoryResponse {
  double force = 0.0;
  double plastic = 0.0;
};

// Return-mapped story force for a given drift and committed plastic drift.
StoryResponse story_force(const SpringLaw& law, double drift, double plastic_in);

// Consistent tangent of story_force with respect to drift.
double story_tangent(const SpringLaw& law, double drift, double plastic);

// Stiffness of the spring at zero drift.
double initial_stiffness(const SpringLaw& law);

void validate(const SpringLaw& law);

struct RayleighDamping {
  double alpha_m = 0.0;  // 1/time
  double beta_k = 0.0;   // time
};

struct StructureModel {
  std::vector<double> masses;
  std::vector<SpringLaw> springs;  // story i joins DOF i to DOF i-1 (ground for i = 0)
  RayleighDamping damping;
  std::vector<double> influence;   // empty -> all ones

  std::size_t dofs() const { return masses.size(); }
  Eigen::VectorXd gamma() const;
  bool is_elastoplastic() const;

  // Throws DomainError when masses/springs/damping violate their invariants.
  void validate() const;
};

Eigen::MatrixXd mass_matrix(const StructureModel& model);
Eigen::MatrixXd elastic_stiffness(const StructureModel& model);
Eigen::MatrixXd damping_matrix(const StructureModel& model);

// Story drifts d_i = u_i - u_{i-1}.
Eigen::VectorXd story_drifts(const Eigen::VectorXd& u);

// Nodal forces from story forces: S_j = s_j - s_{j+1}.
Eigen::VectorXd nodal_from_story(const Eigen::VectorXd& story);

// Story shears from nodal forces: s_j = sum_{k >= j} S_k.
Eigen::VectorXd story_from_nodal(const Eigen::VectorXd& nodal);

// Assembles B^T diag(k) B for per-story stiffnesses k.
Eigen::MatrixXd assemble_shear(const Eigen::VectorXd& story_stiffness);

// Rayleigh coefficients giving damping ratios zeta1, zeta2 in the first two
// elastic modes (stiffness-proportional only for a single DOF).
RayleighDamping rayleigh_from_modes(const StructureModel& model, double zeta1,
                                    double zeta2);

struct ModalProperties {
  std::vector<double> frequencies_hz;  // ascending
  std::vector<double> periods_s;
};

ModalProperties modal_properties(const StructureModel& model);

}  // namespace dynnet::sim
