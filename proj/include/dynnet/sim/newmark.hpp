#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "dynnet/sim/structure.hpp"

namespace dynnet::sim {

struct DynState {
  Eigen::VectorXd u, v, a, S;  // S: nodal internal force
  Eigen::VectorXd plastic;     // per-story accumulated plastic drift

  static DynState zero(std::size_t n);
  std::size_t dofs() const { return static_cast<std::size_t>(u.size()); }
  bool finite() const;
};

struct Trajectory {
  double dt = 0.0;
  std::vector<DynState> states;
  std::string gm_id;

  std::size_t steps() const { return states.size(); }
  std::size_t dofs() const { return states.empty() ? 0 : states.front().dofs(); }
};

// Constant-average-acceleration Newmark constants (gamma = 1/2, beta = 1/4).
struct NewmarkConstants {
  double gamma = 0.5;
  double beta = 0.25;
  double dt = 0.0;

  // Kinematic maps after convergence:
  //   v' = c1 (u' - u) + c2 v + c3 a
  //   a' = c4 (u' - u) + c5 v + c6 a
  double c1() const { return gamma / (beta * dt); }
  double c2() const { return 1.0 - gamma / beta; }
  double c3() const { return dt * (1.0 - gamma / (2.0 * beta)); }
  double c4() const { return 1.0 / (beta * dt * dt); }
  double c5() const { return -1.0 / (beta * dt); }
  double c6() const { return -(1.0 / (2.0 * beta) - 1.0); }

  static NewmarkConstants average_acceleration(double dt) { return {0.5, 0.25, dt}; }
};

struct NewtonOptions {
  double tol = 0.0;  // <= 0 -> default_tolerance(model)
  int max_iter = 50;
};

// 1e-8 x (mean mass x g).
double default_tolerance(const StructureModel& model);

// Story forces and plastic drifts for displacement u given committed plastic.
struct InternalForce {
  Eigen::VectorXd story;
  Eigen::VectorXd nodal;
  Eigen::VectorXd plastic;
};
InternalForce internal_force(const StructureModel& model, const Eigen::VectorXd& u,
                             const Eigen::VectorXd& plastic_committed);

// Tangent stiffness at the state (story tangents evaluated at the state's drift
// and plastic drift, assembled in the shear-building pattern).
Eigen::MatrixXd tangent_stiffness(const StructureModel& model, const DynState& state);

// Acceleration consistent with the equation of motion at (u, v, S) and ground
// acceleration xg.
Eigen::VectorXd equilibrium_acceleration(const StructureModel& model,
                                         const DynState& state, double xg);

// ||M a + C v + S + M Gamma xg||
double equation_of_motion_residual(const StructureModel& model, const DynState& state,
                                   double xg);

// One implicit step from state_i to i+1 under ground acceleration xg_next.
// Throws StepError on Newton non-convergence.
DynState newmark_step(const StructureModel& model, const DynState& state_i,
                      double xg_next, double dt, const NewtonOptions& opts = {});

// Integrates over the whole record; states[k] corresponds to accel[k]. The
// initial acceleration is recomputed from equilibrium with accel[0].
Trajectory simulate(const StructureModel& model, std::span<const double> accel,
                    double dt, const DynState& init, const NewtonOptions& opts = {},
                    std::string gm_id = {});

}  // namespace dynnet::sim
