#include "dynnet/sim/newmark.hpp"

#include <cmath>
#include <numeric>
#include <sstream>

#include "dynnet/errors.hpp"

namespace dynnet::sim {

DynState DynState::zero(std::size_t n) {
  const auto m = static_cast<Eigen::Index>(n);
  return {Eigen::VectorXd::Zero(m), Eigen::VectorXd::Zero(m), Eigen::VectorXd::Zero(m),
          Eigen::VectorXd::Zero(m), Eigen::VectorXd::Zero(m)};
}

bool DynState::finite() const {
  return u.allFinite() && v.allFinite() && a.allFinite() && S.allFinite() &&
         plastic.allFinite();
}

double default_tolerance(const StructureModel& model) {
  const double mean_mass =
      std::accumulate(model.masses.begin(), model.masses.end(), 0.0) /
      static_cast<double>(model.masses.size());
  return 1e-8 * mean_mass * kGravity;
}

InternalForce internal_force(const StructureModel& model, const Eigen::VectorXd& u,
                             const Eigen::VectorXd& plastic_committed) {
  const Eigen::VectorXd drift = story_drifts(u);
  InternalForce out;
  out.story.resize(u.size());
  out.plastic.resize(u.size());
  for (Eigen::Index i = 0; i < u.size(); ++i) {
    const auto r = story_force(model.springs[static_cast<std::size_t>(i)], drift(i),
                               plastic_committed(i));
    out.story(i) = r.force;
    out.plastic(i) = r.plastic;
  }
  out.nodal = nodal_from_story(out.story);
  return out;
}

namespace {

Eigen::MatrixXd tangent_at(const StructureModel& model, const Eigen::VectorXd& u,
                           const Eigen::VectorXd& plastic) {
  const Eigen::VectorXd drift = story_drifts(u);
  Eigen::VectorXd k(u.size());
  for (Eigen::Index i = 0; i < u.size(); ++i) {
    k(i) = story_tangent(model.springs[static_cast<std::size_t>(i)], drift(i), plastic(i));
  }
  return assemble_shear(k);
}

void check_state(const StructureModel& model, const DynState& s) {
  const auto n = static_cast<Eigen::Index>(model.dofs());
  if (s.u.size() != n || s.v.size() != n || s.a.size() != n || s.S.size() != n ||
      s.plastic.size() != n) {
    throw DomainError("DynState dimension does not match the model");
  }
  if (!s.finite()) throw DomainError("DynState contains non-finite entries");
}

}  // namespace

Eigen::MatrixXd tangent_stiffness(const StructureModel& model, const DynState& state) {
  check_state(model, state);
  return tangent_at(model, state.u, state.plastic);
}

Eigen::VectorXd equilibrium_acceleration(const StructureModel& model,
                                         const DynState& state, double xg) {
  const Eigen::VectorXd m = Eigen::Map<const Eigen::VectorXd>(
      model.masses.data(), static_cast<Eigen::Index>(model.masses.size()));
  const Eigen::VectorXd rhs = -(m.cwiseProduct(model.gamma()) * xg) -
                              damping_matrix(model) * state.v - state.S;
  return rhs.cwiseQuotient(m);
}

double equation_of_motion_residual(const StructureModel& model, const DynState& state,
                                   double xg) {
  const Eigen::MatrixXd M = mass_matrix(model);
  return (M * state.a + damping_matrix(model) * state.v + state.S +
          M * model.gamma() * xg)
      .norm();
}

DynState newmark_step(const StructureModel& model, const DynState& si, double xg_next,
                      double dt, const NewtonOptions& opts) {
  if (!(dt > 0.0)) throw DomainError("newmark_step: dt must be > 0");
  check_state(model, si);
  const double tol = opts.tol > 0.0 ? opts.tol : default_tolerance(model);

  const auto k = NewmarkConstants::average_acceleration(dt);
  const Eigen::MatrixXd M = mass_matrix(model);
  const Eigen::MatrixXd C = damping_matrix(model);
  const double g = k.gamma, b = k.beta;
  const Eigen::MatrixXd a1 = M / (b * dt * dt) + (g / (b * dt)) * C;
  const Eigen::MatrixXd a2 = M / (b * dt) + (g / b - 1.0) * C;
  const Eigen::MatrixXd a3 = (1.0 / (2.0 * b) - 1.0) * M + dt * (g / (2.0 * b) - 1.0) * C;

  // Effective load, with p = -M Gamma xg.
  const Eigen::VectorXd p_hat =
      -(M * model.gamma()) * xg_next + a1 * si.u + a2 * si.v + a3 * si.a;

  Eigen::VectorXd u = si.u;
  InternalForce f = internal_force(model, u, si.plastic);
  Eigen::VectorXd R = p_hat - f.nodal - a1 * u;
  int iter = 0;
  while (R.norm() > tol) {
    if (iter >= opts.max_iter || !R.allFinite()) {
      std::ostringstream msg;
      msg << "newmark_step: Newton-Raphson did not converge after " << iter
          << " iterations (|R| = " << R.norm() << ", tol = " << tol << ")";
      throw StepError(msg.str(), R.norm(), 0);
    }
    const Eigen::MatrixXd Kt = tangent_at(model, u, si.plastic) + a1;
    u += Kt.ldlt().solve(R);
    f = internal_force(model, u, si.plastic);
    R = p_hat - f.nodal - a1 * u;
    ++iter;
  }

  DynState out;
  const Eigen::VectorXd du = u - si.u;
  out.u = u;
  out.v = k.c1() * du + k.c2() * si.v + k.c3() * si.a;
  out.a = k.c4() * du + k.c5() * si.v + k.c6() * si.a;
  out.S = f.nodal;
  out.plastic = f.plastic;
  return out;
}

Trajectory simulate(const StructureModel& model, std::span<const double> accel,
                    double dt, const DynState& init, const NewtonOptions& opts,
                    std::string gm_id) {
  model.validate();
  if (accel.empty()) throw DomainError("simulate: empty ground motion");
  if (!(dt > 0.0)) throw DomainError("simulate: dt must be > 0");
  check_state(model, init);

  Trajectory traj;
  traj.dt = dt;
  traj.gm_id = std::move(gm_id);
  traj.states.reserve(accel.size());

  DynState s0 = init;
  const InternalForce f0 = internal_force(model, s0.u, s0.plastic);
  s0.S = f0.nodal;
  s0.plastic = f0.plastic;
  s0.a = equilibrium_acceleration(model, s0, accel[0]);
  traj.states.push_back(std::move(s0));

  for (std::size_t i = 1; i < accel.size(); ++i) {
    try {
      traj.states.push_back(newmark_step(model, traj.states.back(), accel[i], dt, opts));
    } catch (const StepError& e) {
      std::ostringstream msg;
      msg << "simulate: step " << i << ": " << e.what();
      throw StepError(msg.str(), e.residual(), i);
    }
  }
  return traj;
}

}  // namespace dynnet::sim
