#include "dynnet/sim/structure.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <numbers>
#include <type_traits>

#include "dynnet/errors.hpp"

namespace dynnet::sim {

StoryResponse story_force(const SpringLaw& law, double drift, double plastic_in) {
  if (!std::isfinite(drift)) throw DomainError("story_force: non-finite drift");
  return std::visit(
      [&](const auto& s) -> StoryResponse {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, ElastoPlastic>) {
          const double trial = s.k0 * (drift - plastic_in);
          if (std::abs(trial) <= s.fy) return {trial, plastic_in};
          const double force = std::copysign(s.fy, trial);
          return {force, drift - force / s.k0};
        } else {
          return {s.K * (s.k1 * drift + s.k2 * drift * drift * drift), plastic_in};
        }
      },
      law);
}

double story_tangent(const SpringLaw& law, double drift, double plastic) {
  return std::visit(
      [&](const auto& s) -> double {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, ElastoPlastic>) {
          return std::abs(s.k0 * (drift - plastic)) < s.fy ? s.k0 : 0.0;
        } else {
          return s.K * (s.k1 + 3.0 * s.k2 * drift * drift);
        }
      },
      law);
}

double initial_stiffness(const SpringLaw& law) {
  return std::visit(
      [](const auto& s) -> double {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, ElastoPlastic>) {
          return s.k0;
        } else {
          return s.K * s.k1;
        }
      },
      law);
}

void validate(const SpringLaw& law) {
  std::visit(
      [](const auto& s) {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, ElastoPlastic>) {
          if (!(s.k0 > 0.0) || !std::isfinite(s.k0) || !(s.fy > 0.0)) {
            throw DomainError("ElastoPlastic requires k0 > 0 and Fy > 0");
          }
        } else {
          if (!(s.K > 0.0) || !(s.k1 > 0.0) || !(s.k2 >= 0.0)) {
            throw DomainError("CubicElastic requires K > 0, k1 > 0, k2 >= 0");
          }
        }
      },
      law);
}

Eigen::VectorXd StructureModel::gamma() const {
  if (influence.empty()) return Eigen::VectorXd::Ones(static_cast<Eigen::Index>(dofs()));
  return Eigen::Map<const Eigen::VectorXd>(influence.data(),
                                           static_cast<Eigen::Index>(influence.size()));
}

bool StructureModel::is_elastoplastic() const {
  for (const auto& s : springs) {
    if (std::holds_alternative<ElastoPlastic>(s)) return true;
  }
  return false;
}

void StructureModel::validate() const {
  if (masses.empty()) throw DomainError("StructureModel: no degrees of freedom");
  if (springs.size() != masses.size()) {
    throw DomainError("StructureModel: one spring per story required");
  }
  if (!influence.empty() && influence.size() != masses.size()) {
    throw DomainError("StructureModel: influence vector length mismatch");
  }
  for (double m : masses) {
    if (!(m > 0.0) || !std::isfinite(m)) throw DomainError("StructureModel: masses must be > 0");
  }
  for (const auto& s : springs) sim::validate(s);
  if (!(damping.alpha_m >= 0.0) || !(damping.beta_k >= 0.0)) {
    throw DomainError("StructureModel: damping coefficients must be >= 0");
  }
}

Eigen::MatrixXd mass_matrix(const StructureModel& model) {
  Eigen::VectorXd m = Eigen::Map<const Eigen::VectorXd>(
      model.masses.data(), static_cast<Eigen::Index>(model.masses.size()));
  return m.asDiagonal();
}

Eigen::MatrixXd assemble_shear(const Eigen::VectorXd& k) {
  const Eigen::Index n = k.size();
  Eigen::MatrixXd K = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    K(i, i) += k(i);
    if (i > 0) {
      K(i - 1, i - 1) += k(i);
      K(i - 1, i) -= k(i);
      K(i, i - 1) -= k(i);
    }
  }
  return K;
}

Eigen::MatrixXd elastic_stiffness(const StructureModel& model) {
  Eigen::VectorXd k(static_cast<Eigen::Index>(model.dofs()));
  for (std::size_t i = 0; i < model.dofs(); ++i) {
    k(static_cast<Eigen::Index>(i)) = initial_stiffness(model.springs[i]);
  }
  return assemble_shear(k);
}

Eigen::MatrixXd damping_matrix(const StructureModel& model) {
  return model.damping.alpha_m * mass_matrix(model) +
         model.damping.beta_k * elastic_stiffness(model);
}

Eigen::VectorXd story_drifts(const Eigen::VectorXd& u) {
  Eigen::VectorXd d(u.size());
  for (Eigen::Index i = 0; i < u.size(); ++i) d(i) = u(i) - (i > 0 ? u(i - 1) : 0.0);
  return d;
}

Eigen::VectorXd nodal_from_story(const Eigen::VectorXd& s) {
  Eigen::VectorXd f(s.size());
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    f(i) = s(i) - (i + 1 < s.size() ? s(i + 1) : 0.0);
  }
  return f;
}

Eigen::VectorXd story_from_nodal(const Eigen::VectorXd& f) {
  Eigen::VectorXd s(f.size());
  double acc = 0.0;
  for (Eigen::Index i = f.size() - 1; i >= 0; --i) {
    acc += f(i);
    s(i) = acc;
  }
  return s;
}

ModalProperties modal_properties(const StructureModel& model) {
  model.validate();
  Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> solver(
      elastic_stiffness(model), mass_matrix(model));
  if (solver.info() != Eigen::Success) {
    throw DomainError("modal_properties: eigen-solve failed");
  }
  ModalProperties out;
  for (Eigen::Index i = 0; i < solver.eigenvalues().size(); ++i) {
    const double omega = std::sqrt(solver.eigenvalues()(i));
    const double f = omega / (2.0 * std::numbers::pi);
    out.frequencies_hz.push_back(f);
    out.periods_s.push_back(1.0 / f);
  }
  return out;
}

RayleighDamping rayleigh_from_modes(const StructureModel& model, double zeta1,
                                    double zeta2) {
  const auto modes = modal_properties(model);
  const double w1 = 2.0 * std::numbers::pi * modes.frequencies_hz[0];
  if (modes.frequencies_hz.size() == 1) return {0.0, 2.0 * zeta1 / w1};
  const double w2 = 2.0 * std::numbers::pi * modes.frequencies_hz[1];
  // zeta_i = alpha / (2 w_i) + beta * w_i / 2
  Eigen::Matrix2d A;
  A << 1.0 / (2.0 * w1), w1 / 2.0, 1.0 / (2.0 * w2), w2 / 2.0;
  const Eigen::Vector2d c = A.partialPivLu().solve(Eigen::Vector2d(zeta1, zeta2));
  return {c(0), c(1)};
}

}  // namespace dynnet::sim
