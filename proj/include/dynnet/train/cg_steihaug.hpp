#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace dynnet::train {

// hv = H * v
using HessianVectorFn = std::function<void(std::span<const double> v, std::span<double> hv)>;

enum class CgExit {
  SmallGradient,      // ||g|| < eps, p = 0
  NegativeCurvature,  // d^T H d <= 0, p on the boundary
  Boundary,           // ||z_{j+1}|| >= delta, p on the boundary
  Converged,          // ||r_{j+1}|| < eps, interior p
  MaxIterations,      // truncated, p = current iterate
};

struct CgResult {
  std::vector<double> p;
  std::size_t iterations = 0;  // Hessian-vector products used
  CgExit exit = CgExit::SmallGradient;
  bool truncated() const { return exit == CgExit::MaxIterations; }
  double model_value = 0.0;  // Q(p) = p^T g + 1/2 p^T H p

  // Q(z_j) and ||z_j|| for every iterate z_0 = 0, z_1, ..., and finally p.
  std::vector<double> q_history;
  std::vector<double> norm_history;
};

// Steihaug's truncated conjugate gradient for
//   min Q(p) = p^T g + 1/2 p^T H p   s.t. ||p|| <= delta.
CgResult cg_steihaug(std::span<const double> g, const HessianVectorFn& hvp, double delta,
                     double eps, std::size_t max_iter);

// tau >= 0 with ||z + tau d|| == delta (requires ||z|| <= delta).
double boundary_step(std::span<const double> z, std::span<const double> d, double delta);

// Q(p) for an explicit Hessian-vector closure (one extra product).
double quadratic_model(std::span<const double> g, const HessianVectorFn& hvp,
                       std::span<const double> p);

}  // namespace dynnet::train
