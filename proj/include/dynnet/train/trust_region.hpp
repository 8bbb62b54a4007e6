#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "dynnet/train/cg_steihaug.hpp"

namespace dynnet::train {

// A stochastic objective frozen on one mini-batch. linearize() sets the point
// at which gradient and Hessian-vector products are taken; value() evaluates
// the same batch elsewhere without moving that point.
class TrustRegionObjective {
 public:
  virtual ~TrustRegionObjective() = default;
  virtual std::size_t size() const = 0;
  // Returns f(w) and writes its gradient.
  virtual double linearize(std::span<const double> w, std::span<double> grad) = 0;
  // hv = H v at the linearization point.
  virtual void hessian_vector(std::span<const double> v, std::span<double> hv) = 0;
  virtual double value(std::span<const double> w) = 0;
};

struct TrustRegionConfig {
  double delta_max = 100.0;
  double eta = 1e-4;
  std::size_t cg_max_iter = 250;
  // When set, the CG tolerance is min(rel, that) * ||g|| instead of
  // min(0.5, sqrt(||g||)) * ||g||.
  std::optional<double> cg_rel_tol;
};

struct TrustRegionStep {
  double delta = 0.0;  // radius for the next iteration
  bool accepted = false;
  double loss = 0.0;        // f(w)
  double trial_loss = 0.0;  // f(w + p)
  double predicted = 0.0;   // Q(0) - Q(p)
  double rho = 0.0;
  double grad_norm = 0.0;
  double step_norm = 0.0;
  std::size_t cg_iterations = 0;
  CgExit cg_exit = CgExit::SmallGradient;
};

// CG tolerance used by trcg_iterate.
double cg_tolerance(double grad_norm, const TrustRegionConfig& cfg);

// One Newton trust-region iteration. w is updated in place on acceptance.
// A non-finite f(w) or gradient returns immediately with accepted == false
// and the radius unchanged.
TrustRegionStep trcg_iterate(TrustRegionObjective& f, std::span<double> w, double delta,
                             const TrustRegionConfig& cfg);

}  // namespace dynnet::train
