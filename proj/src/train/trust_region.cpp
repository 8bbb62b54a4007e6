#include "dynnet/train/trust_region.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "dynnet/errors.hpp"

namespace dynnet::train {

double cg_tolerance(double grad_norm, const TrustRegionConfig& cfg) {
  const double rel = cfg.cg_rel_tol ? std::min(*cfg.cg_rel_tol, std::sqrt(grad_norm))
                                    : std::min(0.5, std::sqrt(grad_norm));
  return rel * grad_norm;
}

TrustRegionStep trcg_iterate(TrustRegionObjective& f, std::span<double> w, double delta,
                             const TrustRegionConfig& cfg) {
  if (w.size() != f.size()) throw DomainError("trcg_iterate: parameter size mismatch");
  if (!(delta > 0.0)) throw DomainError("trcg_iterate: delta must be > 0");

  TrustRegionStep out;
  out.delta = delta;
  std::vector<double> g(w.size(), 0.0);
  out.loss = f.linearize(w, g);
  double gg = 0.0;
  for (double x : g) gg += x * x;
  out.grad_norm = std::sqrt(gg);
  if (!std::isfinite(out.loss) || !std::isfinite(out.grad_norm)) {
    out.trial_loss = std::numeric_limits<double>::quiet_NaN();
    return out;
  }

  const auto cg = cg_steihaug(
      g, [&](std::span<const double> v, std::span<double> hv) { f.hessian_vector(v, hv); },
      delta, cg_tolerance(out.grad_norm, cfg), cfg.cg_max_iter);
  out.cg_iterations = cg.iterations;
  out.cg_exit = cg.exit;
  double pp = 0.0;
  for (double x : cg.p) pp += x * x;
  out.step_norm = std::sqrt(pp);
  out.predicted = -cg.model_value;

  if (cg.exit == CgExit::SmallGradient || out.step_norm == 0.0) {
    out.trial_loss = out.loss;
    return out;
  }

  std::vector<double> trial(w.begin(), w.end());
  for (std::size_t i = 0; i < trial.size(); ++i) trial[i] += cg.p[i];
  out.trial_loss = f.value(trial);

  if (!(out.predicted > 0.0) || !std::isfinite(out.trial_loss)) {
    out.rho = -std::numeric_limits<double>::infinity();
    out.delta = 0.25 * delta;
    return out;
  }
  out.rho = (out.loss - out.trial_loss) / out.predicted;

  const bool on_boundary = cg.exit == CgExit::Boundary ||
                           cg.exit == CgExit::NegativeCurvature ||
                           std::abs(out.step_norm - delta) <= 1e-12 * delta;
  if (out.rho < 0.25) {
    out.delta = 0.25 * delta;
  } else if (out.rho > 0.75 && on_boundary) {
    out.delta = std::min(2.0 * delta, cfg.delta_max);
  }
  if (out.rho > cfg.eta) {
    std::copy(trial.begin(), trial.end(), w.begin());
    out.accepted = true;
  }
  return out;
}

}  // namespace dynnet::train
