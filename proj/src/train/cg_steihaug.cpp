#include "dynnet/train/cg_steihaug.hpp"

#include <cmath>

#include "dynnet/errors.hpp"
#include "dynnet/simd/kernels.hpp"

namespace dynnet::train {
namespace {

double dot(std::span<const double> a, std::span<const double> b) {
  return simd::active_kernels().dot(a.data(), b.data(), a.size());
}

void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  simd::active_kernels().axpy(alpha, x.data(), y.data(), x.size());
}

}  // namespace

double boundary_step(std::span<const double> z, std::span<const double> d, double delta) {
  const double a = dot(d, d);
  const double b = 2.0 * dot(z, d);
  const double c = dot(z, z) - delta * delta;
  if (!(a > 0.0)) return 0.0;
  const double disc = std::max(0.0, b * b - 4.0 * a * c);
  // Larger root; c <= 0 makes it non-negative. Written to avoid cancellation.
  const double sq = std::sqrt(disc);
  return b >= 0.0 ? (-2.0 * c) / (b + sq) : (-b + sq) / (2.0 * a);
}

double quadratic_model(std::span<const double> g, const HessianVectorFn& hvp,
                       std::span<const double> p) {
  std::vector<double> hp(p.size(), 0.0);
  hvp(p, hp);
  return dot(p, g) + 0.5 * dot(p, hp);
}

CgResult cg_steihaug(std::span<const double> g, const HessianVectorFn& hvp, double delta,
                     double eps, std::size_t max_iter) {
  if (!(delta > 0.0)) throw DomainError("cg_steihaug: delta must be > 0");
  const std::size_t n = g.size();
  const double gnorm = std::sqrt(dot(g, g));
  if (!std::isfinite(gnorm)) throw DomainError("cg_steihaug: non-finite gradient");

  CgResult res;
  std::vector<double> z(n, 0.0), r(g.begin(), g.end()), d(n), hd(n);
  for (std::size_t i = 0; i < n; ++i) d[i] = -r[i];
  // Q(z) = 1/2 (g + r)^T z, using r = g + H z.
  auto q_of = [&](std::span<const double> zz, std::span<const double> rr) {
    return 0.5 * (dot(g, zz) + dot(rr, zz));
  };
  res.q_history.push_back(0.0);
  res.norm_history.push_back(0.0);

  auto finish_boundary = [&](CgExit why) {
    const double tau = boundary_step(z, d, delta);
    res.p = z;
    axpy(tau, d, res.p);
    // Q(z + tau d) = Q(z) + tau (r^T d) + 1/2 tau^2 d^T H d
    const double dhd = dot(d, hd);
    res.model_value = q_of(z, r) + tau * dot(r, d) + 0.5 * tau * tau * dhd;
    res.exit = why;
    res.q_history.push_back(res.model_value);
    res.norm_history.push_back(std::sqrt(dot(res.p, res.p)));
    return res;
  };

  if (gnorm < eps) {
    res.p = z;
    res.exit = CgExit::SmallGradient;
    return res;
  }

  double rr = dot(r, r);
  for (std::size_t j = 0; j < max_iter; ++j) {
    std::fill(hd.begin(), hd.end(), 0.0);
    hvp(d, hd);
    ++res.iterations;
    const double dhd = dot(d, hd);
    if (dhd <= 0.0) return finish_boundary(CgExit::NegativeCurvature);

    const double alpha = rr / dhd;
    std::vector<double> z_next = z;
    axpy(alpha, d, z_next);
    if (std::sqrt(dot(z_next, z_next)) >= delta) return finish_boundary(CgExit::Boundary);

    z = std::move(z_next);
    axpy(alpha, hd, r);
    res.q_history.push_back(q_of(z, r));
    res.norm_history.push_back(std::sqrt(dot(z, z)));
    const double rr_next = dot(r, r);
    if (std::sqrt(rr_next) < eps) {
      res.p = z;
      res.model_value = res.q_history.back();
      res.exit = CgExit::Converged;
      return res;
    }
    const double beta = rr_next / rr;
    rr = rr_next;
    for (std::size_t i = 0; i < n; ++i) d[i] = -r[i] + beta * d[i];
  }
  res.p = z;
  res.model_value = res.q_history.back();
  res.exit = CgExit::MaxIterations;
  return res;
}

}  // namespace dynnet::train
