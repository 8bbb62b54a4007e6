#include "dynnet/train/first_order.hpp"

#include <cmath>

#include "dynnet/errors.hpp"

namespace dynnet::train {

void sgd_step(std::span<double> w, std::span<const double> g, double lr) {
  if (w.size() != g.size()) throw DomainError("sgd_step: size mismatch");
  for (std::size_t i = 0; i < w.size(); ++i) w[i] -= lr * g[i];
}

void adam_step(std::span<double> w, std::span<const double> g, AdamState& s, double lr) {
  if (w.size() != g.size()) throw DomainError("adam_step: size mismatch");
  if (s.m.empty()) {
    s.m.assign(w.size(), 0.0);
    s.v.assign(w.size(), 0.0);
  }
  if (s.m.size() != w.size()) throw DomainError("adam_step: state size mismatch");
  ++s.t;
  const double c1 = 1.0 - std::pow(s.beta1, static_cast<double>(s.t));
  const double c2 = 1.0 - std::pow(s.beta2, static_cast<double>(s.t));
  for (std::size_t i = 0; i < w.size(); ++i) {
    s.m[i] = s.beta1 * s.m[i] + (1.0 - s.beta1) * g[i];
    s.v[i] = s.beta2 * s.v[i] + (1.0 - s.beta2) * g[i] * g[i];
    w[i] -= lr * (s.m[i] / c1) / (std::sqrt(s.v[i] / c2) + s.eps);
  }
}

}  // namespace dynnet::train
