#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace dynnet::train {

void sgd_step(std::span<double> w, std::span<const double> g, double lr);

struct AdamState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::size_t t = 0;
  std::vector<double> m, v;
};

void adam_step(std::span<double> w, std::span<const double> g, AdamState& state, double lr);

}  // namespace dynnet::train
