#pragma once

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "dynnet/sim/newmark.hpp"
#include "dynnet/sim/structure.hpp"

namespace dynnet::eval {

// Pearson correlation. Throws DomainError for unequal lengths or fewer than
// two samples, UndefinedMetricError when truth has zero variance.
double pcc(std::span<const double> pred, std::span<const double> truth);

double mse(std::span<const double> pred, std::span<const double> truth);

enum class Quantity { u, v, a, S };
const char* quantity_name(Quantity q);
inline constexpr Quantity kQuantities[] = {Quantity::u, Quantity::v, Quantity::a, Quantity::S};

// One channel of a trajectory, optionally truncated to `count` states.
std::vector<double> channel(const sim::Trajectory& traj, Quantity q, std::size_t dof,
                            std::size_t count = static_cast<std::size_t>(-1));

struct HysteresisPoint {
  double drift = 0.0;
  double force = 0.0;
};

// Story drift u_s - u_{s-1} against story shear. With include_damping the
// damping shear of C v is added to the spring shear recovered from S.
std::vector<HysteresisPoint> hysteresis(const sim::Trajectory& traj,
                                        const sim::StructureModel& model, std::size_t story,
                                        bool include_damping);

struct SpectrumPoint {
  double frequency = 0.0;
  double magnitude = 0.0;
};

// One-sided DFT magnitude (scaled by 2/N) of the linearly detrended series;
// bin spacing 1 / (N dt).
std::vector<SpectrumPoint> spectrum(std::span<const double> series, double dt);

}  // namespace dynnet::eval
