#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "dynnet/excite/ground_motion.hpp"
#include "dynnet/sim/newmark.hpp"

namespace dynnet::excite {

// Additive zero-mean Gaussian noise with sigma = level * RMS of each channel
// (u, v, a, S per DOF) of the clean trajectory. level == 0 returns a copy.
sim::Trajectory add_measurement_noise(const sim::Trajectory& clean, double level,
                                      std::uint64_t seed);

// Per-channel statistics. State channels are ordered [u | v | a | S], each
// block holding n DOFs.
struct NormalizationStats {
  std::size_t dofs = 0;
  std::vector<double> mean;   // 4n
  std::vector<double> stdev;  // 4n
  double xg_mean = 0.0;
  double xg_std = 1.0;

  std::size_t channels() const { return 4 * dofs; }
  void normalize_state(const sim::DynState& s, std::span<double> out) const;
  sim::DynState denormalize_state(std::span<const double> x) const;
  double normalize_xg(double xg) const { return (xg - xg_mean) / xg_std; }
};

void flatten_state(const sim::DynState& s, std::span<double> out);

struct DatasetEntry {
  GroundMotion gm;
  sim::Trajectory clean;
  sim::Trajectory noisy;
  bool train = false;

  // Normalized, row-major [steps x 4n]; inputs from the noisy series,
  // targets from the clean one. xg[k] is the normalized ground acceleration
  // applied over the transition k-1 -> k.
  std::vector<double> inputs;
  std::vector<double> targets;
  std::vector<double> xg;

  std::size_t steps() const { return clean.steps(); }
};

struct Dataset {
  std::vector<DatasetEntry> entries;
  NormalizationStats stats;
  double noise_level = 0.0;
  std::uint64_t seed = 0;
  double dt = 0.0;

  std::vector<std::size_t> train_indices() const;
  std::vector<std::size_t> test_indices() const;
  std::size_t dofs() const { return stats.dofs; }
};

// Statistics of the given trajectories (noisy channels) and motions.
NormalizationStats compute_stats(std::span<const sim::Trajectory* const> trajs,
                                 std::span<const GroundMotion* const> motions);

// Simulates every motion from rest, assigns n_train at random to training,
// applies measurement noise and normalizes with training-split statistics.
// Throws DomainError if n_train >= motions.size().
Dataset build_dataset(const sim::StructureModel& model,
                      const std::vector<GroundMotion>& motions, std::size_t n_train,
                      std::uint64_t seed, double noise_level,
                      const sim::NewtonOptions& opts = {});

// Same, with the split given explicitly (true = training).
Dataset build_dataset(const sim::StructureModel& model,
                      const std::vector<GroundMotion>& motions,
                      const std::vector<bool>& train_mask, std::uint64_t seed,
                      double noise_level, const sim::NewtonOptions& opts = {});

// The seeded split build_dataset uses: n_train of count entries marked true.
std::vector<bool> random_split(std::size_t count, std::size_t n_train, std::uint64_t seed);

// Recomputes the normalized arrays of every entry from `stats`.
void normalize_entries(Dataset& ds);

// Key-value manifest listing ids, split, seed, noise level and statistics.
void save_manifest(const std::filesystem::path& path, const Dataset& ds);

struct Manifest {
  std::uint64_t seed = 0;
  double noise_level = 0.0;
  double dt = 0.0;
  std::vector<std::string> ids;
  std::vector<bool> train;
  NormalizationStats stats;
};
Manifest load_manifest(const std::filesystem::path& path);

}  // namespace dynnet::excite
