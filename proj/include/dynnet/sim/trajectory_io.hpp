#pragma once

// Trajectory container ("DYNT", little-endian):
//   char[4]  magic "DYNT"
//   u16      version (1)
//   u16      n (DOFs)
//   f64      dt
//   u64      steps
//   f64[steps][4n]  row-major blocks [u | v | a | S] per step
//
// Plastic drift is not persisted; readers get zeros.

#include <cstdint>
#include <filesystem>
#include <iosfwd>

#include "dynnet/sim/newmark.hpp"

namespace dynnet::sim {

inline constexpr std::uint16_t kTrajectoryVersion = 1;

void write_trajectory(std::ostream& os, const Trajectory& traj);
Trajectory read_trajectory(std::istream& is);

void save_trajectory(const std::filesystem::path& path, const Trajectory& traj);
Trajectory load_trajectory(const std::filesystem::path& path);

// One row per step: t,u1..un,v1..vn,a1..an,S1..Sn
void write_trajectory_csv(std::ostream& os, const Trajectory& traj);
void save_trajectory_csv(const std::filesystem::path& path, const Trajectory& traj);

}  // namespace dynnet::sim
