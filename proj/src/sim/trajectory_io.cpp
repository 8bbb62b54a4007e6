#include "dynnet/sim/trajectory_io.hpp"

#include <fstream>
#include <iomanip>
#include <ostream>

#include "dynnet/binary_io.hpp"

namespace dynnet::sim {

void write_trajectory(std::ostream& os, const Trajectory& traj) {
  const std::size_t n = traj.dofs();
  os.write("DYNT", 4);
  io::put<std::uint16_t>(os, kTrajectoryVersion);
  io::put<std::uint16_t>(os, static_cast<std::uint16_t>(n));
  io::put<double>(os, traj.dt);
  io::put<std::uint64_t>(os, traj.steps());
  for (const auto& s : traj.states) {
    for (const Eigen::VectorXd* block : {&s.u, &s.v, &s.a, &s.S}) {
      os.write(reinterpret_cast<const char*>(block->data()),
               static_cast<std::streamsize>(n * sizeof(double)));
    }
  }
  if (!os) throw FormatError("write_trajectory: stream error");
}

Trajectory read_trajectory(std::istream& is) {
  io::expect_magic(is, "DYNT");
  const auto version = io::get<std::uint16_t>(is);
  if (version != kTrajectoryVersion) throw FormatError("unsupported DYNT version");
  const auto n = io::get<std::uint16_t>(is);
  Trajectory traj;
  traj.dt = io::get<double>(is);
  const auto steps = io::get<std::uint64_t>(is);
  traj.states.reserve(steps);
  for (std::uint64_t k = 0; k < steps; ++k) {
    DynState s = DynState::zero(n);
    for (Eigen::VectorXd* block : {&s.u, &s.v, &s.a, &s.S}) {
      if (!is.read(reinterpret_cast<char*>(block->data()),
                   static_cast<std::streamsize>(n * sizeof(double)))) {
        throw FormatError("read_trajectory: truncated data block");
      }
    }
    traj.states.push_back(std::move(s));
  }
  return traj;
}

void save_trajectory(const std::filesystem::path& path, const Trajectory& traj) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw FormatError("cannot open " + path.string() + " for writing");
  write_trajectory(os, traj);
}

Trajectory load_trajectory(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("cannot open " + path.string());
  Trajectory t = read_trajectory(is);
  t.gm_id = path.stem().string();
  return t;
}

void write_trajectory_csv(std::ostream& os, const Trajectory& traj) {
  const std::size_t n = traj.dofs();
  os << "t";
  for (const char* q : {"u", "v", "a", "S"}) {
    for (std::size_t j = 1; j <= n; ++j) os << ',' << q << j;
  }
  os << '\n' << std::setprecision(17);
  for (std::size_t k = 0; k < traj.steps(); ++k) {
    const auto& s = traj.states[k];
    os << static_cast<double>(k) * traj.dt;
    for (const Eigen::VectorXd* block : {&s.u, &s.v, &s.a, &s.S}) {
      for (Eigen::Index j = 0; j < block->size(); ++j) os << ',' << (*block)(j);
    }
    os << '\n';
  }
}

void save_trajectory_csv(const std::filesystem::path& path, const Trajectory& traj) {
  std::ofstream os(path);
  if (!os) throw FormatError("cannot open " + path.string() + " for writing");
  write_trajectory_csv(os, traj);
}

}  // namespace dynnet::sim
