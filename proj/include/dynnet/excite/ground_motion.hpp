#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "dynnet/sim/newmark.hpp"

namespace dynnet::excite {

struct GroundMotion {
  double dt = 0.0;
  std::vector<double> accel;  // length/time^2
  std::string id;
  double scale = 1.0;

  double peak() const;
  void validate() const;
};

// Gaussian white noise, 5% cosine taper at both ends, then a frequency-domain
// mask keeping [f_lo, f_hi], scaled so max |accel| == target_pga.
// Throws DomainError unless 0 < f_lo < f_hi < 1/(2 dt) and duration >= 10 s.
GroundMotion band_limited_noise(std::uint64_t seed, double dt, double duration,
                                double f_lo, double f_hi, double target_pga);

// Nonstationary variant: white noise under a build-up / strong-motion / decay
// envelope, band-limited the same way. Used for the "earthquake-like" part of
// the corpus.
GroundMotion earthquake_like(std::uint64_t seed, double dt, double duration,
                             double f_lo, double f_hi, double target_pga);

GroundMotion scale_motion(const GroundMotion& gm, double factor);

sim::Trajectory simulate(const sim::StructureModel& model, const GroundMotion& gm,
                         const sim::DynState& init,
                         const sim::NewtonOptions& opts = {});

struct CorpusSpec {
  std::size_t earthquake_like = 20;
  std::size_t stationary = 10;
  double dt = 0.02;
  double duration = 40.0;
  double pga_min = 0.15 * sim::kGravity;
  double pga_max = 0.35 * sim::kGravity;
  double f_lo = 0.0;  // <= 0 -> derived from the structure's first mode
  double f_hi = 0.0;
  std::uint64_t seed = 1;
  // > 0: test motions are generated at this duration instead (long-horizon
  // evaluation); training motions keep `duration`.
  double test_duration = 0.0;
};

// Default band: periods between 0.2 T1 and 1.5 T1, clipped below Nyquist.
std::pair<double, double> default_band(const sim::StructureModel& model, double dt);

std::vector<GroundMotion> make_corpus(const sim::StructureModel& model,
                                      const CorpusSpec& spec);

// Two-column CSV "time,accel".
void save_ground_motion_csv(const std::filesystem::path& path, const GroundMotion& gm);
GroundMotion load_ground_motion_csv(const std::filesystem::path& path);

}  // namespace dynnet::excite
