#include "dynnet/excite/ground_motion.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <numbers>
#include <random>
#include <sstream>

#include "dynnet/errors.hpp"
#include "fftw_lock.hpp"

namespace dynnet::excite {
namespace {

// Zeroes every bin outside [f_lo, f_hi] of a real series.
void band_mask(std::vector<double>& x, double dt, double f_lo, double f_hi) {
  const int n = static_cast<int>(x.size());
  const int bins = n / 2 + 1;
  std::vector<std::complex<double>> spec(static_cast<std::size_t>(bins));
  fftw_plan fwd, inv;
  {
    std::lock_guard lock(detail::fftw_planner_mutex());
    fwd = fftw_plan_dft_r2c_1d(n, x.data(), reinterpret_cast<fftw_complex*>(spec.data()),
                               FFTW_ESTIMATE);
    inv = fftw_plan_dft_c2r_1d(n, reinterpret_cast<fftw_complex*>(spec.data()), x.data(),
                               FFTW_ESTIMATE);
  }
  fftw_execute(fwd);
  const double df = 1.0 / (static_cast<double>(n) * dt);
  for (int k = 0; k < bins; ++k) {
    const double f = k * df;
    if (f < f_lo || f > f_hi) {
      spec[static_cast<std::size_t>(k)] = 0.0;
    } else {
      spec[static_cast<std::size_t>(k)] /= static_cast<double>(n);
    }
  }
  fftw_execute(inv);
  {
    std::lock_guard lock(detail::fftw_planner_mutex());
    fftw_destroy_plan(fwd);
    fftw_destroy_plan(inv);
  }
}

void cosine_taper(std::vector<double>& x, double fraction) {
  const std::size_t n = x.size();
  const std::size_t m = std::max<std::size_t>(1, static_cast<std::size_t>(fraction * n));
  for (std::size_t i = 0; i < m && i < n; ++i) {
    const double w = 0.5 * (1.0 - std::cos(std::numbers::pi * static_cast<double>(i) /
                                           static_cast<double>(m)));
    x[i] *= w;
    x[n - 1 - i] *= w;
  }
}

void scale_to_pga(std::vector<double>& x, double target) {
  double peak = 0.0;
  for (double v : x) peak = std::max(peak, std::abs(v));
  if (!(peak > 0.0)) throw DomainError("ground motion has zero peak");
  const double s = target / peak;
  for (double& v : x) v *= s;
}

void check_band(double dt, double duration, double f_lo, double f_hi, double pga) {
  if (!(dt > 0.0)) throw DomainError("ground motion: dt must be > 0");
  if (!(duration >= 10.0)) throw DomainError("ground motion: duration must be >= 10 s");
  if (!(f_lo > 0.0 && f_lo < f_hi && f_hi < 1.0 / (2.0 * dt))) {
    throw DomainError("ground motion: invalid band, need 0 < f_lo < f_hi < Nyquist");
  }
  if (!(pga > 0.0)) throw DomainError("ground motion: target PGA must be > 0");
}

std::vector<double> white_noise(std::uint64_t seed, std::size_t n) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> x(n);
  for (double& v : x) v = normal(rng);
  return x;
}

std::string make_id(const char* prefix, std::uint64_t seed) {
  std::ostringstream os;
  os << prefix << '_' << seed;
  return os.str();
}

}  // namespace

double GroundMotion::peak() const {
  double p = 0.0;
  for (double v : accel) p = std::max(p, std::abs(v));
  return p;
}

void GroundMotion::validate() const {
  if (!(dt > 0.0)) throw DomainError("GroundMotion: dt must be > 0");
  if (accel.empty()) throw DomainError("GroundMotion: empty record");
  for (double v : accel) {
    if (!std::isfinite(v)) throw DomainError("GroundMotion: non-finite sample");
  }
  if (!(peak() > 0.0)) throw DomainError("GroundMotion: zero peak acceleration");
}

GroundMotion band_limited_noise(std::uint64_t seed, double dt, double duration,
                                double f_lo, double f_hi, double target_pga) {
  check_band(dt, duration, f_lo, f_hi, target_pga);
  const auto n = static_cast<std::size_t>(std::llround(duration / dt));
  std::vector<double> x = white_noise(seed, n);
  cosine_taper(x, 0.05);
  band_mask(x, dt, f_lo, f_hi);
  scale_to_pga(x, target_pga);
  return {dt, std::move(x), make_id("bln", seed), 1.0};
}

GroundMotion earthquake_like(std::uint64_t seed, double dt, double duration,
                             double f_lo, double f_hi, double target_pga) {
  check_band(dt, duration, f_lo, f_hi, target_pga);
  const auto n = static_cast<std::size_t>(std::llround(duration / dt));
  std::vector<double> x = white_noise(seed, n);
  // Quadratic build-up, strong-motion plateau, exponential decay; the plateau
  // position is drawn from the seed.
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const double t1 = duration * (0.05 + 0.15 * unif(rng));
  const double t2 = t1 + duration * (0.15 + 0.25 * unif(rng));
  const double decay = 3.0 / std::max(duration - t2, dt);
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) * dt;
    double e = 1.0;
    if (t < t1) {
      e = (t / t1) * (t / t1);
    } else if (t > t2) {
      e = std::exp(-decay * (t - t2));
    }
    x[i] *= e;
  }
  cosine_taper(x, 0.05);
  band_mask(x, dt, f_lo, f_hi);
  scale_to_pga(x, target_pga);
  return {dt, std::move(x), make_id("eq", seed), 1.0};
}

GroundMotion scale_motion(const GroundMotion& gm, double factor) {
  GroundMotion out = gm;
  for (double& v : out.accel) v *= factor;
  out.scale = gm.scale * factor;
  std::ostringstream os;
  os << gm.id << "_x" << factor;
  out.id = os.str();
  return out;
}

sim::Trajectory simulate(const sim::StructureModel& model, const GroundMotion& gm,
                         const sim::DynState& init, const sim::NewtonOptions& opts) {
  return sim::simulate(model, gm.accel, gm.dt, init, opts, gm.id);
}

std::pair<double, double> default_band(const sim::StructureModel& model, double dt) {
  const double t1 = sim::modal_properties(model).periods_s.front();
  const double nyquist = 1.0 / (2.0 * dt);
  const double lo = 1.0 / (1.5 * t1);
  const double hi = std::min(1.0 / (0.2 * t1), 0.9 * nyquist);
  return {lo, hi};
}

std::vector<GroundMotion> make_corpus(const sim::StructureModel& model,
                                      const CorpusSpec& spec) {
  auto [lo, hi] = default_band(model, spec.dt);
  if (spec.f_lo > 0.0) lo = spec.f_lo;
  if (spec.f_hi > 0.0) hi = spec.f_hi;
  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> pga(spec.pga_min, spec.pga_max);
  std::vector<GroundMotion> out;
  const std::size_t total = spec.earthquake_like + spec.stationary;
  for (std::size_t i = 0; i < total; ++i) {
    const std::uint64_t s = rng();
    const double target = pga(rng);
    GroundMotion gm = i < spec.earthquake_like
                          ? earthquake_like(s, spec.dt, spec.duration, lo, hi, target)
                          : band_limited_noise(s, spec.dt, spec.duration, lo, hi, target);
    std::ostringstream id;
    id << "gm_" << std::setw(2) << std::setfill('0') << i;
    gm.id = id.str();
    out.push_back(std::move(gm));
  }
  return out;
}

void save_ground_motion_csv(const std::filesystem::path& path, const GroundMotion& gm) {
  std::ofstream os(path);
  if (!os) throw FormatError("cannot open " + path.string() + " for writing");
  os << "time,accel\n" << std::setprecision(17);
  for (std::size_t i = 0; i < gm.accel.size(); ++i) {
    os << static_cast<double>(i) * gm.dt << ',' << gm.accel[i] << '\n';
  }
}

GroundMotion load_ground_motion_csv(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw FormatError("cannot open " + path.string());
  GroundMotion gm;
  gm.id = path.stem().string();
  std::string line;
  std::vector<double> times;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw FormatError("ground motion CSV: expected 2 columns");
    try {
      times.push_back(std::stod(line.substr(0, comma)));
      gm.accel.push_back(std::stod(line.substr(comma + 1)));
    } catch (const std::invalid_argument&) {
      if (!gm.accel.empty() || !times.empty()) {
        throw FormatError("ground motion CSV: malformed row '" + line + "'");
      }
      // header row
    }
  }
  if (times.size() < 2) throw FormatError("ground motion CSV: need at least 2 samples");
  gm.dt = times[1] - times[0];
  gm.validate();
  return gm;
}

}  // namespace dynnet::excite
