#include "dynnet/eval/metrics.hpp"

#include <fftw3.h>

#include <cmath>
#include <algorithm>
#include <complex>
#include <mutex>

#include "dynnet/errors.hpp"
#include "fftw_lock.hpp"

namespace dynnet::eval {

double pcc(std::span<const double> pred, std::span<const double> truth) {
  if (pred.size() != truth.size()) throw DomainError("pcc: length mismatch");
  const std::size_t n = pred.size();
  if (n < 2) throw DomainError("pcc: need at least two samples");
  double mp = 0.0, mt = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mp += pred[i];
    mt += truth[i];
  }
  mp /= static_cast<double>(n);
  mt /= static_cast<double>(n);
  double spt = 0.0, spp = 0.0, stt = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dp = pred[i] - mp, dt = truth[i] - mt;
    spt += dp * dt;
    spp += dp * dp;
    stt += dt * dt;
  }
  if (!(stt > 0.0)) throw UndefinedMetricError("pcc: truth has zero variance");
  if (!(spp > 0.0)) return 0.0;
  return std::clamp(spt / std::sqrt(spp * stt), -1.0, 1.0);
}

double mse(std::span<const double> pred, std::span<const double> truth) {
  if (pred.size() != truth.size() || pred.empty()) throw DomainError("mse: length mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = pred[i] - truth[i];
    s += d * d;
  }
  return s / static_cast<double>(pred.size());
}

const char* quantity_name(Quantity q) {
  switch (q) {
    case Quantity::u: return "u";
    case Quantity::v: return "v";
    case Quantity::a: return "a";
    case Quantity::S: return "S";
  }
  return "?";
}

std::vector<double> channel(const sim::Trajectory& traj, Quantity q, std::size_t dof,
                            std::size_t count) {
  if (dof >= traj.dofs()) throw DomainError("channel: DOF out of range");
  const std::size_t n = std::min(count, traj.steps());
  std::vector<double> out(n);
  for (std::size_t k = 0; k < n; ++k) {
    const auto& s = traj.states[k];
    switch (q) {
      case Quantity::u: out[k] = s.u[dof]; break;
      case Quantity::v: out[k] = s.v[dof]; break;
      case Quantity::a: out[k] = s.a[dof]; break;
      case Quantity::S: out[k] = s.S[dof]; break;
    }
  }
  return out;
}

std::vector<HysteresisPoint> hysteresis(const sim::Trajectory& traj,
                                        const sim::StructureModel& model, std::size_t story,
                                        bool include_damping) {
  if (story >= model.dofs() || traj.dofs() != model.dofs()) {
    throw DomainError("hysteresis: story out of range");
  }
  const Eigen::MatrixXd C = damping_matrix(model);
  std::vector<HysteresisPoint> out;
  out.reserve(traj.steps());
  for (const auto& s : traj.states) {
    const Eigen::VectorXd drift = sim::story_drifts(s.u);
    double force = sim::story_from_nodal(s.S)[story];
    if (include_damping) {
      force += sim::story_from_nodal(C * s.v)[story];
    }
    out.push_back({drift[story], force});
  }
  return out;
}

std::vector<SpectrumPoint> spectrum(std::span<const double> series, double dt) {
  const std::size_t n = series.size();
  if (n < 2) throw DomainError("spectrum: need at least two samples");
  if (!(dt > 0.0)) throw DomainError("spectrum: dt must be > 0");

  // Least-squares line through (k, x_k).
  const double nn = static_cast<double>(n);
  const double kmean = (nn - 1.0) / 2.0;
  double xmean = 0.0;
  for (double x : series) xmean += x;
  xmean /= nn;
  double skx = 0.0, skk = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const double dk = static_cast<double>(k) - kmean;
    skx += dk * (series[k] - xmean);
    skk += dk * dk;
  }
  const double slope = skx / skk;

  std::vector<double> in(n);
  for (std::size_t k = 0; k < n; ++k) {
    in[k] = series[k] - xmean - slope * (static_cast<double>(k) - kmean);
  }
  std::vector<std::complex<double>> out(n / 2 + 1);
  fftw_plan plan;
  {
    std::lock_guard lock(detail::fftw_planner_mutex());
    plan = fftw_plan_dft_r2c_1d(static_cast<int>(n), in.data(),
                                reinterpret_cast<fftw_complex*>(out.data()), FFTW_ESTIMATE);
  }
  fftw_execute(plan);
  {
    std::lock_guard lock(detail::fftw_planner_mutex());
    fftw_destroy_plan(plan);
  }
  std::vector<SpectrumPoint> res(out.size());
  for (std::size_t k = 0; k < out.size(); ++k) {
    res[k] = {static_cast<double>(k) / (nn * dt), 2.0 * std::abs(out[k]) / nn};
  }
  return res;
}

}  // namespace dynnet::eval
