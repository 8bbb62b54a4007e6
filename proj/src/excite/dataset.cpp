#include "dynnet/excite/dataset.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "dynnet/errors.hpp"

namespace dynnet::excite {
namespace {

const Eigen::VectorXd& block(const sim::DynState& s, int q) {
  switch (q) {
    case 0: return s.u;
    case 1: return s.v;
    case 2: return s.a;
    default: return s.S;
  }
}

Eigen::VectorXd& block(sim::DynState& s, int q) {
  switch (q) {
    case 0: return s.u;
    case 1: return s.v;
    case 2: return s.a;
    default: return s.S;
  }
}

std::string join(const std::vector<double>& v) {
  std::ostringstream os;
  os.precision(17);
  for (std::size_t i = 0; i < v.size(); ++i) os << (i ? "," : "") << v[i];
  return os.str();
}

std::vector<double> split_doubles(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(std::stod(item));
  return out;
}

}  // namespace

void flatten_state(const sim::DynState& s, std::span<double> out) {
  const std::size_t n = s.dofs();
  for (int q = 0; q < 4; ++q) {
    const auto& b = block(s, q);
    for (std::size_t j = 0; j < n; ++j) out[q * n + j] = b(static_cast<Eigen::Index>(j));
  }
}

void NormalizationStats::normalize_state(const sim::DynState& s,
                                         std::span<double> out) const {
  flatten_state(s, out);
  for (std::size_t c = 0; c < channels(); ++c) out[c] = (out[c] - mean[c]) / stdev[c];
}

sim::DynState NormalizationStats::denormalize_state(std::span<const double> x) const {
  sim::DynState s = sim::DynState::zero(dofs);
  for (int q = 0; q < 4; ++q) {
    auto& b = block(s, q);
    for (std::size_t j = 0; j < dofs; ++j) {
      const std::size_t c = q * dofs + j;
      b(static_cast<Eigen::Index>(j)) = x[c] * stdev[c] + mean[c];
    }
  }
  return s;
}

sim::Trajectory add_measurement_noise(const sim::Trajectory& clean, double level,
                                      std::uint64_t seed) {
  if (!(level >= 0.0 && level <= 0.5)) {
    throw DomainError("add_measurement_noise: level must lie in [0, 0.5]");
  }
  sim::Trajectory out = clean;
  if (level == 0.0 || clean.states.empty()) return out;
  const std::size_t n = clean.dofs();
  const double steps = static_cast<double>(clean.steps());
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (int q = 0; q < 4; ++q) {
    for (std::size_t j = 0; j < n; ++j) {
      const auto jj = static_cast<Eigen::Index>(j);
      double ss = 0.0;
      for (const auto& s : clean.states) ss += block(s, q)(jj) * block(s, q)(jj);
      const double sigma = level * std::sqrt(ss / steps);
      for (auto& s : out.states) block(s, q)(jj) += sigma * normal(rng);
    }
  }
  return out;
}

NormalizationStats compute_stats(std::span<const sim::Trajectory* const> trajs,
                                 std::span<const GroundMotion* const> motions) {
  if (trajs.empty()) throw DomainError("compute_stats: no trajectories");
  NormalizationStats st;
  st.dofs = trajs.front()->dofs();
  const std::size_t ch = st.channels();
  st.mean.assign(ch, 0.0);
  st.stdev.assign(ch, 0.0);
  std::vector<double> row(ch);
  double count = 0.0;
  for (const auto* t : trajs) {
    for (const auto& s : t->states) {
      flatten_state(s, row);
      for (std::size_t c = 0; c < ch; ++c) st.mean[c] += row[c];
      count += 1.0;
    }
  }
  for (double& m : st.mean) m /= count;
  for (const auto* t : trajs) {
    for (const auto& s : t->states) {
      flatten_state(s, row);
      for (std::size_t c = 0; c < ch; ++c) {
        const double d = row[c] - st.mean[c];
        st.stdev[c] += d * d;
      }
    }
  }
  for (double& s : st.stdev) {
    s = std::sqrt(s / count);
    if (!(s > 0.0)) s = 1.0;
  }

  double xs = 0.0, xn = 0.0;
  for (const auto* g : motions) {
    for (double v : g->accel) xs += v;
    xn += static_cast<double>(g->accel.size());
  }
  if (xn > 0.0) {
    st.xg_mean = xs / xn;
    double var = 0.0;
    for (const auto* g : motions) {
      for (double v : g->accel) var += (v - st.xg_mean) * (v - st.xg_mean);
    }
    st.xg_std = std::sqrt(var / xn);
    if (!(st.xg_std > 0.0)) st.xg_std = 1.0;
  }
  return st;
}

std::vector<std::size_t> Dataset::train_indices() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    if (entries[i].train) out.push_back(i);
  }
  return out;
}

std::vector<std::size_t> Dataset::test_indices() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    if (!entries[i].train) out.push_back(i);
  }
  return out;
}

void normalize_entries(Dataset& ds) {
  const std::size_t ch = ds.stats.channels();
  for (auto& e : ds.entries) {
    const std::size_t steps = e.steps();
    e.inputs.assign(steps * ch, 0.0);
    e.targets.assign(steps * ch, 0.0);
    e.xg.assign(steps, 0.0);
    for (std::size_t k = 0; k < steps; ++k) {
      ds.stats.normalize_state(e.noisy.states[k],
                               std::span(e.inputs).subspan(k * ch, ch));
      ds.stats.normalize_state(e.clean.states[k],
                               std::span(e.targets).subspan(k * ch, ch));
      e.xg[k] = ds.stats.normalize_xg(e.gm.accel[k]);
    }
  }
}

std::vector<bool> random_split(std::size_t count, std::size_t n_train, std::uint64_t seed) {
  if (n_train == 0 || n_train >= count) {
    throw DomainError("build_dataset: need 0 < n_train < number of motions");
  }
  std::vector<std::size_t> order(count);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<bool> is_train(count, false);
  for (std::size_t i = 0; i < n_train; ++i) is_train[order[i]] = true;
  return is_train;
}

Dataset build_dataset(const sim::StructureModel& model,
                      const std::vector<GroundMotion>& motions, std::size_t n_train,
                      std::uint64_t seed, double noise_level,
                      const sim::NewtonOptions& opts) {
  return build_dataset(model, motions, random_split(motions.size(), n_train, seed), seed,
                       noise_level, opts);
}

Dataset build_dataset(const sim::StructureModel& model,
                      const std::vector<GroundMotion>& motions,
                      const std::vector<bool>& train_mask, std::uint64_t seed,
                      double noise_level, const sim::NewtonOptions& opts) {
  if (train_mask.size() != motions.size()) {
    throw DomainError("build_dataset: split mask does not match the motions");
  }
  const auto n_train = static_cast<std::size_t>(std::count(train_mask.begin(), train_mask.end(), true));
  if (n_train == 0 || n_train == motions.size()) {
    throw DomainError("build_dataset: need at least one training and one test motion");
  }
  Dataset ds;
  ds.noise_level = noise_level;
  ds.seed = seed;
  ds.dt = motions.front().dt;

  const auto init = sim::DynState::zero(model.dofs());
  for (std::size_t i = 0; i < motions.size(); ++i) {
    const auto& gm = motions[i];
    if (gm.dt != ds.dt) throw DomainError("build_dataset: motions must share dt");
    DatasetEntry e;
    e.gm = gm;
    e.clean = simulate(model, gm, init, opts);
    e.noisy = add_measurement_noise(e.clean, noise_level, seed + 1000003ULL * (i + 1));
    e.train = train_mask[i];
    ds.entries.push_back(std::move(e));
  }

  std::vector<const sim::Trajectory*> trajs;
  std::vector<const GroundMotion*> gms;
  for (const auto& e : ds.entries) {
    if (!e.train) continue;
    trajs.push_back(&e.noisy);
    gms.push_back(&e.gm);
  }
  ds.stats = compute_stats(trajs, gms);
  normalize_entries(ds);
  return ds;
}

void save_manifest(const std::filesystem::path& path, const Dataset& ds) {
  boost::property_tree::ptree pt;
  pt.put("dataset.seed", ds.seed);
  pt.put("dataset.noise_level", ds.noise_level);
  pt.put("dataset.dt", ds.dt);
  pt.put("dataset.dofs", ds.stats.dofs);
  pt.put("dataset.motions", ds.entries.size());
  boost::property_tree::ptree split;
  for (const auto& e : ds.entries) split.put(e.gm.id, e.train ? "train" : "test");
  pt.add_child("split", split);
  pt.put("stats.mean", join(ds.stats.mean));
  pt.put("stats.std", join(ds.stats.stdev));
  std::ostringstream xg;
  xg.precision(17);
  xg << ds.stats.xg_mean;
  pt.put("stats.xg_mean", xg.str());
  xg.str("");
  xg << ds.stats.xg_std;
  pt.put("stats.xg_std", xg.str());
  boost::property_tree::write_ini(path.string(), pt);
}

Manifest load_manifest(const std::filesystem::path& path) {
  boost::property_tree::ptree pt;
  try {
    boost::property_tree::read_ini(path.string(), pt);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw FormatError(std::string("manifest: ") + e.what());
  }
  Manifest m;
  m.seed = pt.get<std::uint64_t>("dataset.seed");
  m.noise_level = pt.get<double>("dataset.noise_level");
  m.dt = pt.get<double>("dataset.dt");
  m.stats.dofs = pt.get<std::size_t>("dataset.dofs");
  for (const auto& [id, v] : pt.get_child("split")) {
    m.ids.push_back(id);
    m.train.push_back(v.get_value<std::string>() == "train");
  }
  m.stats.mean = split_doubles(pt.get<std::string>("stats.mean"));
  m.stats.stdev = split_doubles(pt.get<std::string>("stats.std"));
  m.stats.xg_mean = pt.get<double>("stats.xg_mean");
  m.stats.xg_std = pt.get<double>("stats.xg_std");
  if (m.stats.mean.size() != m.stats.channels() || m.stats.stdev.size() != m.stats.channels()) {
    throw FormatError("manifest: statistics length does not match dofs");
  }
  return m;
}

}  // namespace dynnet::excite
