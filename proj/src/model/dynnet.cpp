#include "dynnet/model/dynnet.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include "dynnet/errors.hpp"

namespace dynnet::model {
namespace {

void add_affine(ad::ParamVector& p, const std::string& name, std::size_t out, std::size_t in) {
  p.add_block(name + ".w", out, in);
  p.add_block(name + ".b", out, 1);
}

ad::AffineRef ref(const ad::ParamVector& p, const std::string& name) {
  const auto& w = p.block(name + ".w");
  const auto& b = p.block(name + ".b");
  return {w.offset, b.offset, w.rows, w.cols};
}

std::string resnet_name(std::size_t l) { return "resnet" + std::to_string(l + 1); }

}  // namespace

void DynNetHyper::validate() const {
  if (dofs == 0) throw DomainError("DynNetHyper: dofs must be >= 1");
  if (embed < dofs) throw DomainError("DynNetHyper: embedding size must be >= dofs");
  if (resnet_layers != 5) throw DomainError("DynNetHyper: the ResNet block has 5 layers");
  if (resnet_repeats < 1) throw DomainError("DynNetHyper: resnet_repeats must be >= 1");
  if (resnet_width < 1) throw DomainError("DynNetHyper: resnet_width must be >= 1");
  if (!(dt > 0.0)) throw DomainError("DynNetHyper: dt must be > 0");
  if (!(leaky_slope >= 0.0 && leaky_slope < 1.0)) {
    throw DomainError("DynNetHyper: leaky_slope must lie in [0, 1)");
  }
}

ad::ParamVector make_layout(const DynNetHyper& h) {
  h.validate();
  const std::size_t n = h.dofs, E = h.embed, Z = 3 * h.embed, H = h.resnet_width;
  ad::ParamVector p;
  add_affine(p, "embed_u", E, n);
  add_affine(p, "embed_v", E, n);
  add_affine(p, "embed_a", E, n);
  add_affine(p, "embed_S", E, n);
  add_affine(p, "ru", E, 2 * E + 1);
  for (std::size_t l = 0; l < h.resnet_layers; ++l) {
    const std::size_t in = l == 0 ? Z : H;
    const std::size_t out = l + 1 == h.resnet_layers ? Z : H;
    add_affine(p, resnet_name(l), out, in);
  }
  add_affine(p, "out_S", E, Z);
  add_affine(p, "out_X", E, Z);
  add_affine(p, "deembed_S", n, E);
  add_affine(p, "deembed_X", n, E);
  add_affine(p, "kin", 2 * n, 4 * n);
  return p;
}

DynNetLayout resolve_layout(const DynNetHyper& h, const ad::ParamVector& p) {
  DynNetLayout L;
  L.embed_u = ref(p, "embed_u");
  L.embed_v = ref(p, "embed_v");
  L.embed_a = ref(p, "embed_a");
  L.embed_S = ref(p, "embed_S");
  L.ru = ref(p, "ru");
  for (std::size_t l = 0; l < h.resnet_layers; ++l) L.resnet.push_back(ref(p, resnet_name(l)));
  L.out_S = ref(p, "out_S");
  L.out_X = ref(p, "out_X");
  L.deembed_S = ref(p, "deembed_S");
  L.deembed_X = ref(p, "deembed_X");
  L.kin = ref(p, "kin");
  if (L.embed_u.in != h.dofs || L.ru.out != h.embed) {
    throw FormatError("parameter layout does not match hyperparameters");
  }
  return L;
}

DynNetLayout DynNetParams::layout() const { return resolve_layout(hyper, values); }

DynNetParams init_params(const DynNetHyper& hyper, std::uint64_t seed,
                         const excite::NormalizationStats* stats) {
  DynNetParams out{hyper, make_layout(hyper)};
  std::mt19937_64 rng(seed);
  for (const auto& blk : out.values.layout()) {
    if (blk.name == "kin.w" || blk.cols == 1) continue;  // biases stay zero
    const double bound = std::sqrt(1.0 / static_cast<double>(blk.cols));
    std::uniform_real_distribution<double> unif(-bound, bound);
    for (double& w : out.values.values().subspan(blk.offset, blk.size())) w = unif(rng);
  }

  // Kinematic map: inputs [X' | u | v | a], outputs [v' | a'].
  const std::size_t n = hyper.dofs;
  const auto k = sim::NewmarkConstants::average_acceleration(hyper.dt);
  auto kin = out.values.block_values("kin.w");
  const std::size_t cols = 4 * n;
  for (std::size_t j = 0; j < n; ++j) {
    double su = 1.0, sv = 1.0, sa = 1.0;
    if (stats) {
      su = stats->stdev[j];
      sv = stats->stdev[n + j];
      sa = stats->stdev[2 * n + j];
    }
    double* vrow = kin.data() + j * cols;
    double* arow = kin.data() + (n + j) * cols;
    vrow[j] = k.c1() * su / sv;
    vrow[n + j] = -k.c1() * su / sv;
    vrow[2 * n + j] = k.c2();
    vrow[3 * n + j] = k.c3() * sa / sv;
    arow[j] = k.c4() * su / sa;
    arow[n + j] = -k.c4() * su / sa;
    arow[2 * n + j] = k.c5() * sv / sa;
    arow[3 * n + j] = k.c6();
  }
  return out;
}

std::size_t count_parameters(const DynNetParams& params) {
  std::size_t total = 0;
  for (const auto& b : params.values.layout()) total += b.size();
  return total;
}

CellNodes split_state(ad::Tape& tape, ad::Node state, std::size_t n) {
  return {tape.slice(state, 0, n), tape.slice(state, n, n), tape.slice(state, 2 * n, n),
          tape.slice(state, 3 * n, n)};
}

CellNodes cell_step(ad::Tape& tape, const DynNetLayout& L, const DynNetHyper& h,
                    const CellNodes& s, ad::Node xg) {
  const ad::Node eu = tape.affine(L.embed_u, s.u);
  const ad::Node ev = tape.affine(L.embed_v, s.v);
  const ad::Node ea = tape.affine(L.embed_a, s.a);
  const ad::Node eS = tape.affine(L.embed_S, s.S);
  const ad::Node ru = tape.affine(L.ru, tape.concat({ev, ea, xg}));
  ad::Node z = tape.concat({eS, eu, ru});
  for (std::size_t rep = 0; rep < h.resnet_repeats; ++rep) {
    ad::Node y = z;
    for (std::size_t l = 0; l < L.resnet.size(); ++l) {
      y = tape.affine(L.resnet[l], y);
      if (l + 1 < L.resnet.size()) y = tape.leaky_relu(y, h.leaky_slope);
    }
    z = tape.add(z, y);
  }
  const ad::Node S_next = tape.affine(L.deembed_S, tape.affine(L.out_S, z));
  const ad::Node X_next = tape.affine(L.deembed_X, tape.affine(L.out_X, z));
  const ad::Node va = tape.affine(L.kin, tape.concat({X_next, s.u, s.v, s.a}));
  return {X_next, tape.slice(va, 0, h.dofs), tape.slice(va, h.dofs, h.dofs), S_next};
}

std::vector<double> cell_step(const DynNetParams& params, std::span<const double> state_norm,
                              double xg_norm) {
  const std::size_t ns = params.hyper.state_size();
  if (state_norm.size() != ns) throw DomainError("cell_step: state size mismatch");
  for (double x : state_norm) {
    if (!std::isfinite(x)) throw DomainError("cell_step: non-finite input state");
  }
  const auto L = params.layout();
  ad::Tape tape(params.values.values(), 1);
  const auto state = split_state(tape, tape.input(state_norm, ns), params.hyper.dofs);
  const double xg[1] = {xg_norm};
  const auto next = cell_step(tape, L, params.hyper, state, tape.input(xg, 1));
  std::vector<double> out;
  out.reserve(ns);
  for (ad::Node q : {next.u, next.v, next.a, next.S}) {
    const auto v = tape.value(q);
    out.insert(out.end(), v.begin(), v.end());
  }
  for (double x : out) {
    if (!std::isfinite(x)) throw InferenceError("cell_step: non-finite output", 0);
  }
  return out;
}

bool NormalizedRollout::any_diverged() const {
  for (const auto& d : diverged_at) {
    if (d) return true;
  }
  return false;
}

NormalizedRollout rollout_normalized(const DynNetParams& params, std::span<const double> init,
                                     std::span<const double> xg, std::size_t batch,
                                     std::size_t steps) {
  const std::size_t ns = params.hyper.state_size();
  const std::size_t n = params.hyper.dofs;
  if (init.size() != ns * batch) throw DomainError("rollout: init size mismatch");
  if (xg.size() < steps * batch) throw DomainError("rollout: ground motion slice too short");
  const auto L = params.layout();

  NormalizedRollout out;
  out.batch = batch;
  out.steps = steps;
  out.state_size = ns;
  out.diverged_at.assign(batch, std::nullopt);
  out.states.reserve(steps + 1);
  out.states.emplace_back(init.begin(), init.end());

  std::vector<double> mask(batch, 1.0);
  for (std::size_t k = 0; k < steps; ++k) {
    ad::Tape tape(params.values.values(), batch);
    const auto state = split_state(tape, tape.input(out.states.back(), ns), n);
    const auto next =
        cell_step(tape, L, params.hyper, state, tape.input(xg.subspan(k * batch, batch), 1));
    std::vector<double> s;
    s.reserve(ns * batch);
    for (ad::Node q : {next.u, next.v, next.a, next.S}) {
      const auto v = tape.value(q);
      s.insert(s.end(), v.begin(), v.end());
    }
    for (std::size_t c = 0; c < batch; ++c) {
      if (out.diverged_at[c]) continue;
      for (std::size_t r = 0; r < ns; ++r) {
        const double x = s[r * batch + c];
        if (!std::isfinite(x) || std::abs(x) > kDivergenceThreshold) {
          out.diverged_at[c] = k + 1;
          mask[c] = 0.0;
          break;
        }
      }
    }
    for (std::size_t r = 0; r < ns; ++r) {
      for (std::size_t c = 0; c < batch; ++c) {
        if (mask[c] == 0.0) s[r * batch + c] = 0.0;
      }
    }
    out.states.push_back(std::move(s));
  }
  return out;
}

sim::Trajectory rollout(const DynNetParams& params, const sim::DynState& init,
                        std::span<const double> gm_slice, std::size_t steps,
                        const excite::NormalizationStats& stats) {
  if (gm_slice.size() < steps) throw DomainError("rollout: gm_slice shorter than steps");
  const std::size_t ns = params.hyper.state_size();
  std::vector<double> x0(ns);
  stats.normalize_state(init, x0);
  std::vector<double> xg(steps);
  for (std::size_t k = 0; k < steps; ++k) xg[k] = stats.normalize_xg(gm_slice[k]);

  sim::Trajectory traj;
  traj.dt = params.hyper.dt;
  traj.states.push_back(stats.denormalize_state(x0));

  const auto L = params.layout();
  std::vector<double> cur = x0;
  for (std::size_t k = 0; k < steps; ++k) {
    ad::Tape tape(params.values.values(), 1);
    const auto state = split_state(tape, tape.input(cur, ns), params.hyper.dofs);
    const auto next = cell_step(tape, L, params.hyper, state, tape.input(std::span(xg).subspan(k, 1), 1));
    std::vector<double> s;
    s.reserve(ns);
    for (ad::Node q : {next.u, next.v, next.a, next.S}) {
      const auto v = tape.value(q);
      s.insert(s.end(), v.begin(), v.end());
    }
    for (double x : s) {
      if (!std::isfinite(x)) {
        throw InferenceError("rollout: non-finite output at step " + std::to_string(k + 1), k + 1);
      }
      if (std::abs(x) > kDivergenceThreshold) {
        throw DivergenceError("rollout: diverged at step " + std::to_string(k + 1), k + 1);
      }
    }
    traj.states.push_back(stats.denormalize_state(s));
    cur = std::move(s);
  }
  return traj;
}

std::string hyper_manifest(const DynNetHyper& h) {
  std::ostringstream os;
  os.precision(17);
  os << "[dynnet]\n"
     << "dofs=" << h.dofs << '\n'
     << "embed=" << h.embed << '\n'
     << "resnet_layers=" << h.resnet_layers << '\n'
     << "resnet_width=" << h.resnet_width << '\n'
     << "resnet_repeats=" << h.resnet_repeats << '\n'
     << "leaky_slope=" << h.leaky_slope << '\n'
     << "dt=" << h.dt << '\n';
  return os.str();
}

DynNetHyper parse_hyper_manifest(const std::string& text) {
  boost::property_tree::ptree pt;
  std::istringstream is(text);
  try {
    boost::property_tree::read_ini(is, pt);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw FormatError(std::string("hyper manifest: ") + e.what());
  }
  DynNetHyper h;
  h.dofs = pt.get<std::size_t>("dynnet.dofs");
  h.embed = pt.get<std::size_t>("dynnet.embed");
  h.resnet_layers = pt.get<std::size_t>("dynnet.resnet_layers", 5);
  h.resnet_width = pt.get<std::size_t>("dynnet.resnet_width");
  h.resnet_repeats = pt.get<std::size_t>("dynnet.resnet_repeats");
  h.leaky_slope = pt.get<double>("dynnet.leaky_slope");
  h.dt = pt.get<double>("dynnet.dt");
  h.validate();
  return h;
}

void save_checkpoint(const std::string& path, const DynNetParams& params) {
  ad::save_params(path, params.values);
  std::ofstream os(path + ".hyper");
  if (!os) throw FormatError("cannot write " + path + ".hyper");
  os << hyper_manifest(params.hyper);
  std::ofstream layout(path + ".layout");
  layout << ad::layout_manifest(params.values);
}

DynNetParams load_checkpoint(const std::string& path) {
  std::ifstream is(path + ".hyper");
  if (!is) throw FormatError("missing hyper manifest " + path + ".hyper");
  std::stringstream ss;
  ss << is.rdbuf();
  DynNetParams p{parse_hyper_manifest(ss.str()), ad::load_params(path)};
  if (!(p.values.layout() == make_layout(p.hyper).layout())) {
    throw FormatError("checkpoint layout does not match its hyperparameters");
  }
  return p;
}

}  // namespace dynnet::model
