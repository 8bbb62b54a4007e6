#pragma once

// DynNet recurrent cell: one-step-ahead predictor of the full normalized state
// (u, v, a, S) of an n-DOF structure given the ground acceleration driving the
// step.
//
//   e_q   = embed_q(q)                          q in {u, v, a, S}, n -> E
//   R_u   = ru([e_v, e_a, xg])                  (2E + 1) -> E
//   z     = [e_S, e_u, R_u]                     3E
//   z    <- z + FC5(lrelu(FC4(... lrelu(FC1(z)))))   repeated N times, shared weights
//   S'    = deembed_S(out_S(z)),  X' = deembed_X(out_X(z))
//   [v', a'] = kin([X', u, v, a])               4n -> 2n
//
// The ResNet block's hidden width is configurable; its input/output width is
// 3E.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dynnet/ad/param_vector.hpp"
#include "dynnet/ad/tape.hpp"
#include "dynnet/excite/dataset.hpp"
#include "dynnet/sim/newmark.hpp"

namespace dynnet::model {

struct DynNetHyper {
  std::size_t dofs = 4;
  std::size_t embed = 8;
  std::size_t resnet_layers = 5;  // fixed
  std::size_t resnet_width = 30;
  std::size_t resnet_repeats = 4;
  double leaky_slope = 0.01;
  double dt = 0.02;

  void validate() const;
  std::size_t state_size() const { return 4 * dofs; }
};

struct DynNetLayout {
  ad::AffineRef embed_u, embed_v, embed_a, embed_S;
  ad::AffineRef ru;
  std::vector<ad::AffineRef> resnet;
  ad::AffineRef out_S, out_X;
  ad::AffineRef deembed_S, deembed_X;
  ad::AffineRef kin;
};

struct DynNetParams {
  DynNetHyper hyper;
  ad::ParamVector values;

  DynNetLayout layout() const;
};

// Zero-valued parameter vector with the named layout for `hyper`.
ad::ParamVector make_layout(const DynNetHyper& hyper);
DynNetLayout resolve_layout(const DynNetHyper& hyper, const ad::ParamVector& values);

// Weights ~ U(-sqrt(1/fan_in), sqrt(1/fan_in)), biases zero. kin_map starts at
// the Newmark kinematic constants; with `stats` they are expressed in
// normalized coordinates, otherwise in raw ones.
DynNetParams init_params(const DynNetHyper& hyper, std::uint64_t seed,
                         const excite::NormalizationStats* stats = nullptr);

std::size_t count_parameters(const DynNetParams& params);

struct CellNodes {
  ad::Node u, v, a, S;
};

// Records one cell application on the tape. The state nodes are n x batch.
CellNodes cell_step(ad::Tape& tape, const DynNetLayout& layout, const DynNetHyper& hyper,
                    const CellNodes& state, ad::Node xg);

// Splits a 4n x batch node into its (u, v, a, S) blocks.
CellNodes split_state(ad::Tape& tape, ad::Node state, std::size_t dofs);

// Single-sample convenience: normalized [u|v|a|S] in, normalized state out.
// Throws InferenceError on non-finite output.
std::vector<double> cell_step(const DynNetParams& params,
                              std::span<const double> state_norm, double xg_norm);

inline constexpr double kDivergenceThreshold = 1e6;

struct NormalizedRollout {
  std::size_t batch = 0;
  std::size_t steps = 0;
  std::size_t state_size = 0;
  // states[k] is 4n x batch row-major; states[0] is the initial state.
  std::vector<std::vector<double>> states;
  // First step at which a column left |x| <= 1e6 (or became non-finite).
  std::vector<std::optional<std::size_t>> diverged_at;

  bool any_diverged() const;
};

// Batched rollout in normalized space. init is 4n x batch; xg is steps x batch
// (xg[k] drives the transition k -> k+1). Diverged columns are recorded and
// zeroed from then on so the other columns continue.
NormalizedRollout rollout_normalized(const DynNetParams& params,
                                     std::span<const double> init, std::span<const double> xg,
                                     std::size_t batch, std::size_t steps);

// Physical-units rollout of `steps` transitions from `init`. gm_slice[k] is
// the ground acceleration applied over transition k -> k+1. Throws
// DivergenceError with the step index when the prediction leaves the bounded
// region, InferenceError on non-finite output.
sim::Trajectory rollout(const DynNetParams& params, const sim::DynState& init,
                        std::span<const double> gm_slice, std::size_t steps,
                        const excite::NormalizationStats& stats);

// Checkpoint = parameter container plus a text manifest of the hyperparameters.
void save_checkpoint(const std::string& path, const DynNetParams& params);
DynNetParams load_checkpoint(const std::string& path);
std::string hyper_manifest(const DynNetHyper& hyper);
DynNetHyper parse_hyper_manifest(const std::string& text);

}  // namespace dynnet::model
