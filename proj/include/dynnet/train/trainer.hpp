#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "dynnet/excite/dataset.hpp"
#include "dynnet/model/dynnet.hpp"
#include "dynnet/train/hardsample.hpp"
#include "dynnet/train/trust_region.hpp"

namespace dynnet::train {

enum class Optimizer { TRCG, Adam, SGD };

Optimizer parse_optimizer(const std::string& name);
std::string optimizer_name(Optimizer o);

struct Stage {
  std::size_t length = 10;
  std::size_t iterations = 1000;
};

struct TrainingConfig {
  std::size_t batch_size = 1024;
  std::vector<Stage> schedule{{10, 1000}, {25, 1000}, {50, 1000}};
  double hardsample_rate = 0.5;
  std::size_t hardsample_top = 64;
  std::size_t bag_capacity = 8192;
  Optimizer optimizer = Optimizer::TRCG;
  double delta0 = 1.0;
  double delta_max = 100.0;
  double eta = 1e-4;
  std::size_t cg_max_iter = 250;
  std::optional<double> cg_rel_tol;
  double lr = 1e-3;
  std::uint64_t seed = 1;
  // Test loss: projection loss of length eval_length (0 -> longest stage)
  // over test_starts fixed start points drawn from the test split.
  std::size_t test_starts = 256;
  std::size_t eval_length = 0;
  // Evaluate the test loss every this many iterations (and at stage ends).
  std::size_t test_every = 1;
  std::size_t threads = 1;
  std::size_t chunk = 64;
  bool record_wall_time = false;
  std::filesystem::path checkpoint_dir;
  std::size_t abort_after = 10;

  void validate() const;
  std::size_t max_length() const;
};

struct CurvePoint {
  std::size_t iteration = 0;
  std::size_t stage = 0;
  std::size_t projection_length = 0;
  double train_loss = 0.0;
  double test_loss = 0.0;  // NaN when not evaluated this iteration
  double delta = 0.0;
  bool accepted = false;
  std::size_t cg_iters = 0;
  double wall_ms = 0.0;
};

struct BagRecord {
  std::size_t iteration = 0;
  std::string trajectory;
  std::size_t step = 0;
};

struct TrainResult {
  model::DynNetParams params;
  std::vector<CurvePoint> curve;
  std::vector<BagRecord> bag_history;
  HardSampleBag bag;
  std::vector<model::DynNetParams> stage_params;  // params at the end of each stage
  std::vector<StartPoint> test_starts;
};

using ProgressFn = std::function<void(const CurvePoint&)>;

// Runs the schedule from `init`, carrying params, radius and bag across
// stages. Deterministic in config.seed. Throws TrainingAborted after
// config.abort_after consecutive non-finite batch losses.
TrainResult train(const TrainingConfig& config, const excite::Dataset& ds,
                  const model::DynNetParams& init, const ProgressFn& progress = {});

// Fixed test start points for the test loss.
std::vector<StartPoint> test_start_points(const excite::Dataset& ds, std::size_t count,
                                          std::size_t horizon, std::uint64_t seed);

void write_learning_curve(std::ostream& os, const std::vector<CurvePoint>& curve);
void write_bag_history(std::ostream& os, const std::vector<BagRecord>& history);

}  // namespace dynnet::train
