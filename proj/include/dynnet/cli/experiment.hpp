#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "dynnet/cli/config.hpp"
#include "dynnet/excite/dataset.hpp"

namespace dynnet::cli {

// Corpus, simulation, split and noise exactly as the config describes.
excite::Dataset make_experiment_dataset(const ExperimentConfig& cfg);

// Fresh parameters for the config's hyperparameters and the dataset's stats.
model::DynNetParams initial_params(const ExperimentConfig& cfg, const excite::Dataset& ds);

struct CompareRun {
  std::string optimizer;
  double lr = 0.0;  // 0 for TRCG
  std::vector<train::CurvePoint> curve;
};

// Single-stage runs of compare.iterations at compare.length for TRCG and for
// Adam (and optionally SGD) over the learning-rate grid, all from the same
// initial parameters and seed.
std::vector<CompareRun> compare_optimizers(const ExperimentConfig& cfg,
                                           const excite::Dataset& ds,
                                           const train::ProgressFn& progress = {});

void write_comparison(std::ostream& os, const std::vector<CompareRun>& runs);

}  // namespace dynnet::cli
