#pragma once

// Experiment configuration: a sectioned key-value text file. Every key has an
// embedded default, so a preset name alone describes a complete run.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "dynnet/eval/report.hpp"
#include "dynnet/excite/ground_motion.hpp"
#include "dynnet/model/dynnet.hpp"
#include "dynnet/sim/structure.hpp"
#include "dynnet/train/trainer.hpp"

namespace dynnet::cli {

struct CompareConfig {
  std::size_t iterations = 500;
  std::size_t length = 10;
  std::vector<double> learning_rates{1e-2, 1e-3, 1e-4};
  bool include_sgd = true;
};

struct ExperimentConfig {
  std::string preset = "nl1";
  double zeta = 0.02;
  excite::CorpusSpec corpus;
  std::size_t n_train = 8;
  double noise = 0.0;
  model::DynNetHyper hyper;
  train::TrainingConfig training;
  eval::EvalOptions evaluation;
  CompareConfig compare;
  std::filesystem::path out = "out";
  std::uint64_t seed = 1;

  // Propagates the experiment seed and dt into the corpus/training/model.
  void apply_seed(std::uint64_t s);
  void validate() const;
  sim::StructureModel structure() const;
};

// Parses INI text; unknown sections or keys are errors.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::filesystem::path& path);
// Defaults for a preset (nl1, nl2, nl1_2dof).
ExperimentConfig default_config(const std::string& preset = "nl1");
std::string format_config(const ExperimentConfig& cfg);

}  // namespace dynnet::cli
