#include "dynnet/cli/experiment.hpp"

#include <fmt/format.h>

#include <ostream>

namespace dynnet::cli {

excite::Dataset make_experiment_dataset(const ExperimentConfig& cfg) {
  const auto model = cfg.structure();
  auto motions = excite::make_corpus(model, cfg.corpus);
  if (cfg.corpus.test_duration <= 0.0) {
    return excite::build_dataset(model, motions, cfg.n_train, cfg.seed, cfg.noise);
  }
  // Same generator seeds at the longer duration; only test entries use them.
  auto long_spec = cfg.corpus;
  long_spec.duration = cfg.corpus.test_duration;
  auto long_motions = excite::make_corpus(model, long_spec);
  const auto split = excite::random_split(motions.size(), cfg.n_train, cfg.seed);
  for (std::size_t i = 0; i < motions.size(); ++i) {
    if (!split[i]) motions[i] = std::move(long_motions[i]);
  }
  return excite::build_dataset(model, motions, split, cfg.seed, cfg.noise);
}

model::DynNetParams initial_params(const ExperimentConfig& cfg, const excite::Dataset& ds) {
  return model::init_params(cfg.hyper, cfg.seed, &ds.stats);
}

std::vector<CompareRun> compare_optimizers(const ExperimentConfig& cfg,
                                           const excite::Dataset& ds,
                                           const train::ProgressFn& progress) {
  const auto init = initial_params(cfg, ds);
  auto tc = cfg.training;
  tc.schedule = {{cfg.compare.length, cfg.compare.iterations}};
  tc.eval_length = cfg.compare.length;
  tc.checkpoint_dir.clear();

  std::vector<CompareRun> runs;
  auto run = [&](train::Optimizer opt, double lr) {
    tc.optimizer = opt;
    tc.lr = lr > 0.0 ? lr : tc.lr;
    auto res = train::train(tc, ds, init, progress);
    runs.push_back({train::optimizer_name(opt), lr, std::move(res.curve)});
  };
  run(train::Optimizer::TRCG, 0.0);
  for (double lr : cfg.compare.learning_rates) run(train::Optimizer::Adam, lr);
  if (cfg.compare.include_sgd) {
    for (double lr : cfg.compare.learning_rates) run(train::Optimizer::SGD, lr);
  }
  return runs;
}

void write_comparison(std::ostream& os, const std::vector<CompareRun>& runs) {
  os << "optimizer,lr,iteration,train_loss,test_loss,accepted,cg_iters\n";
  for (const auto& r : runs) {
    for (const auto& p : r.curve) {
      os << fmt::format("{},{:g},{},{:.17g},{:.17g},{},{}\n", r.optimizer, r.lr, p.iteration,
                        p.train_loss, p.test_loss, p.accepted ? 1 : 0, p.cg_iters);
    }
  }
}

}  // namespace dynnet::cli
