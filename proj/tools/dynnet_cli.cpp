#include <CLI11.hpp>
#include <fmt/format.h>

#include <filesystem>
#include <fstream>
#include <optional>

#include "dynnet/cli/config.hpp"
#include "dynnet/cli/experiment.hpp"
#include "dynnet/errors.hpp"
#include "dynnet/eval/report.hpp"
#include "dynnet/excite/ground_motion.hpp"
#include "dynnet/sim/trajectory_io.hpp"

namespace fs = std::filesystem;
using namespace dynnet;

namespace {

struct CommonFlags {
  std::string config;
  std::string preset;
  std::optional<std::uint64_t> seed;
  std::optional<double> noise;
  std::string out;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--config", f.config, "Experiment config file (INI)")->check(CLI::ExistingFile);
  cmd->add_option("--preset", f.preset, "Structure preset (nl1, nl2, nl1_2dof)");
  cmd->add_option("--seed", f.seed, "Experiment seed");
  cmd->add_option("--noise", f.noise, "Measurement noise level, e.g. 0, 0.05, 0.10");
  cmd->add_option("--out", f.out, "Output directory");
}

// Thrown for problems with the command line or config contents.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

cli::ExperimentConfig resolve(const CommonFlags& f) {
  try {
    auto cfg = f.config.empty() ? cli::default_config(f.preset.empty() ? "nl1" : f.preset)
                                : cli::load_config(f.config);
    if (!f.preset.empty() && !f.config.empty() && f.preset != cfg.preset) {
      auto base = cli::default_config(f.preset);
      cfg.preset = f.preset;
      cfg.hyper.dofs = base.hyper.dofs;
      cfg.hyper.embed = std::max(cfg.hyper.embed, base.hyper.dofs);
    }
    if (f.seed) cfg.apply_seed(*f.seed);
    if (f.noise) cfg.noise = *f.noise;
    if (!f.out.empty()) cfg.out = f.out;
    cfg.validate();
    return cfg;
  } catch (const DomainError& e) {
    throw UsageError(e.what());
  }
}

void log(const std::string& msg) { fmt::print(stderr, "{}\n", msg); }

void save_config_copy(const cli::ExperimentConfig& cfg) {
  fs::create_directories(cfg.out);
  std::ofstream(cfg.out / "config.ini") << cli::format_config(cfg);
}

void write_file(const fs::path& path, const std::function<void(std::ostream&)>& body) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  body(os);
}

int cmd_simulate(const CommonFlags& f, const std::string& gm_path, std::optional<double> dt) {
  auto cfg = resolve(f);
  const auto model = cfg.structure();
  std::vector<excite::GroundMotion> motions;
  if (!gm_path.empty()) {
    auto gm = excite::load_ground_motion_csv(gm_path);
    if (dt) gm.dt = *dt;
    motions.push_back(std::move(gm));
  } else {
    if (dt) cfg.corpus.dt = *dt;
    motions = excite::make_corpus(model, cfg.corpus);
  }
  const fs::path dir = cfg.out / "trajectories";
  fs::create_directories(dir);
  for (const auto& gm : motions) {
    const auto traj = excite::simulate(model, gm, sim::DynState::zero(model.dofs()));
    sim::save_trajectory(dir / (gm.id + ".dynt"), traj);
    sim::save_trajectory_csv(dir / (gm.id + ".csv"), traj);
    log(fmt::format("simulated {} ({} steps, peak {:.4g})", gm.id, traj.steps(), gm.peak()));
  }
  return 0;
}

int cmd_make_dataset(const CommonFlags& f) {
  const auto cfg = resolve(f);
  save_config_copy(cfg);
  const auto ds = cli::make_experiment_dataset(cfg);
  fs::create_directories(cfg.out / "motions");
  fs::create_directories(cfg.out / "trajectories");
  for (const auto& e : ds.entries) {
    excite::save_ground_motion_csv(cfg.out / "motions" / (e.gm.id + ".csv"), e.gm);
    sim::save_trajectory(cfg.out / "trajectories" / (e.gm.id + ".dynt"), e.clean);
    sim::save_trajectory(cfg.out / "trajectories" / (e.gm.id + "_noisy.dynt"), e.noisy);
  }
  excite::save_manifest(cfg.out / "manifest.ini", ds);
  log(fmt::format("dataset: {} motions, {} train, noise {:g}, written to {}", ds.entries.size(),
                  ds.train_indices().size(), ds.noise_level, cfg.out.string()));
  return 0;
}

int cmd_train(const CommonFlags& f) {
  auto cfg = resolve(f);
  save_config_copy(cfg);
  const auto ds = cli::make_experiment_dataset(cfg);
  excite::save_manifest(cfg.out / "manifest.ini", ds);
  cfg.training.checkpoint_dir = cfg.out / "checkpoints";
  const auto init = cli::initial_params(cfg, ds);
  log(fmt::format("training {} parameters with {} on {} ({} train signals)",
                  model::count_parameters(init), train::optimizer_name(cfg.training.optimizer),
                  cfg.preset, ds.train_indices().size()));
  const auto res = train::train(cfg.training, ds, init, [](const train::CurvePoint& p) {
    if (p.iteration % 50 == 0) {
      log(fmt::format("iter {:5d} stage {} L={:3d} train {:.5g} test {:.5g} delta {:.3g}",
                      p.iteration, p.stage + 1, p.projection_length, p.train_loss, p.test_loss,
                      p.delta));
    }
  });
  model::save_checkpoint((cfg.out / "model.dynp").string(), res.params);
  write_file(cfg.out / "learning_curve.csv",
             [&](std::ostream& os) { train::write_learning_curve(os, res.curve); });
  write_file(cfg.out / "bag_history.csv",
             [&](std::ostream& os) { train::write_bag_history(os, res.bag_history); });
  log("wrote " + (cfg.out / "model.dynp").string());
  return 0;
}

int cmd_evaluate(const CommonFlags& f, const std::string& checkpoint) {
  const auto cfg = resolve(f);
  if (checkpoint.empty()) throw UsageError("evaluate requires --checkpoint");
  const auto params = model::load_checkpoint(checkpoint);
  if (params.hyper.dofs != cfg.hyper.dofs) {
    throw UsageError("checkpoint DOF count does not match the configured structure");
  }
  const auto ds = cli::make_experiment_dataset(cfg);
  const auto report = eval::evaluate(params, cfg.structure(), ds, cfg.preset, cfg.evaluation);
  const auto files = eval::write_report(cfg.out / "eval", report);
  log(eval::summary_text(report));
  log(fmt::format("wrote {} files to {}", files.size(), (cfg.out / "eval").string()));
  return 0;
}

int cmd_compare(const CommonFlags& f) {
  const auto cfg = resolve(f);
  save_config_copy(cfg);
  const auto ds = cli::make_experiment_dataset(cfg);
  const auto runs = cli::compare_optimizers(cfg, ds);
  write_file(cfg.out / "compare_optimizers.csv",
             [&](std::ostream& os) { cli::write_comparison(os, runs); });
  for (const auto& r : runs) {
    log(fmt::format("{} lr={:g}: final train loss {:.5g}", r.optimizer, r.lr,
                    r.curve.back().train_loss));
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"DynNet: nonlinear structural dynamics simulator and learned rollout model"};
  app.require_subcommand(1);

  CommonFlags sim_f, ds_f, train_f, eval_f, cmp_f;
  std::string gm_path, checkpoint;
  std::optional<double> dt;

  auto* sim = app.add_subcommand("simulate", "Simulate ground-truth trajectories");
  add_common(sim, sim_f);
  sim->add_option("--gm", gm_path, "Ground motion CSV (time,accel)")->check(CLI::ExistingFile);
  sim->add_option("--dt", dt, "Time step override (s)")->check(CLI::PositiveNumber);

  auto* mk = app.add_subcommand("make-dataset", "Build the corpus, split and noisy measurements");
  add_common(mk, ds_f);

  auto* tr = app.add_subcommand("train", "Train DynNet with the configured schedule");
  add_common(tr, train_f);

  auto* ev = app.add_subcommand("evaluate", "Evaluate a checkpoint on the test split");
  add_common(ev, eval_f);
  ev->add_option("--checkpoint", checkpoint, "Checkpoint written by train")
      ->required()
      ->check(CLI::ExistingFile);

  auto* cmp = app.add_subcommand("compare-optimizers", "Loss curves for TRCG, Adam and SGD");
  add_common(cmp, cmp_f);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*sim) return cmd_simulate(sim_f, gm_path, dt);
    if (*mk) return cmd_make_dataset(ds_f);
    if (*tr) return cmd_train(train_f);
    if (*ev) return cmd_evaluate(eval_f, checkpoint);
    if (*cmp) return cmd_compare(cmp_f);
  } catch (const UsageError& e) {
    log(std::string("error: ") + e.what());
    return 1;
  } catch (const std::exception& e) {
    log(std::string("error: ") + e.what());
    return 2;
  }
  return 1;
}
