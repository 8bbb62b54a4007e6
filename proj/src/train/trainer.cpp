#include "dynnet/train/trainer.hpp"

#include <chrono>
#include <cmath>
#include <fmt/format.h>
#include <limits>
#include <ostream>

#include "dynnet/errors.hpp"
#include "dynnet/train/first_order.hpp"
#include "dynnet/train/projection_loss.hpp"

namespace dynnet::train {

Optimizer parse_optimizer(const std::string& name) {
  if (name == "trcg" || name == "TRCG") return Optimizer::TRCG;
  if (name == "adam" || name == "Adam") return Optimizer::Adam;
  if (name == "sgd" || name == "SGD") return Optimizer::SGD;
  throw DomainError("unknown optimizer '" + name + "' (expected trcg, adam or sgd)");
}

std::string optimizer_name(Optimizer o) {
  switch (o) {
    case Optimizer::TRCG: return "trcg";
    case Optimizer::Adam: return "adam";
    case Optimizer::SGD: return "sgd";
  }
  return "?";
}

void TrainingConfig::validate() const {
  if (batch_size < 1) throw DomainError("TrainingConfig: batch_size must be >= 1");
  if (schedule.empty()) throw DomainError("TrainingConfig: empty schedule");
  for (const auto& s : schedule) {
    if (s.length < 2) throw DomainError("TrainingConfig: projection lengths must be >= 2");
  }
  if (!(hardsample_rate >= 0.0 && hardsample_rate < 1.0)) {
    throw DomainError("TrainingConfig: hardsample rate must lie in [0, 1)");
  }
  if (bag_capacity < 1) throw DomainError("TrainingConfig: bag capacity must be >= 1");
  if (!(delta0 > 0.0) || !(delta_max >= delta0)) {
    throw DomainError("TrainingConfig: need 0 < delta0 <= delta_max");
  }
  if (!(lr > 0.0)) throw DomainError("TrainingConfig: lr must be > 0");
  if (chunk < 1 || test_every < 1) throw DomainError("TrainingConfig: chunk and test_every must be >= 1");
}

std::size_t TrainingConfig::max_length() const {
  std::size_t m = eval_length;
  for (const auto& s : schedule) m = std::max(m, s.length);
  return m;
}

std::vector<StartPoint> test_start_points(const excite::Dataset& ds, std::size_t count,
                                          std::size_t horizon, std::uint64_t seed) {
  const auto test = ds.test_indices();
  const auto eligible = eligible_starts(ds, test, horizon);
  if (eligible.empty() || count == 0) return {};
  Rng rng(seed ^ 0x7e57u);
  std::uniform_int_distribution<std::size_t> pick(0, eligible.size() - 1);
  std::vector<StartPoint> out(count);
  for (auto& s : out) s = eligible[pick(rng)];
  return out;
}

TrainResult train(const TrainingConfig& cfg, const excite::Dataset& ds,
                  const model::DynNetParams& init, const ProgressFn& progress) {
  cfg.validate();
  const std::size_t horizon = cfg.max_length();
  const std::size_t eval_length =
      cfg.eval_length > 0 ? cfg.eval_length : cfg.schedule.back().length;
  const auto train_idx = ds.train_indices();
  const auto eligible = eligible_starts(ds, train_idx, horizon);
  if (eligible.empty()) throw DomainError("train: no eligible training start points");

  TrainResult res{init, {}, {}, HardSampleBag(cfg.bag_capacity), {}, {}};
  res.test_starts = test_start_points(ds, cfg.test_starts, eval_length, cfg.seed);
  auto w = res.params.values.values();

  ProjectionOptions popts{cfg.chunk, cfg.threads, kLossCap};
  TrustRegionConfig tr{cfg.delta_max, cfg.eta, cfg.cg_max_iter, cfg.cg_rel_tol};
  AdamState adam;
  double delta = cfg.delta0;
  Rng rng(cfg.seed);
  std::size_t iteration = 0, bad = 0;
  std::vector<double> grad(w.size());

  auto test_loss = [&] {
    if (res.test_starts.empty()) return std::numeric_limits<double>::quiet_NaN();
    return projection_loss(res.params, ds, res.test_starts, eval_length, popts).loss;
  };

  for (std::size_t si = 0; si < cfg.schedule.size(); ++si) {
    const auto& stage = cfg.schedule[si];
    for (std::size_t it = 0; it < stage.iterations; ++it, ++iteration) {
      const auto t0 = std::chrono::steady_clock::now();
      auto batch = sample_batch(eligible, res.bag, cfg.hardsample_rate, cfg.batch_size, rng);
      ProjectionObjective obj(res.params.hyper, ds, std::move(batch), stage.length, popts);

      CurvePoint pt;
      pt.iteration = iteration;
      pt.stage = si;
      pt.projection_length = stage.length;
      if (cfg.optimizer == Optimizer::TRCG) {
        const auto step = trcg_iterate(obj, w, delta, tr);
        delta = step.delta;
        pt.train_loss = step.loss;
        pt.accepted = step.accepted;
        pt.cg_iters = step.cg_iterations;
      } else {
        pt.train_loss = obj.linearize(w, grad);
        bool finite = std::isfinite(pt.train_loss);
        for (double g : grad) finite = finite && std::isfinite(g);
        if (finite) {
          if (cfg.optimizer == Optimizer::Adam) {
            adam_step(w, grad, adam, cfg.lr);
          } else {
            sgd_step(w, grad, cfg.lr);
          }
          pt.accepted = true;
        }
      }
      pt.delta = delta;

      if (std::isfinite(pt.train_loss)) {
        bad = 0;
        for (const auto& s :
             update_hardsamples(res.bag, obj.starts(), obj.per_start_losses(), cfg.hardsample_top)) {
          res.bag_history.push_back({iteration, ds.entries[s.traj].gm.id, s.step});
        }
      } else if (++bad >= cfg.abort_after) {
        throw TrainingAborted(fmt::format(
            "training aborted: {} consecutive non-finite losses (stage {}, iteration {}, "
            "projection length {}, delta {:g})",
            bad, si, iteration, stage.length, delta));
      }

      const bool last = it + 1 == stage.iterations;
      pt.test_loss = (it % cfg.test_every == 0 || last)
                         ? test_loss()
                         : std::numeric_limits<double>::quiet_NaN();
      if (cfg.record_wall_time) {
        pt.wall_ms = std::chrono::duration<double, std::milli>(
                         std::chrono::steady_clock::now() - t0)
                         .count();
      }
      res.curve.push_back(pt);
      if (progress) progress(pt);
    }
    res.stage_params.push_back(res.params);
    if (!cfg.checkpoint_dir.empty()) {
      std::filesystem::create_directories(cfg.checkpoint_dir);
      model::save_checkpoint((cfg.checkpoint_dir / fmt::format("stage{}.dynp", si + 1)).string(),
                             res.params);
    }
  }
  return res;
}

void write_learning_curve(std::ostream& os, const std::vector<CurvePoint>& curve) {
  os << "iteration,stage,projection_length,train_loss,test_loss,delta,accepted,cg_iters,"
        "wall_ms\n";
  for (const auto& p : curve) {
    os << fmt::format("{},{},{},{:.17g},{:.17g},{:.17g},{},{},{:.3f}\n", p.iteration,
                      p.stage + 1, p.projection_length, p.train_loss, p.test_loss, p.delta,
                      p.accepted ? 1 : 0, p.cg_iters, p.wall_ms);
  }
}

void write_bag_history(std::ostream& os, const std::vector<BagRecord>& history) {
  os << "iteration,trajectory,step\n";
  for (const auto& r : history) os << r.iteration << ',' << r.trajectory << ',' << r.step << '\n';
}

}  // namespace dynnet::train
