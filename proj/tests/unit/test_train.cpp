#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <set>
#include <sstream>

#include "dynnet/errors.hpp"
#include "dynnet/excite/dataset.hpp"
#include "dynnet/model/dynnet.hpp"
#include "dynnet/sim/presets.hpp"
#include "dynnet/train/cg_steihaug.hpp"
#include "dynnet/train/first_order.hpp"
#include "dynnet/train/hardsample.hpp"
#include "dynnet/train/projection_loss.hpp"
#include "dynnet/train/trainer.hpp"
#include "dynnet/train/trust_region.hpp"

using namespace dynnet;
using namespace dynnet::train;

namespace {

using Matrix = std::vector<std::vector<double>>;

HessianVectorFn matrix_hvp(const Matrix& h) {
  return [h](std::span<const double> v, std::span<double> hv) {
    for (std::size_t i = 0; i < h.size(); ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < v.size(); ++j) s += h[i][j] * v[j];
      hv[i] = s;
    }
  };
}

double norm(std::span<const double> x) {
  double s = 0.0;
  for (double v : x) s += v * v;
  return std::sqrt(s);
}

double q_value(const Matrix& h, std::span<const double> g, std::span<const double> p) {
  double q = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    q += g[i] * p[i];
    for (std::size_t j = 0; j < p.size(); ++j) q += 0.5 * p[i] * h[i][j] * p[j];
  }
  return q;
}

// Minimum of Q over a polar grid of the disk of radius delta (2-D only).
double grid_minimum(const Matrix& h, std::span<const double> g, double delta, int n) {
  double best = 0.0;
  for (int i = 1; i <= n; ++i) {
    const double r = delta * i / n;
    for (int j = 0; j < n; ++j) {
      const double t = 2.0 * std::numbers::pi * j / n;
      const std::vector<double> p = {r * std::cos(t), r * std::sin(t)};
      best = std::min(best, q_value(h, g, p));
    }
  }
  return best;
}

Matrix random_symmetric(std::size_t n, std::uint64_t seed, double shift) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> d;
  Matrix a(n, std::vector<double>(n));
  for (auto& row : a)
    for (double& x : row) x = d(rng);
  Matrix h(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      for (std::size_t k = 0; k < n; ++k) h[i][j] += a[k][i] * a[k][j];
      h[i][j] /= static_cast<double>(n);
    }
  for (std::size_t i = 0; i < n; ++i) h[i][i] += shift;
  return h;
}

std::vector<double> random_vector(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> d;
  std::vector<double> v(n);
  for (double& x : v) x = d(rng);
  return v;
}

// f(w) = 1/2 (w - c)^T H (w - c)
class Quadratic final : public TrustRegionObjective {
 public:
  Quadratic(Matrix h, std::vector<double> c) : h_(std::move(h)), c_(std::move(c)) {}
  std::size_t size() const override { return c_.size(); }
  double linearize(std::span<const double> w, std::span<double> grad) override {
    const auto d = diff(w);
    matrix_hvp(h_)(d, grad);
    return value(w);
  }
  void hessian_vector(std::span<const double> v, std::span<double> hv) override {
    matrix_hvp(h_)(v, hv);
  }
  double value(std::span<const double> w) override {
    const std::vector<double> zero(c_.size(), 0.0);
    return q_value(h_, zero, diff(w));
  }
  const std::vector<double>& center() const { return c_; }

 private:
  std::vector<double> diff(std::span<const double> w) const {
    std::vector<double> d(w.size());
    for (std::size_t i = 0; i < w.size(); ++i) d[i] = w[i] - c_[i];
    return d;
  }
  Matrix h_;
  std::vector<double> c_;
};

const excite::Dataset& small_dataset() {
  static const excite::Dataset ds = [] {
    const auto model = sim::preset("nl1_2dof");
    excite::CorpusSpec spec;
    spec.earthquake_like = 3;
    spec.stationary = 1;
    spec.duration = 20.0;
    return excite::build_dataset(model, excite::make_corpus(model, spec), 2, 4, 0.0);
  }();
  return ds;
}

model::DynNetHyper small_hyper() {
  model::DynNetHyper h;
  h.dofs = 2;
  h.embed = 4;
  h.resnet_width = 8;
  h.resnet_repeats = 2;
  return h;
}

TrainingConfig small_config() {
  TrainingConfig c;
  c.batch_size = 16;
  c.schedule = {{3, 4}, {5, 3}};
  c.test_starts = 8;
  c.hardsample_top = 4;
  c.chunk = 8;
  c.seed = 11;
  return c;
}

}  // namespace

TEST_SUITE("cg") {

TEST_CASE("identity Hessian with a small gradient gives the Newton step") {
  const Matrix h = {{1, 0}, {0, 1}};
  const std::vector<double> g = {0.3, -0.4};
  const auto r = cg_steihaug(g, matrix_hvp(h), 1.0, 1e-10, 50);
  CHECK(r.exit == CgExit::Converged);
  CHECK(r.p[0] == doctest::Approx(-0.3));
  CHECK(r.p[1] == doctest::Approx(0.4));
  CHECK(r.iterations == 1);
}

TEST_CASE("identity Hessian with a large gradient stops on the boundary") {
  const Matrix h = {{1, 0}, {0, 1}};
  const std::vector<double> g = {3.0, 4.0};
  const auto r = cg_steihaug(g, matrix_hvp(h), 1.0, 1e-10, 50);
  CHECK(r.exit == CgExit::Boundary);
  CHECK(r.p[0] == doctest::Approx(-0.6));
  CHECK(r.p[1] == doctest::Approx(-0.8));
}

TEST_CASE("negative curvature returns a boundary point that decreases Q") {
  const Matrix h = {{1, 0}, {0, -1}};
  const std::vector<double> g = {1.0, 1.0};
  const auto r = cg_steihaug(g, matrix_hvp(h), 10.0, 1e-10, 50);
  CHECK(r.exit == CgExit::NegativeCurvature);
  CHECK(norm(r.p) == doctest::Approx(10.0));
  const double q = q_value(h, g, r.p);
  CHECK(q < 0.0);
  CHECK(r.model_value == doctest::Approx(q));
  // The returned point is feasible, so it cannot beat the disk minimum.
  const double grid = grid_minimum(h, g, 10.0, 200);
  CHECK(q >= grid - 1e-9);
}

TEST_CASE("small gradient returns zero") {
  const Matrix h = {{1, 0}, {0, 1}};
  const std::vector<double> g = {1e-9, 0.0};
  const auto r = cg_steihaug(g, matrix_hvp(h), 1.0, 1e-6, 50);
  CHECK(r.exit == CgExit::SmallGradient);
  CHECK(norm(r.p) == 0.0);
  CHECK_THROWS_AS(cg_steihaug(g, matrix_hvp(h), 0.0, 1e-6, 50), DomainError);
}

TEST_CASE("iterates decrease Q and move outward; p stays in the region") {
  for (std::uint64_t seed = 1; seed <= 40; ++seed) {
    const std::size_t n = 12;
    const double shift = seed % 2 == 0 ? 0.05 : -0.3;  // definite and indefinite
    const auto h = random_symmetric(n, seed, shift);
    const auto g = random_vector(n, seed + 100);
    const double delta = 0.5 + static_cast<double>(seed % 5);
    const auto r = cg_steihaug(g, matrix_hvp(h), delta, 1e-10, 3);
    const auto full = cg_steihaug(g, matrix_hvp(h), delta, 1e-10, 200);
    for (const auto* res : {&r, &full}) {
      for (std::size_t j = 1; j < res->q_history.size(); ++j) {
        CHECK(res->q_history[j] <= res->q_history[j - 1] + 1e-12);
        CHECK(res->norm_history[j] >= res->norm_history[j - 1] - 1e-12);
      }
      CHECK(norm(res->p) <= delta + 1e-12);
      CHECK(q_value(h, g, res->p) <= 0.0);
      CHECK(q_value(h, g, res->p) == doctest::Approx(res->model_value).epsilon(1e-9));
    }
    if (r.exit == CgExit::MaxIterations) CHECK(r.truncated());
  }
}

TEST_CASE("boundary_step solves the quadratic") {
  const std::vector<double> z = {0.2, -0.1}, d = {1.0, 2.0};
  const double tau = boundary_step(z, d, 3.0);
  CHECK(tau >= 0.0);
  const std::vector<double> p = {z[0] + tau * d[0], z[1] + tau * d[1]};
  CHECK(norm(p) == doctest::Approx(3.0).epsilon(1e-14));
}

}

TEST_SUITE("trust_region") {

TEST_CASE("a positive-definite quadratic is solved in one accepted step") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    Quadratic f(random_symmetric(8, seed, 0.5), random_vector(8, seed + 7));
    std::vector<double> w(8, 0.0);
    TrustRegionConfig cfg;
    cfg.delta_max = 1e6;
    cfg.cg_rel_tol = 1e-14;
    const auto step = trcg_iterate(f, w, 1e6, cfg);
    CHECK(step.accepted);
    for (std::size_t i = 0; i < 8; ++i) CHECK(std::abs(w[i] - f.center()[i]) < 1e-8);
    CHECK(step.rho == doctest::Approx(1.0).epsilon(1e-6));
  }
}

TEST_CASE("radius update rules") {
  // Identity quadratic: rho == 1 exactly, so boundary steps grow the radius.
  Quadratic f({{1, 0}, {0, 1}}, {100.0, 0.0});
  std::vector<double> w = {0.0, 0.0};
  TrustRegionConfig cfg;
  cfg.delta_max = 3.0;
  auto s = trcg_iterate(f, w, 1.0, cfg);
  CHECK(s.accepted);
  CHECK(s.delta == 2.0);
  s = trcg_iterate(f, w, s.delta, cfg);
  CHECK(s.delta == 3.0);  // capped at delta_max
  CHECK(w[0] == doctest::Approx(3.0));
  CHECK(cg_tolerance(4.0, cfg) == doctest::Approx(2.0));
  CHECK(cg_tolerance(0.01, cfg) == doctest::Approx(0.001));
}

TEST_CASE("a step that the model mispredicts is rejected and shrinks the radius") {
  // value() disagrees with the quadratic model, so rho < 0.
  class Liar final : public TrustRegionObjective {
   public:
    std::size_t size() const override { return 1; }
    double linearize(std::span<const double> w, std::span<double> g) override {
      g[0] = 1.0;
      return value(w);
    }
    void hessian_vector(std::span<const double> v, std::span<double> hv) override {
      hv[0] = v[0];
    }
    double value(std::span<const double> w) override { return w[0] * w[0]; }
  } f;
  std::vector<double> w = {0.0};
  const auto s = trcg_iterate(f, w, 1.0, {});
  CHECK_FALSE(s.accepted);
  CHECK(w[0] == 0.0);
  CHECK(s.delta == 0.25);
}

TEST_CASE("accepted steps never increase the batch loss") {
  const auto& ds = small_dataset();
  const auto hyper = small_hyper();
  auto params = model::init_params(hyper, 3, &ds.stats);
  const auto eligible = eligible_starts(ds, ds.train_indices(), 5);
  Rng rng(5);
  HardSampleBag bag;
  double delta = 1.0;
  int accepted = 0;
  for (int it = 0; it < 8; ++it) {
    ProjectionObjective f(hyper, ds, sample_batch(eligible, bag, 0.0, 16, rng), 5, {8, 1});
    const auto s = trcg_iterate(f, params.values.values(), delta, {});
    if (s.accepted) {
      ++accepted;
      CHECK(s.trial_loss <= s.loss);
      CHECK(f.value(params.values.values()) == doctest::Approx(s.trial_loss).epsilon(1e-12));
    }
    delta = s.delta;
  }
  CHECK(accepted > 0);
}

}

TEST_SUITE("first_order") {

TEST_CASE("sgd and adam updates") {
  std::vector<double> w = {1.0, -2.0};
  const std::vector<double> g = {0.5, -1.0};
  sgd_step(w, g, 0.1);
  CHECK(w[0] == doctest::Approx(0.95));
  CHECK(w[1] == doctest::Approx(-1.9));

  std::vector<double> x = {1.0, -2.0};
  AdamState st;
  adam_step(x, g, st, 0.01);
  // First bias-corrected step moves each coordinate by lr * sign(g).
  CHECK(x[0] == doctest::Approx(0.99).epsilon(1e-6));
  CHECK(x[1] == doctest::Approx(-1.99).epsilon(1e-6));
  CHECK(st.t == 1);
}

}

TEST_SUITE("hardsample") {

TEST_CASE("bag draw counts follow floor arithmetic") {
  CHECK(bag_draws(0.0, 1024) == 0);
  CHECK(bag_draws(0.5, 1024) == 512);
  CHECK(bag_draws(0.5, 7) == 3);
}

TEST_CASE("sample_batch takes exactly floor(r b) points from the bag") {
  std::vector<StartPoint> eligible;
  for (std::size_t k = 0; k < 100; ++k) eligible.push_back({0, k});
  HardSampleBag bag(16);
  for (std::size_t k = 0; k < 5; ++k) bag.push({99, k});
  auto from_bag = [](const std::vector<StartPoint>& b) {
    return std::count_if(b.begin(), b.end(), [](auto s) { return s.traj == 99; });
  };
  Rng rng(1);
  CHECK(from_bag(sample_batch(eligible, bag, 0.5, 1024, rng)) == 512);
  CHECK(from_bag(sample_batch(eligible, bag, 0.5, 7, rng)) == 3);
  CHECK(from_bag(sample_batch(eligible, bag, 0.0, 64, rng)) == 0);
  const HardSampleBag empty;
  const auto b = sample_batch(eligible, empty, 0.5, 64, rng);
  CHECK(b.size() == 64);
  CHECK(from_bag(b) == 0);
  CHECK_THROWS_AS(sample_batch(eligible, bag, 1.0, 8, rng), DomainError);
  CHECK_THROWS_AS(sample_batch(eligible, bag, 0.5, 0, rng), DomainError);
}

TEST_CASE("bag never exceeds its capacity and evicts the oldest") {
  HardSampleBag bag(4);
  for (std::size_t k = 0; k < 10; ++k) {
    bag.push({0, k});
    CHECK(bag.size() <= 4);
  }
  CHECK(bag[0] == StartPoint{0, 6});
  CHECK(bag[3] == StartPoint{0, 9});
}

TEST_CASE("update_hardsamples adds the highest-loss starts") {
  HardSampleBag bag(3);
  const std::vector<StartPoint> starts = {{0, 0}, {0, 1}, {0, 2}, {0, 3}, {0, 4}};
  const std::vector<double> losses = {0.1, 5.0, std::nan(""), 5.0, 0.2};
  const auto added = update_hardsamples(bag, starts, losses, 3);
  REQUIRE(added.size() == 3);
  CHECK(added[0] == StartPoint{0, 2});
  CHECK(added[1] == StartPoint{0, 1});
  CHECK(added[2] == StartPoint{0, 3});
  update_hardsamples(bag, starts, losses, 2);
  CHECK(bag.size() == 3);
}

TEST_CASE("eligible starts leave the horizon inside the trajectory") {
  const auto& ds = small_dataset();
  const auto train = ds.train_indices();
  const auto el = eligible_starts(ds, train, 50);
  std::size_t expect = 0;
  for (auto e : train) expect += ds.entries[e].steps() - 50;
  CHECK(el.size() == expect);
  for (const auto& s : el) CHECK(s.step + 50 < ds.entries[s.traj].steps());
}

}

TEST_SUITE("projection_loss") {

TEST_CASE("a dataset generated by the model itself has zero loss") {
  const auto hyper = small_hyper();
  const auto& base = small_dataset();
  auto params = model::init_params(hyper, 8, &base.stats);
  for (double& w : params.values.block_values("kin.w")) w *= 1e-3;
  const std::size_t steps = 40;
  excite::Dataset ds;
  ds.stats = base.stats;
  ds.dt = base.dt;
  excite::DatasetEntry e;
  e.train = true;
  e.clean.dt = base.dt;
  e.clean.states.assign(steps, sim::DynState::zero(2));
  e.xg.assign(steps, 0.0);
  for (std::size_t k = 0; k < steps; ++k) e.xg[k] = 0.3 * std::sin(0.7 * static_cast<double>(k));
  std::vector<double> x = {0.1, -0.2, 0.3, 0.0, -0.1, 0.2, 0.05, -0.05};
  for (std::size_t k = 0; k < steps; ++k) {
    if (k > 0) x = model::cell_step(params, x, e.xg[k]);
    e.inputs.insert(e.inputs.end(), x.begin(), x.end());
  }
  e.targets = e.inputs;
  ds.entries.push_back(e);
  std::vector<StartPoint> starts;
  for (std::size_t k = 0; k + 10 < steps; k += 3) starts.push_back({0, k});
  const auto r = projection_loss(params, ds, starts, 10, {4, 1});
  CHECK(r.loss < 1e-20);
  CHECK(r.diverged == 0);
}

TEST_CASE("length one reduces to the one-step mean squared error") {
  const auto& ds = small_dataset();
  const auto params = model::init_params(small_hyper(), 2, &ds.stats);
  const std::vector<StartPoint> starts = {{ds.train_indices()[0], 10},
                                          {ds.train_indices()[1], 200},
                                          {ds.test_indices()[0], 55}};
  const auto r = projection_loss(params, ds, starts, 1, {2, 1});
  double total = 0.0;
  for (std::size_t i = 0; i < starts.size(); ++i) {
    const auto& e = ds.entries[starts[i].traj];
    const std::size_t k = starts[i].step;
    const std::vector<double> x(e.inputs.begin() + 8 * k, e.inputs.begin() + 8 * (k + 1));
    const auto y = model::cell_step(params, x, e.xg[k + 1]);
    double se = 0.0;
    for (std::size_t c = 0; c < 8; ++c) {
      const double d = y[c] - e.targets[8 * (k + 1) + c];
      se += d * d;
    }
    CHECK(r.per_start[i] == doctest::Approx(se / 8.0).epsilon(1e-10));
    total += se / 8.0;
  }
  CHECK(r.loss == doctest::Approx(total / 3.0).epsilon(1e-10));
}

TEST_CASE("chunking and threads do not change the loss") {
  const auto& ds = small_dataset();
  const auto params = model::init_params(small_hyper(), 2, &ds.stats);
  const auto el = eligible_starts(ds, ds.train_indices(), 10);
  Rng rng(3);
  const auto starts = sample_batch(el, HardSampleBag{}, 0.0, 37, rng);
  const auto a = projection_loss(params, ds, starts, 10, {64, 1});
  const auto b = projection_loss(params, ds, starts, 10, {5, 3});
  CHECK(a.loss == doctest::Approx(b.loss).epsilon(1e-13));
  CHECK(a.per_start == b.per_start);
}

TEST_CASE("starts without enough remaining steps are rejected") {
  const auto& ds = small_dataset();
  const auto params = model::init_params(small_hyper(), 2, &ds.stats);
  const std::vector<StartPoint> bad = {{0, ds.entries[0].steps() - 3}};
  CHECK_THROWS_AS(projection_loss(params, ds, bad, 5), DomainError);
}

}

TEST_SUITE("untrained_loss") {

TEST_CASE("untrained model on NL type 1 data has loss near the target variance") {
  const auto model = sim::preset("nl1");
  excite::CorpusSpec spec;
  spec.earthquake_like = 6;
  spec.stationary = 3;
  const auto ds = excite::build_dataset(model, excite::make_corpus(model, spec), 6, 1, 0.0);
  model::DynNetHyper h;
  h.dofs = 4;
  h.embed = 8;
  const auto params = model::init_params(h, 1, &ds.stats);
  const auto el = eligible_starts(ds, ds.train_indices(), 10);
  Rng rng(1);
  const auto starts = sample_batch(el, HardSampleBag{}, 0.0, 256, rng);
  const auto r = projection_loss(params, ds, starts, 10);
  MESSAGE("untrained projection loss (L = 10): " << r.loss);
  CHECK(std::abs(r.loss - 1.0) <= 0.10);
}

}

TEST_SUITE("trainer") {

TEST_CASE("training is deterministic in the seed") {
  const auto& ds = small_dataset();
  const auto init = model::init_params(small_hyper(), 1, &ds.stats);
  const auto cfg = small_config();
  const auto a = train::train(cfg, ds, init);
  const auto b = train::train(cfg, ds, init);
  CHECK(a.params.values == b.params.values);
  std::ostringstream ca, cb;
  write_learning_curve(ca, a.curve);
  write_learning_curve(cb, b.curve);
  CHECK(ca.str() == cb.str());
  CHECK(a.curve.size() == 7);
  CHECK(a.stage_params.size() == 2);
}

TEST_CASE("a stage switch carries the parameters over unchanged") {
  const auto& ds = small_dataset();
  const auto init = model::init_params(small_hyper(), 1, &ds.stats);
  auto cfg = small_config();
  cfg.eval_length = 5;
  const auto both = train::train(cfg, ds, init);
  auto first = cfg;
  first.schedule = {cfg.schedule[0]};
  const auto one = train::train(first, ds, init);
  CHECK(both.stage_params[0].values == one.params.values);
  for (std::size_t i = 0; i < one.curve.size(); ++i) {
    CHECK(both.curve[i].train_loss == one.curve[i].train_loss);
  }
  CHECK(both.curve[4].projection_length == 5);
  CHECK(both.curve[3].projection_length == 3);
}

TEST_CASE("bag and curve bookkeeping") {
  const auto& ds = small_dataset();
  const auto init = model::init_params(small_hyper(), 1, &ds.stats);
  const auto r = train::train(small_config(), ds, init);
  CHECK(r.bag.size() <= small_config().bag_capacity);
  CHECK(r.bag_history.size() == r.bag.size());
  for (const auto& p : r.curve) CHECK(std::isfinite(p.test_loss));
  for (std::size_t i = 0; i < r.bag.size(); ++i) {
    CHECK(r.bag[i].step + 5 < ds.entries[r.bag[i].traj].steps());
    CHECK(ds.entries[r.bag[i].traj].train);
  }
}

TEST_CASE("first-order optimizers run through the same loop") {
  const auto& ds = small_dataset();
  const auto init = model::init_params(small_hyper(), 1, &ds.stats);
  for (auto opt : {Optimizer::Adam, Optimizer::SGD}) {
    auto cfg = small_config();
    cfg.optimizer = opt;
    cfg.lr = 1e-4;
    const auto r = train::train(cfg, ds, init);
    CHECK(r.curve.size() == 7);
    CHECK(r.params.values != init.values);
  }
  CHECK(parse_optimizer("adam") == Optimizer::Adam);
  CHECK_THROWS_AS(parse_optimizer("lbfgs"), DomainError);
}

TEST_CASE("invalid configurations are rejected") {
  auto cfg = small_config();
  cfg.batch_size = 0;
  CHECK_THROWS_AS(cfg.validate(), DomainError);
  cfg = small_config();
  cfg.hardsample_rate = 1.0;
  CHECK_THROWS_AS(cfg.validate(), DomainError);
  cfg = small_config();
  cfg.schedule = {{1, 10}};
  CHECK_THROWS_AS(cfg.validate(), DomainError);
}

}
