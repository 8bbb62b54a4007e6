#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "dynnet/ad/param_vector.hpp"
#include "dynnet/ad/tape.hpp"
#include "dynnet/errors.hpp"

using namespace dynnet;
using namespace dynnet::ad;

namespace {

constexpr double kSlope = 0.01;

struct Mlp {
  ParamVector p;
  std::vector<AffineRef> layers;
  std::vector<double> x, target;
};

// A three-layer leaky-ReLU net with random weights, input and target.
Mlp random_mlp(std::uint64_t seed, std::size_t in = 5, std::size_t hidden = 7,
               std::size_t out = 3) {
  Mlp m;
  const std::size_t sizes[] = {in, hidden, hidden, out};
  for (int l = 0; l < 3; ++l) {
    AffineRef a;
    a.out = sizes[l + 1];
    a.in = sizes[l];
    a.w_offset = m.p.add_block("W" + std::to_string(l), a.out, a.in);
    a.b_offset = m.p.add_block("b" + std::to_string(l), a.out);
    m.layers.push_back(a);
  }
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, 0.7);
  for (double& v : m.p.values()) v = n(rng);
  m.x.resize(in);
  m.target.resize(out);
  for (double& v : m.x) v = n(rng);
  for (double& v : m.target) v = n(rng);
  return m;
}

void record_mlp(Tape& t, const Mlp& m, std::vector<Node>* pre = nullptr) {
  Node h = t.input(m.x, m.x.size());
  for (std::size_t l = 0; l < m.layers.size(); ++l) {
    h = t.affine(m.layers[l], h);
    if (l + 1 < m.layers.size()) {
      if (pre) pre->push_back(h);
      h = t.leaky_relu(h, kSlope);
    }
  }
  t.squared_error(h, m.target, 0.5);
}

double eval_loss(const Mlp& m, std::span<const double> w) {
  Tape t(w, 1);
  record_mlp(t, m);
  return t.loss();
}

// All pre-activations away from the kink so central differences are smooth.
bool away_from_kink(const Mlp& m) {
  Tape t(m.p.values(), 1);
  std::vector<Node> pre;
  record_mlp(t, m, &pre);
  for (auto n : pre) {
    for (double v : t.value(n)) {
      if (std::abs(v) <= 1e-3) return false;
    }
  }
  return true;
}

std::vector<double> fd_gradient(const Mlp& m, double h) {
  std::vector<double> w(m.p.values().begin(), m.p.values().end()), g(w.size());
  for (std::size_t i = 0; i < w.size(); ++i) {
    const double w0 = w[i];
    w[i] = w0 + h;
    const double fp = eval_loss(m, w);
    w[i] = w0 - h;
    const double fm = eval_loss(m, w);
    w[i] = w0;
    g[i] = (fp - fm) / (2.0 * h);
  }
  return g;
}

ScalarFunction mlp_function(const Mlp& m) {
  return [&m](Tape& t) { record_mlp(t, m); };
}

double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
  return d;
}

double dotp(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

std::vector<double> random_vector(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> d;
  std::vector<double> v(n);
  for (double& x : v) x = d(rng);
  return v;
}

}  // namespace

TEST_SUITE("autodiff") {

TEST_CASE("leaky relu examples") {
  CHECK(leaky_relu(-2.0, 0.01) == doctest::Approx(-0.02));
  CHECK(leaky_relu(3.0, 0.01) == 3.0);
  CHECK(leaky_relu(0.0, 0.01) == 0.0);
  CHECK(leaky_relu_derivative(-1.0, 0.01) == 0.01);
  CHECK(leaky_relu_derivative(1.0, 0.01) == 1.0);
}

TEST_CASE("gradient of half squared norm is the point itself") {
  const std::vector<double> w = {0.3, -1.2, 2.5, 0.0};
  const std::vector<double> zero(w.size(), 0.0);
  auto f = [&](Tape& t) { t.squared_error(t.param(0, w.size()), zero, 0.5); };
  const auto vg = value_and_gradient(f, w);
  CHECK(vg.value == doctest::Approx(0.5 * dotp(w, w)));
  for (std::size_t i = 0; i < w.size(); ++i) CHECK(vg.gradient[i] == doctest::Approx(w[i]));
}

TEST_CASE("parameter-independent function has zero gradient") {
  const std::vector<double> w = {1.0, 2.0};
  const std::vector<double> x = {3.0, 4.0}, tgt = {0.0, 0.0};
  auto f = [&](Tape& t) { t.squared_error(t.input(x, 2), tgt, 1.0); };
  const auto vg = value_and_gradient(f, w);
  CHECK(vg.value == doctest::Approx(25.0));
  CHECK(vg.gradient == std::vector<double>{0.0, 0.0});
}

TEST_CASE("reverse-mode gradient matches central differences on random nets") {
  int checked = 0;
  for (std::uint64_t seed = 1; checked < 10 && seed < 100; ++seed) {
    const auto m = random_mlp(seed);
    if (!away_from_kink(m)) continue;
    ++checked;
    const auto vg = value_and_gradient(mlp_function(m), m.p.values());
    const auto fd = fd_gradient(m, 1e-6);
    double scale = 1.0;
    for (double g : fd) scale = std::max(scale, std::abs(g));
    CHECK(max_abs_diff(vg.gradient, fd) / scale < 1e-6);
  }
  CHECK(checked == 10);
}

TEST_CASE("Hessian-vector product of a quadratic is exact") {
  // f = 1/2 ||A w - b||^2, H = A^T A.
  const std::size_t n = 4, m = 3;
  const auto a = random_vector(m * n, 11);
  const auto b = random_vector(m, 12);
  const auto w = random_vector(n, 13);
  const auto v = random_vector(n, 14);
  auto f = [&](Tape& t) {
    t.squared_error(t.linear_const(a, m, t.param(0, n)), b, 0.5);
  };
  const auto hv = hessian_vector_product(f, w, v);
  std::vector<double> av(m, 0.0), expect(n, 0.0);
  for (std::size_t r = 0; r < m; ++r)
    for (std::size_t c = 0; c < n; ++c) av[r] += a[r * n + c] * v[c];
  for (std::size_t c = 0; c < n; ++c)
    for (std::size_t r = 0; r < m; ++r) expect[c] += a[r * n + c] * av[r];
  CHECK(max_abs_diff(hv, expect) < 1e-12);
}

TEST_CASE("Hessian-vector product matches gradient differencing") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    auto m = random_mlp(seed + 40);
    if (!away_from_kink(m)) continue;
    const auto f = mlp_function(m);
    std::vector<double> w(m.p.values().begin(), m.p.values().end());
    const auto v = random_vector(w.size(), seed);
    const auto hv = hessian_vector_product(f, w, v);
    const double eps = 1e-6;
    std::vector<double> wp = w, wm = w;
    for (std::size_t i = 0; i < w.size(); ++i) {
      wp[i] += eps * v[i];
      wm[i] -= eps * v[i];
    }
    const auto gp = value_and_gradient(f, wp).gradient;
    const auto gm = value_and_gradient(f, wm).gradient;
    double err = 0.0, scale = 1.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
      const double fd = (gp[i] - gm[i]) / (2.0 * eps);
      err = std::max(err, std::abs(fd - hv[i]));
      scale = std::max(scale, std::abs(hv[i]));
    }
    CHECK(err / scale < 1e-5);
  }
}

TEST_CASE("Hessian is symmetric and the product is linear") {
  const auto m = random_mlp(77);
  const auto f = mlp_function(m);
  const auto w = m.p.values();
  const auto x = random_vector(w.size(), 1), y = random_vector(w.size(), 2);
  const auto hx = hessian_vector_product(f, w, x);
  const auto hy = hessian_vector_product(f, w, y);
  const double xhy = dotp(x, hy), yhx = dotp(y, hx);
  CHECK(std::abs(xhy - yhx) <= 1e-10 * std::max(1.0, std::abs(xhy)));

  std::vector<double> comb(w.size());
  for (std::size_t i = 0; i < w.size(); ++i) comb[i] = 2.0 * x[i] - 3.0 * y[i];
  const auto hc = hessian_vector_product(f, w, comb);
  for (std::size_t i = 0; i < w.size(); ++i) {
    CHECK(hc[i] == doctest::Approx(2.0 * hx[i] - 3.0 * hy[i]).epsilon(1e-10).scale(1.0));
  }
}

TEST_CASE("gradient of a sum is the sum of gradients") {
  const auto m1 = random_mlp(5), m2 = random_mlp(6);
  // Same layout, shared weights, different data.
  Mlp m2w = m2;
  m2w.p = m1.p;
  const auto w = m1.p.values();
  const auto g1 = value_and_gradient(mlp_function(m1), w).gradient;
  const auto g2 = value_and_gradient(mlp_function(m2w), w).gradient;
  const auto g12 = value_and_gradient(
      [&](Tape& t) {
        record_mlp(t, m1);
        record_mlp(t, m2w);
      },
      w).gradient;
  for (std::size_t i = 0; i < w.size(); ++i) {
    CHECK(g12[i] == doctest::Approx(g1[i] + g2[i]).epsilon(1e-12).scale(1.0));
  }
}

TEST_CASE("batched tape equals per-column tapes") {
  const auto m = random_mlp(3);
  const std::size_t batch = 5;
  std::vector<std::vector<double>> xs, ts;
  for (std::size_t c = 0; c < batch; ++c) {
    xs.push_back(random_vector(5, 100 + c));
    ts.push_back(random_vector(3, 200 + c));
  }
  std::vector<double> xb(5 * batch), tb(3 * batch);
  for (std::size_t c = 0; c < batch; ++c) {
    for (std::size_t r = 0; r < 5; ++r) xb[r * batch + c] = xs[c][r];
    for (std::size_t r = 0; r < 3; ++r) tb[r * batch + c] = ts[c][r];
  }
  Tape tb_tape(m.p.values(), batch);
  Node h = tb_tape.input(xb, 5);
  for (std::size_t l = 0; l < 3; ++l) {
    h = tb_tape.affine(m.layers[l], h);
    if (l < 2) h = tb_tape.leaky_relu(h, kSlope);
  }
  tb_tape.squared_error(h, tb, 0.5);
  std::vector<double> gb(m.p.size(), 0.0);
  tb_tape.backward(gb);

  std::vector<double> gsum(m.p.size(), 0.0);
  double lsum = 0.0;
  for (std::size_t c = 0; c < batch; ++c) {
    Mlp mc = m;
    mc.x = xs[c];
    mc.target = ts[c];
    const auto vg = value_and_gradient(mlp_function(mc), m.p.values());
    lsum += vg.value;
    CHECK(tb_tape.column_losses()[c] == doctest::Approx(vg.value).epsilon(1e-12));
    for (std::size_t i = 0; i < gsum.size(); ++i) gsum[i] += vg.gradient[i];
  }
  CHECK(tb_tape.loss() == doctest::Approx(lsum).epsilon(1e-12));
  CHECK(max_abs_diff(gb, gsum) < 1e-10);
}

TEST_CASE("capped squared error and column masking") {
  const std::vector<double> w = {1.0};
  const std::vector<double> x = {10.0, std::numeric_limits<double>::quiet_NaN()};
  Tape t(w, 2);
  Node n = t.input(x, 1);
  const std::vector<double> scale = {1.0, 0.0};
  Node masked = t.column_scale(n, scale);
  CHECK(t.value(masked)[0] == 10.0);
  CHECK(t.value(masked)[1] == 0.0);
  const std::vector<double> tgt = {0.0, 0.0};
  t.squared_error(masked, tgt, 1.0, 50.0);
  CHECK(t.loss() == 50.0);
  t.add_constant_loss(1, 7.0);
  CHECK(t.loss() == 57.0);
  CHECK(t.column_losses()[1] == 7.0);
}

TEST_CASE("hessian_vector before backward is a logic error") {
  const std::vector<double> w = {1.0};
  Tape t(w, 1);
  std::vector<double> v = {1.0}, hv = {0.0};
  CHECK_THROWS(t.hessian_vector(v, hv));
}

}

TEST_SUITE("params") {

TEST_CASE("layout is contiguous and serialization round-trips") {
  ParamVector p;
  CHECK(p.add_block("W", 3, 4) == 0);
  CHECK(p.add_block("b", 3) == 12);
  CHECK(p.size() == 15);
  for (std::size_t i = 0; i < p.size(); ++i) p.values()[i] = 0.1 * static_cast<double>(i) - 0.7;
  p.validate();
  std::stringstream ss;
  write_params(ss, p);
  const auto q = read_params(ss);
  CHECK(q == p);
  CHECK(layout_manifest(p).find("W 3 x 4 @ 0") != std::string::npos);
  CHECK(p.block("b").offset == 12);
  CHECK(p.block_values("b").size() == 3);
}

TEST_CASE("invalid containers are rejected") {
  ParamVector p;
  p.add_block("W", 2, 2);
  CHECK_THROWS_AS(p.add_block("W", 1), DomainError);
  p.values()[0] = std::numeric_limits<double>::infinity();
  CHECK_THROWS(p.validate());
  std::stringstream bad("NOPE");
  CHECK_THROWS_AS(read_params(bad), FormatError);
  std::stringstream truncated;
  ParamVector ok;
  ok.add_block("x", 3);
  write_params(truncated, ok);
  std::string s = truncated.str();
  std::stringstream cut(s.substr(0, s.size() - 5));
  CHECK_THROWS_AS(read_params(cut), FormatError);
}

}
