#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "dynnet/errors.hpp"
#include "dynnet/excite/ground_motion.hpp"
#include "dynnet/sim/newmark.hpp"
#include "dynnet/sim/presets.hpp"
#include "dynnet/sim/structure.hpp"
#include "dynnet/sim/trajectory_io.hpp"
#include "oracles.hpp"

using namespace dynnet;
using namespace dynnet::sim;

namespace {

StructureModel sdof(double m, double k, double fy = std::numeric_limits<double>::infinity()) {
  StructureModel s;
  s.masses = {m};
  s.springs = {ElastoPlastic{k, fy}};
  return s;
}

StructureModel linear_model(std::mt19937_64& rng, std::size_t n) {
  std::uniform_real_distribution<double> um(0.2, 1.0), uk(50.0, 200.0);
  StructureModel s;
  for (std::size_t i = 0; i < n; ++i) {
    s.masses.push_back(um(rng));
    s.springs.push_back(CubicElastic{uk(rng), 1.0, 0.0});
  }
  s.damping = rayleigh_from_modes(s, 0.03, 0.03);
  return s;
}

std::vector<double> sine_motion(std::size_t steps, double dt, double amp, double f) {
  std::vector<double> xg(steps);
  for (std::size_t k = 0; k < steps; ++k) {
    const double t = static_cast<double>(k) * dt;
    xg[k] = amp * std::sin(2.0 * M_PI * f * t) * std::min(1.0, t);
  }
  return xg;
}

}  // namespace

TEST_SUITE("structure") {

TEST_CASE("story_force examples") {
  const ElastoPlastic epp{168.0, 50.0};
  auto r = story_force(epp, 0.1, 0.0);
  CHECK(r.force == doctest::Approx(16.8).epsilon(1e-14));
  CHECK(r.plastic == 0.0);

  r = story_force(epp, 0.5, 0.0);
  CHECK(r.force == doctest::Approx(50.0).epsilon(1e-14));
  CHECK(r.plastic == doctest::Approx(0.5 - 50.0 / 168.0).epsilon(1e-12));
  CHECK(168.0 * (0.5 - r.plastic) == doctest::Approx(50.0));

  r = story_force(epp, -0.5, 0.0);
  CHECK(r.force == doctest::Approx(-50.0));
  CHECK(r.plastic == doctest::Approx(-0.5 + 50.0 / 168.0));

  r = story_force(CubicElastic{100.0, 1.0, 10.0}, 0.0, 0.0);
  CHECK(r.force == 0.0);
  CHECK(r.plastic == 0.0);
  r = story_force(CubicElastic{100.0, 1.0, 10.0}, 0.2, 0.0);
  CHECK(r.force == doctest::Approx(100.0 * (0.2 + 10.0 * 0.008)));
}

TEST_CASE("yield branch agrees with a small-increment loading path") {
  const ElastoPlastic epp{168.0, 50.0};
  double plastic = 0.0, force = 0.0;
  for (int i = 1; i <= 5000; ++i) {
    const auto r = story_force(epp, 0.5 * i / 5000.0, plastic);
    plastic = r.plastic;
    force = r.force;
  }
  const auto direct = story_force(epp, 0.5, 0.0);
  CHECK(force == doctest::Approx(direct.force));
  CHECK(plastic == doctest::Approx(direct.plastic).epsilon(1e-12));
}

TEST_CASE("story_force rejects non-finite drift") {
  CHECK_THROWS_AS(story_force(ElastoPlastic{168.0, 50.0}, NAN, 0.0), DomainError);
  CHECK_THROWS_AS(story_force(CubicElastic{100.0, 1.0, 10.0}, INFINITY, 0.0), DomainError);
}

TEST_CASE("spring law validation") {
  CHECK_THROWS_AS(validate(SpringLaw{ElastoPlastic{0.0, 50.0}}), DomainError);
  CHECK_THROWS_AS(validate(SpringLaw{ElastoPlastic{168.0, -1.0}}), DomainError);
  CHECK_THROWS_AS(validate(SpringLaw{CubicElastic{100.0, 0.0, 1.0}}), DomainError);
  CHECK_THROWS_AS(validate(SpringLaw{CubicElastic{100.0, 1.0, -1.0}}), DomainError);
  CHECK_NOTHROW(validate(SpringLaw{CubicElastic{100.0, 1.0, 0.0}}));
  auto m = preset("nl1");
  m.masses[2] = 0.0;
  CHECK_THROWS_AS(m.validate(), DomainError);
}

TEST_CASE("presets encode the published constants verbatim") {
  const auto nl1 = preset("nl1");
  REQUIRE(nl1.dofs() == 4);
  const double m1[] = {0.259, 0.259, 0.259 * 0.75, 0.259 * 0.5};
  const double k1[] = {168.0, 168.0 * 7.0 / 9.0, 168.0 / 3.0, 168.0 / 4.0};
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(nl1.masses[i] == doctest::Approx(m1[i]).epsilon(1e-15));
    const auto& s = std::get<ElastoPlastic>(nl1.springs[i]);
    CHECK(s.k0 == doctest::Approx(k1[i]).epsilon(1e-15));
    CHECK(s.fy == 50.0);
  }
  const auto nl2 = preset("nl2");
  const double m2[] = {0.340, 0.340 * 0.8, 0.340 * 0.75, 0.340 * 0.6};
  const double K2[] = {100.0, 75.0, 50.0, 25.0};
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(nl2.masses[i] == doctest::Approx(m2[i]).epsilon(1e-15));
    const auto& s = std::get<CubicElastic>(nl2.springs[i]);
    CHECK(s.K == doctest::Approx(K2[i]).epsilon(1e-15));
    CHECK(s.k1 == 1.0);
    CHECK(s.k2 == 10.0);
  }
  const auto small = preset("nl1_2dof");
  CHECK(small.dofs() == 2);
  CHECK_THROWS_AS(preset("nl3"), DomainError);
}

TEST_CASE("tangent stiffness examples") {
  const auto nl1 = preset("nl1");
  const auto Kt = tangent_stiffness(nl1, DynState::zero(4));
  const double k = 168.0;
  const double diag[] = {k + k * 7 / 9, k * 7 / 9 + k / 3, k / 3 + k / 4, k / 4};
  for (int i = 0; i < 4; ++i) CHECK(Kt(i, i) == doctest::Approx(diag[i]).epsilon(1e-14));
  CHECK(Kt(0, 1) == doctest::Approx(-k * 7 / 9));
  CHECK(Kt(2, 3) == doctest::Approx(-k / 4));
  CHECK(Kt(0, 2) == 0.0);
  CHECK((Kt - Kt.transpose()).norm() == 0.0);

  StructureModel cubic;
  cubic.masses = {1.0};
  cubic.springs = {CubicElastic{100.0, 1.0, 10.0}};
  CHECK(tangent_stiffness(cubic, DynState::zero(1))(0, 0) == doctest::Approx(100.0));

  auto yielded = DynState::zero(1);
  const auto m = sdof(1.0, 168.0, 50.0);
  yielded.u[0] = 0.5;
  yielded.plastic[0] = 0.5 - 50.0 / 168.0;
  yielded.S[0] = 50.0;
  CHECK(tangent_stiffness(m, yielded)(0, 0) == 0.0);
}

TEST_CASE("modal properties agree with a Jacobi rotation oracle") {
  CHECK(modal_properties(sdof(1.0, 4.0 * M_PI * M_PI)).frequencies_hz[0] ==
        doctest::Approx(1.0).epsilon(1e-12));
  for (const char* name : {"nl1", "nl2"}) {
    const auto m = preset(name);
    std::vector<double> k;
    for (const auto& s : m.springs) k.push_back(initial_stiffness(s));
    const auto ref = oracle::shear_building_frequencies(m.masses, k);
    const auto got = modal_properties(m);
    REQUIRE(got.frequencies_hz.size() == 4);
    for (std::size_t i = 0; i < 4; ++i) {
      CHECK(got.frequencies_hz[i] == doctest::Approx(ref[i]).epsilon(1e-10));
      CHECK(got.periods_s[i] == doctest::Approx(1.0 / ref[i]).epsilon(1e-10));
      if (i) CHECK(got.frequencies_hz[i] > got.frequencies_hz[i - 1]);
    }
  }
}

TEST_CASE("Rayleigh damping gives the requested ratios in modes 1 and 2") {
  const auto m = preset("nl1", 0.02);
  const auto f = modal_properties(m).frequencies_hz;
  for (int i = 0; i < 2; ++i) {
    const double w = 2.0 * M_PI * f[static_cast<std::size_t>(i)];
    const double zeta = 0.5 * (m.damping.alpha_m / w + m.damping.beta_k * w);
    CHECK(zeta == doctest::Approx(0.02).epsilon(1e-10));
  }
}

TEST_CASE("stiffness matrix is symmetric positive definite and tridiagonal") {
  for (const auto& name : preset_names()) {
    const auto K = elastic_stiffness(preset(name));
    CHECK((K - K.transpose()).norm() == 0.0);
    CHECK(K.llt().info() == Eigen::Success);
    for (Eigen::Index i = 0; i < K.rows(); ++i)
      for (Eigen::Index j = 0; j < K.cols(); ++j)
        if (std::abs(i - j) > 1) CHECK(K(i, j) == 0.0);
  }
}

TEST_CASE("story and nodal forces round-trip") {
  Eigen::VectorXd story(4);
  story << 3.0, -1.0, 2.5, 0.5;
  CHECK((story_from_nodal(nodal_from_story(story)) - story).norm() < 1e-14);
}

}

TEST_SUITE("newmark") {

TEST_CASE("undamped SDOF free vibration follows cos(2 pi t)") {
  const auto m = sdof(1.0, 4.0 * M_PI * M_PI);
  auto s = DynState::zero(1);
  s.u[0] = 1.0;
  std::vector<double> xg(1001, 0.0);
  const auto traj = simulate(m, xg, 0.001, s);
  CHECK(std::abs(traj.states.back().u[0] - 1.0) < 1e-3);
  double worst = 0.0;
  for (std::size_t k = 0; k < traj.steps(); ++k) {
    worst = std::max(worst, std::abs(traj.states[k].u[0] - std::cos(2 * M_PI * 0.001 * k)));
  }
  CHECK(worst < 1e-3);
}

TEST_CASE("rest stays exactly at rest") {
  const auto m = preset("nl1");
  std::vector<double> xg(200, 0.0);
  const auto traj = simulate(m, xg, 0.02, DynState::zero(4));
  for (const auto& s : traj.states) {
    CHECK(s.u.norm() == 0.0);
    CHECK(s.v.norm() == 0.0);
    CHECK(s.a.norm() == 0.0);
    CHECK(s.S.norm() == 0.0);
  }
}

TEST_CASE("linear regime matches classical linear Newmark on random 4-DOF systems") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 5; ++trial) {
    const auto m = linear_model(rng, 4);
    const auto xg = sine_motion(400, 0.01, 150.0, 1.7);
    const auto traj = simulate(m, xg, 0.01, DynState::zero(4), {1e-9, 50});
    oracle::LinearNewmark lin{mass_matrix(m), damping_matrix(m), elastic_stiffness(m), m.gamma()};
    std::vector<Eigen::VectorXd> us, vs, as;
    oracle::linear_newmark(lin, xg, 0.01, Eigen::VectorXd::Zero(4), Eigen::VectorXd::Zero(4), us,
                           vs, as);
    double scale_u = 0.0, scale_a = 0.0, err_u = 0.0, err_v = 0.0, err_a = 0.0, scale_v = 0.0;
    for (std::size_t k = 0; k < xg.size(); ++k) {
      scale_u = std::max(scale_u, us[k].norm());
      scale_v = std::max(scale_v, vs[k].norm());
      scale_a = std::max(scale_a, as[k].norm());
      err_u = std::max(err_u, (traj.states[k].u - us[k]).norm());
      err_v = std::max(err_v, (traj.states[k].v - vs[k]).norm());
      err_a = std::max(err_a, (traj.states[k].a - as[k]).norm());
    }
    CHECK(err_u / scale_u < 1e-10);
    CHECK(err_v / scale_v < 1e-10);
    CHECK(err_a / scale_a < 1e-10);
  }
}

TEST_CASE("EPP with infinite yield force is the linear system") {
  StructureModel epp, lin;
  epp.masses = lin.masses = {0.3, 0.2};
  epp.springs = {ElastoPlastic{150.0, INFINITY}, ElastoPlastic{90.0, INFINITY}};
  lin.springs = {CubicElastic{150.0, 1.0, 0.0}, CubicElastic{90.0, 1.0, 0.0}};
  epp.damping = lin.damping = {0.4, 0.002};
  const auto xg = sine_motion(300, 0.02, 200.0, 2.1);
  const auto a = simulate(epp, xg, 0.02, DynState::zero(2), {1e-9, 50});
  const auto b = simulate(lin, xg, 0.02, DynState::zero(2), {1e-9, 50});
  for (std::size_t k = 0; k < xg.size(); ++k) {
    CHECK((a.states[k].u - b.states[k].u).norm() <= 1e-10 * (1.0 + b.states[k].u.norm()));
  }
}

TEST_CASE("second-order convergence on a cubic-elastic problem") {
  const auto m = preset("nl2");
  const double T = 4.0;
  auto motion = [](double t) { return 30.0 * std::sin(2.0 * M_PI * 1.3 * t) * std::sin(M_PI * t / 4.0); };
  auto run = [&](double dt) {
    const auto steps = static_cast<std::size_t>(std::llround(T / dt)) + 1;
    std::vector<double> xg(steps);
    for (std::size_t k = 0; k < steps; ++k) xg[k] = motion(static_cast<double>(k) * dt);
    return simulate(m, xg, dt, DynState::zero(4));
  };
  // Moderate amplitude and small steps keep the comparison in the asymptotic
  // regime; at dt = 0.02 the stiffened upper stories are under-resolved.
  const double dt = 0.005;
  const auto ref = run(dt / 100.0);
  auto max_err = [&](const Trajectory& t, std::size_t stride) {
    double e = 0.0;
    for (std::size_t k = 0; k < t.steps(); ++k) {
      e = std::max(e, (t.states[k].u - ref.states[k * stride].u).cwiseAbs().maxCoeff());
    }
    return e;
  };
  const double e1 = max_err(run(dt), 100);
  const double e2 = max_err(run(dt / 2.0), 50);
  const double ratio = e1 / e2;
  CAPTURE(ratio);
  CHECK(ratio > 3.5);
  CHECK(ratio < 4.5);
}

TEST_CASE("EPP story forces stay within the yield force") {
  const auto m = preset("nl1");
  const auto gm = excite::band_limited_noise(5, 0.02, 40.0, 0.5, 8.0, 0.6 * kGravity);
  const auto traj = excite::simulate(m, gm, DynState::zero(4));
  bool yielded = false;
  for (const auto& s : traj.states) {
    const auto story = story_from_nodal(s.S);
    for (Eigen::Index i = 0; i < 4; ++i) {
      CHECK(std::abs(story[i]) <= 50.0 + 1e-9);
      yielded = yielded || std::abs(s.plastic[i]) > 0.0;
    }
  }
  CHECK(yielded);
}

TEST_CASE("returned states satisfy the equation of motion") {
  const auto m = preset("nl1");
  const auto gm = excite::earthquake_like(2, 0.02, 20.0, 0.5, 8.0, 0.4 * kGravity);
  const auto traj = excite::simulate(m, gm, DynState::zero(4));
  const double tol = default_tolerance(m);
  for (std::size_t k = 0; k < traj.steps(); ++k) {
    CHECK(equation_of_motion_residual(m, traj.states[k], gm.accel[k]) <= tol * 1.0000001);
  }
}

TEST_CASE("yielding leaves residual drift that a fine-step explicit integrator confirms") {
  const auto m = preset("nl1");
  const auto gm = excite::earthquake_like(4, 0.02, 30.0, 0.5, 6.0, 0.5 * kGravity);
  const auto traj = excite::simulate(m, gm, DynState::zero(4));
  std::vector<double> k0, fy;
  for (const auto& s : m.springs) {
    k0.push_back(std::get<ElastoPlastic>(s).k0);
    fy.push_back(std::get<ElastoPlastic>(s).fy);
  }
  // Append 20 s of rest so the free vibration decays to the residual offset.
  std::vector<double> xg = gm.accel;
  xg.resize(xg.size() + 1000, 0.0);
  const auto full = simulate(m, xg, 0.02, DynState::zero(4));
  const Eigen::VectorXd implicit_u = full.states.back().u;
  const Eigen::VectorXd explicit_u =
      oracle::explicit_shear_building(m.masses, k0, fy, damping_matrix(m), xg, 0.02, 100);
  const double residual = implicit_u.cwiseAbs().maxCoeff();
  CAPTURE(implicit_u.transpose());
  CAPTURE(explicit_u.transpose());
  CHECK(residual > 0.05);
  CHECK((implicit_u - explicit_u).cwiseAbs().maxCoeff() < 0.1 * residual);
}

TEST_CASE("cubic-elastic energy balance closes within 1% of peak input energy") {
  const auto m = preset("nl2");
  const auto gm = excite::band_limited_noise(9, 0.005, 20.0, 0.5, 6.0, 0.4 * kGravity);
  const auto traj = excite::simulate(m, gm, DynState::zero(4), {1e-10, 50});
  const Eigen::MatrixXd M = mass_matrix(m), C = damping_matrix(m);
  const Eigen::VectorXd G = m.gamma();
  auto strain = [&](const Eigen::VectorXd& u) {
    const auto d = story_drifts(u);
    double e = 0.0;
    for (Eigen::Index i = 0; i < d.size(); ++i) {
      const auto& s = std::get<CubicElastic>(m.springs[static_cast<std::size_t>(i)]);
      e += s.K * (s.k1 * d[i] * d[i] / 2.0 + s.k2 * std::pow(d[i], 4) / 4.0);
    }
    return e;
  };
  double e_in = 0.0, e_damp = 0.0, peak_in = 0.0, worst = 0.0;
  for (std::size_t k = 1; k < traj.steps(); ++k) {
    const auto& s0 = traj.states[k - 1];
    const auto& s1 = traj.states[k];
    const double h = gm.dt;
    e_in += 0.5 * h * (-(M * G * gm.accel[k - 1]).dot(s0.v) - (M * G * gm.accel[k]).dot(s1.v));
    e_damp += 0.5 * h * (s0.v.dot(C * s0.v) + s1.v.dot(C * s1.v));
    const double e_kin = 0.5 * s1.v.dot(M * s1.v);
    peak_in = std::max(peak_in, std::abs(e_in));
    worst = std::max(worst, std::abs(e_in - e_damp - e_kin - strain(s1.u)));
  }
  CAPTURE(worst);
  CAPTURE(peak_in);
  CHECK(worst < 0.01 * peak_in);
}

TEST_CASE("simulation is bit-for-bit deterministic") {
  const auto m = preset("nl1");
  const auto gm = excite::band_limited_noise(3, 0.02, 20.0, 0.5, 8.0, 0.5 * kGravity);
  const auto a = excite::simulate(m, gm, DynState::zero(4));
  const auto b = excite::simulate(m, gm, DynState::zero(4));
  std::ostringstream sa, sb;
  write_trajectory(sa, a);
  write_trajectory(sb, b);
  CHECK(sa.str() == sb.str());
}

TEST_CASE("Newton non-convergence raises a step error with the step index") {
  const auto m = preset("nl2");
  std::vector<double> xg(50, 0.0);
  xg[10] = 1e7;
  try {
    simulate(m, xg, 0.02, DynState::zero(4), {1e-8, 2});
    FAIL("expected StepError");
  } catch (const StepError& e) {
    CHECK(e.step() == 10);
    CHECK(e.residual() > 0.0);
  }
}

}

TEST_SUITE("trajectory_io") {

TEST_CASE("binary container round-trips exactly") {
  const auto m = preset("nl1");
  const auto gm = excite::band_limited_noise(1, 0.02, 10.0, 0.5, 8.0, 0.3 * kGravity);
  const auto t = excite::simulate(m, gm, DynState::zero(4));
  std::stringstream ss;
  write_trajectory(ss, t);
  const std::string bytes = ss.str();
  CHECK(bytes.substr(0, 4) == "DYNT");
  const auto back = read_trajectory(ss);
  REQUIRE(back.steps() == t.steps());
  CHECK(back.dt == t.dt);
  for (std::size_t k = 0; k < t.steps(); ++k) {
    CHECK(back.states[k].u == t.states[k].u);
    CHECK(back.states[k].v == t.states[k].v);
    CHECK(back.states[k].a == t.states[k].a);
    CHECK(back.states[k].S == t.states[k].S);
  }
}

TEST_CASE("corrupt containers are rejected") {
  std::stringstream bad("XXXX0000000000000000");
  CHECK_THROWS_AS(read_trajectory(bad), FormatError);
  std::stringstream empty;
  CHECK_THROWS(read_trajectory(empty));
}

TEST_CASE("CSV export has labeled columns and one row per step") {
  const auto m = preset("nl1_2dof");
  std::vector<double> xg(5, 10.0);
  const auto t = simulate(m, xg, 0.02, DynState::zero(2));
  std::ostringstream os;
  write_trajectory_csv(os, t);
  std::istringstream is(os.str());
  std::string header;
  std::getline(is, header);
  CHECK(header == "t,u1,u2,v1,v2,a1,a2,S1,S2");
  int rows = 0;
  for (std::string line; std::getline(is, line);) ++rows;
  CHECK(rows == 5);
}

}
