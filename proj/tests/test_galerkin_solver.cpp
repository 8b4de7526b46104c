#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "bipolar/io.hpp"
#include "bipolar/rng.hpp"
#include "bipolar/solver.hpp"

using namespace bipolar;

namespace {

SpectralField random_field(std::size_t m, Stream& rng, double scale = 1.0) {
  SpectralField u(m);
  for (std::size_t i = 0; i < m; ++i) u[i] = scale * rng.normal();
  return u;
}

NoiseSpec additive(double g = 0.5, std::size_t modes = 4) {
  NoiseSpec s;
  s.kind = NoiseKind::Additive;
  s.rates = {2.0, 1.0};
  s.jump_sizes = {g, -g};
  s.forcing_modes = modes;
  return s;
}

NoiseSpec affine() {
  NoiseSpec s;
  s.kind = NoiseKind::Affine;
  s.rates = {2.0, 1.0};
  s.jump_sizes = {0.5, -0.4};
  s.multipliers = {0.3, -0.2};
  s.forcing_modes = 4;
  return s;
}

std::filesystem::path temp_dir() {
  auto p = std::filesystem::temp_directory_path() / "bipolar_solver_test";
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace

TEST_CASE("config validation and defaults") {
  SolverConfig c;
  CHECK_NOTHROW(c.validate());
  c.dt = 0;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c.dt = 0.1;
  c.horizon = 0.05;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c.horizon = 0;
  CHECK_NOTHROW(c.validate());
  const auto b = build_basis(32, 2);
  CHECK(default_time_step(b, 1.0) == doctest::Approx(1e-3));
  CHECK(default_time_step(build_basis(4, 2), 1.0) == 1e-3);
  CHECK(default_time_step(b, 100.0) == doctest::Approx(0.1 / (50.0 * 100.0)));
  CHECK(scheme_from_string(to_string(Scheme::Explicit)) == Scheme::Explicit);
  CHECK(jump_handling_from_string(to_string(JumpHandling::JumpAdapted)) == JumpHandling::JumpAdapted);
}

TEST_CASE("zero state is an equilibrium without noise") {
  const GalerkinModel model(2, 16, {}, {});
  SolverConfig c;
  c.m = 16;
  c.dt = 0.01;
  const auto traj = integrate(model, c, SpectralField(16), 1);
  CHECK(traj.states.size() == 101);
  for (const auto& s : traj.states) CHECK(l2_sq(s) == 0.0);
  const auto rep = energy_audit(traj);
  CHECK(rep.replay_error == 0.0);
  for (const auto& r : traj.ledger.rows) {
    CHECK(r.energy == 0.0);
    CHECK(r.dissipation == 0.0);
    CHECK(r.stress_work == 0.0);
    CHECK(r.convection_work == 0.0);
    CHECK(r.martingale == 0.0);
    CHECK(r.jump_qv == 0.0);
  }
}

TEST_CASE("horizon zero returns the initial state") {
  const GalerkinModel model(2, 8, {}, additive());
  SolverConfig c;
  c.m = 8;
  c.horizon = 0;
  SpectralField xi(8);
  xi[3] = 2.0;
  const auto traj = integrate(model, c, xi, 5);
  REQUIRE(traj.states.size() == 1);
  CHECK(traj.states[0] == xi);
  CHECK(traj.times[0] == 0.0);
  CHECK(traj.ledger.rows.empty());
}

TEST_CASE("linear single mode decays geometrically") {
  FluidParams f;
  f.kappa1 = 1.5;
  const GalerkinModel model(2, 8, f, {});
  SolverConfig c;
  c.m = 8;
  c.dt = 0.02;
  c.horizon = 1.0;
  c.stress = false;
  c.convection = false;
  for (std::size_t mode : {0, 5}) {
    const auto traj = integrate(model, c, SpectralField::unit(8, mode, 3.0), 0);
    const double q = 1.0 / (1.0 + c.dt * f.kappa1 * model.basis().eigenvalue(mode));
    for (std::size_t n = 0; n < traj.states.size(); ++n) {
      CHECK(traj.states[n][mode] == doctest::Approx(3.0 * std::pow(q, double(n))).epsilon(1e-13));
    }
  }
}

TEST_CASE("implicit linear part is unconditionally stable") {
  const GalerkinModel model(2, 16, {}, {});
  SolverConfig c;
  c.m = 16;
  c.stress = false;
  c.convection = false;
  Stream rng(3);
  for (double dt : {1e-3, 1.0, 1e3}) {
    const auto u = random_field(16, rng);
    const auto s = step(model, c, u, 0.0, dt, {});
    CHECK(l2_sq(s.next) <= l2_sq(u));
  }
}

TEST_CASE("full drift is dissipative up to the explicit residual") {
  const GalerkinModel model(2, 16, {}, {});
  SolverConfig c;
  c.m = 16;
  c.dt = 1e-3;
  c.horizon = 0.5;
  Stream rng(8);
  const auto traj = integrate(model, c, random_field(16, rng), 0);
  double prev = traj.ledger.initial_energy;
  for (const auto& r : traj.ledger.rows) {
    CHECK(r.energy + r.dissipation <= prev + r.increment_sq + 1e-12 * prev);
    prev = r.energy;
  }
  const auto rep = energy_audit(traj);
  CHECK(rep.flagged_steps.empty());
  CHECK(rep.max_convection_ratio <= 1e-10);
  CHECK(rep.min_bookkeeping_slack >= -1e-12);
  CHECK(rep.min_stress_work >= 0.0);
}

TEST_CASE("ledger replay reconstructs the final energy") {
  for (auto scheme : {Scheme::SemiImplicit, Scheme::Explicit}) {
    for (auto handling : {JumpHandling::Grid, JumpHandling::JumpAdapted}) {
      const GalerkinModel model(2, 16, {}, affine());
      SolverConfig c;
      c.m = 16;
      c.dt = scheme == Scheme::Explicit ? 1e-3 : 5e-3;
      c.horizon = 2.0;
      c.scheme = scheme;
      c.jumps = handling;
      Stream rng(21);
      const auto traj = integrate(model, c, random_field(16, rng, 0.5), 77);
      CHECK(!traj.jumps.empty());
      const auto rep = energy_audit(traj);
      CHECK(rep.replay_error < 1e-10);
      CHECK(rep.flagged_steps.empty());
      CHECK(rep.min_bookkeeping_slack >= -1e-10);
      if (handling == JumpHandling::JumpAdapted) {
        for (const auto& e : traj.jumps) {
          CHECK(std::find(traj.times.begin(), traj.times.end(), e.t) != traj.times.end());
        }
      }
    }
  }
}

TEST_CASE("grid and jump-adapted handling converge to each other") {
  // Reference: jump-adapted at a fine step; the grid scheme error should
  // shrink at least like dt^0.5.
  const GalerkinModel model(2, 8, {}, affine());
  SolverConfig c;
  c.m = 8;
  c.horizon = 1.0;
  Stream rng(4);
  const auto xi = random_field(8, rng, 0.5);
  std::uint64_t seed = 1234;
  while (path_jumps(model, c.horizon, seed).size() < 3) ++seed;
  const auto jumps = path_jumps(model, c.horizon, seed);
  c.jumps = JumpHandling::JumpAdapted;
  c.dt = 1.0 / 8192;
  const SpectralField ref = integrate(model, c, xi, jumps).states.back();
  c.jumps = JumpHandling::Grid;
  std::vector<double> errs;
  for (double dt : {1.0 / 64, 1.0 / 128, 1.0 / 256, 1.0 / 512, 1.0 / 1024}) {
    c.dt = dt;
    errs.push_back(std::sqrt(l2_sq(integrate(model, c, xi, jumps).states.back() - ref)));
  }
  const double order = std::log2(errs.front() / errs.back()) / 4.0;
  CHECK(order >= 0.5);
}

TEST_CASE("paired integration shares the noise") {
  const GalerkinModel model(2, 8, {}, affine());
  SolverConfig c;
  c.m = 8;
  c.dt = 0.01;
  Stream rng(6);
  const auto xi = random_field(8, rng);
  const auto [a, b] = paired_integrate(model, c, xi, xi, 17);
  CHECK(a.jumps == b.jumps);
  REQUIRE(a.states.size() == b.states.size());
  for (std::size_t i = 0; i < a.states.size(); ++i) CHECK(a.states[i] == b.states[i]);
  const auto xi2 = xi + SpectralField::unit(8, 0, 0.1);
  const auto [p, q] = paired_integrate(model, c, xi, xi2, 17);
  CHECK(p.jumps == q.jumps);
  CHECK(p.states.back() == a.states.back());
}

TEST_CASE("seeded integration is deterministic") {
  const GalerkinModel model(2, 16, {}, affine());
  SolverConfig c;
  c.m = 16;
  c.dt = 0.01;
  Stream rng(6);
  const auto xi = random_field(16, rng);
  const auto a = integrate(model, c, xi, 99);
  const auto b = integrate(model, c, xi, 99);
  CHECK(a.states.back() == b.states.back());
  std::ostringstream la, lb;
  write_ledger_jsonl(la, a.ledger);
  write_ledger_jsonl(lb, b.ledger);
  CHECK(la.str() == lb.str());
  const auto first = nlohmann::json::parse(la.str().substr(0, la.str().find('\n')));
  CHECK(first.contains("martingale"));
}

TEST_CASE("observer mode does not store the path") {
  const GalerkinModel model(2, 8, {}, affine());
  SolverConfig c;
  c.m = 8;
  c.dt = 0.01;
  std::size_t calls = 0;
  const auto full = integrate(model, c, SpectralField::unit(8, 0), path_jumps(model, 1.0, 3));
  const auto lean = integrate(model, c, SpectralField::unit(8, 0), path_jumps(model, 1.0, 3),
                              [&](const LedgerRow&, const SpectralField&) { ++calls; }, false);
  CHECK(calls == full.ledger.rows.size());
  CHECK(lean.states.size() == 1);
  CHECK(lean.states.back() == full.states.back());
}

TEST_CASE("blow-up is reported, not clamped") {
  const GalerkinModel model(2, 16, {}, {});
  SolverConfig c;
  c.m = 16;
  c.dt = 1.0;
  c.horizon = 1000;
  c.scheme = Scheme::Explicit;
  try {
    integrate(model, c, SpectralField::unit(16, 15), 0);
    FAIL("expected blow-up");
  } catch (const BlowUpError& e) {
    CHECK(e.step() > 0);
    CHECK(std::string(e.what()).find("blow-up") != std::string::npos);
  }
}

TEST_CASE("linear additive second moment matches the Lyapunov recurrence") {
  // E|u_N|^2 = sum_i q_i^{2N} xi_i^2 + V_i sum_{n=1}^{N} q_i^{2n}, with
  // q_i = 1 / (1 + dt kappa1 lambda_i) and V_i = dt sum_j nu_j g_j^2 h_ji^2.
  const auto spec = additive(0.6, 4);
  const GalerkinModel model(2, 8, {}, spec);
  SolverConfig c;
  c.m = 8;
  c.dt = 0.02;
  c.horizon = 1.0;
  c.stress = false;
  c.convection = false;
  SpectralField xi(8);
  xi[0] = 0.5;
  xi[6] = -0.3;
  const std::size_t steps = 50;
  double oracle = 0;
  for (std::size_t i = 0; i < 8; ++i) {
    const double q = 1.0 / (1.0 + c.dt * model.basis().eigenvalue(i));
    double v = 0;
    for (std::size_t j = 0; j < spec.rates.size(); ++j) {
      const double h = model.noise().direction(j)[i];
      v += spec.rates[j] * spec.jump_sizes[j] * spec.jump_sizes[j] * h * h;
    }
    v *= c.dt;
    double acc = 0;
    for (std::size_t n = 1; n <= steps; ++n) acc += std::pow(q, 2.0 * n);
    oracle += std::pow(q, 2.0 * steps) * xi[i] * xi[i] + v * acc;
  }
  const int paths = 20000;
  double s = 0, s2 = 0;
  for (int p = 0; p < paths; ++p) {
    const auto traj = integrate(model, c, xi, path_jumps(model, c.horizon, derive_seed(5, StreamPurpose::Jumps, p)),
                                {}, false);
    const double e = l2_sq(traj.states.back());
    s += e;
    s2 += e * e;
  }
  const double mean = s / paths;
  const double se = std::sqrt((s2 / paths - mean * mean) / paths);
  CHECK(std::abs(mean - oracle) <= 3 * se);
}

TEST_CASE("snapshots round trip and reject mismatches") {
  const auto dir = temp_dir();
  const auto basis = build_basis(8, 2);
  Snapshot snap;
  snap.t = 0.25;
  snap.mode_table_hash = basis.mode_table_hash();
  Stream rng(2);
  snap.state = random_field(8, rng);
  const std::string path = (dir / "s.bin").string();
  write_snapshot(path, snap);
  const auto back = read_snapshot(path, basis.mode_table_hash());
  CHECK(back.state == snap.state);
  CHECK(back.t == 0.25);
  CHECK(back.dim == 2);
  CHECK_THROWS_AS(read_snapshot(path, build_basis(9, 2).mode_table_hash()), std::runtime_error);
  { std::ofstream(dir / "bad.bin") << "nonsense"; }
  CHECK_THROWS_AS(read_snapshot((dir / "bad.bin").string()), std::runtime_error);
}

TEST_CASE("trajectory CSV export") {
  const auto dir = temp_dir();
  const GalerkinModel model(2, 8, {}, affine());
  SolverConfig c;
  c.m = 8;
  c.dt = 0.1;
  const auto traj = integrate(model, c, SpectralField::unit(8, 1), 4);
  const std::string path = (dir / "traj.csv").string();
  write_trajectory_csv(path, traj, model.basis(), {{"config_hash", "abc"}});
  const auto header = read_series_header(path);
  CHECK(header == std::vector<std::string>{"t", "l2", "h1", "h2", "jumps"});
  std::ifstream in(path);
  std::string line;
  std::getline(in, line);
  CHECK(line == "# config_hash: abc");
  std::size_t rows = 0;
  while (std::getline(in, line)) rows += !line.empty() && line[0] != '#';
  CHECK(rows == traj.states.size() + 1);
}
