#include "bipolar/solver.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <ostream>

#include <json.hpp>

#include "bipolar/io.hpp"
#include "bipolar/rng.hpp"

namespace bipolar {

std::string to_string(Scheme s) { return s == Scheme::SemiImplicit ? "semi-implicit" : "explicit"; }

Scheme scheme_from_string(const std::string& s) {
  if (s == "semi-implicit") return Scheme::SemiImplicit;
  if (s == "explicit") return Scheme::Explicit;
  throw std::invalid_argument("unknown scheme '" + s + "' (expected semi-implicit|explicit)");
}

std::string to_string(JumpHandling j) { return j == JumpHandling::Grid ? "grid" : "jump-adapted"; }

JumpHandling jump_handling_from_string(const std::string& s) {
  if (s == "grid") return JumpHandling::Grid;
  if (s == "jump-adapted") return JumpHandling::JumpAdapted;
  throw std::invalid_argument("unknown jump handling '" + s + "' (expected grid|jump-adapted)");
}

void SolverConfig::validate() const {
  fluid.validate();
  if (m < 1) throw std::invalid_argument("m must be at least 1");
  if (!(dt > 0) || !std::isfinite(dt)) throw std::invalid_argument("dt must be positive");
  if (!(horizon >= 0) || !std::isfinite(horizon)) throw std::invalid_argument("T must be nonnegative");
  if (horizon > 0 && horizon < dt) throw std::invalid_argument("T must be at least dt");
}

double default_time_step(const GalerkinBasis& basis, double kappa1) {
  return std::min(1e-3, 0.1 / (basis.eigenvalue(basis.size() - 1) * kappa1));
}

GalerkinModel::GalerkinModel(int d, std::size_t m, const FluidParams& fluid, const NoiseSpec& noise,
                             int oversampling)
    : basis_(build_basis(m, d)),
      fluid_(fluid),
      noise_spec_(noise),
      stress_(basis_, fluid.varkappa, fluid.p, oversampling),
      convection_(basis_),
      noise_(noise, basis_) {
  fluid_.validate();
}

double EnergyLedger::replayed_energy() const {
  double e = initial_energy;
  for (const auto& r : rows) {
    e += -r.dissipation - r.implicit_residual - 2 * r.stress_work - 2 * r.dt * r.convection_work + r.martingale +
         r.increment_sq;
  }
  return e;
}

namespace {

std::string blow_up_message(std::size_t step, double t, double l2, double h2) {
  char buf[200];
  std::snprintf(buf, sizeof buf, "blow-up at step %zu (t = %.17g): |u| = %.6g, ||u||_2 = %.6g", step, t, l2, h2);
  return buf;
}

}  // namespace

BlowUpError::BlowUpError(std::size_t step, double t, double l2, double h2)
    : std::runtime_error(blow_up_message(step, t, l2, h2)), step_(step), t_(t), l2_(l2), h2_(h2) {}

StepOutput step(const GalerkinModel& model, const SolverConfig& config, const SpectralField& u, double t, double dt,
                std::span<const JumpEvent> jumps) {
  const GalerkinBasis& basis = model.basis();
  const FluidParams& fl = model.fluid();
  const std::size_t m = u.level();
  StepOutput out;
  LedgerRow& row = out.row;
  row.t = t + dt;
  row.dt = dt;
  row.jumps = jumps.size();
  row.h2_sq_pre = h2_sq(u, basis);

  SpectralField y(m);
  if (config.stress) {
    const SpectralField ap = model.stress().apply(u);
    row.stress_work = 2 * fl.kappa0 * inner(ap, u) * dt;
    y.coeffs() -= (dt * 2 * fl.kappa0) * ap.coeffs();
  }
  if (config.convection) {
    const SpectralField bu = model.convection().apply(u, u);
    row.convection_work = inner(bu, u);
    y.coeffs() -= dt * bu.coeffs();
  }
  const NoiseCoefficient& noise = model.noise();
  if (!noise.is_zero()) {
    SpectralField dm = (-dt) * noise.compensator(t, u);
    for (const JumpEvent& e : jumps) {
      const SpectralField s = noise.sigma(e.t, u, e.mark);
      row.jump_qv += l2_sq(s);
      dm += s;
    }
    row.martingale = 2 * inner(dm, u);
    y += dm;
  }

  SpectralField& x = out.next;
  if (config.scheme == Scheme::SemiImplicit) {
    x = u + y;
    double resid = 0;
    for (std::size_t i = 0; i < m; ++i) {
      x[i] /= 1.0 + dt * fl.kappa1 * basis.eigenvalue(i);
      const double ax = basis.eigenvalue(i) * x[i];
      resid += ax * ax;
    }
    row.h2_sq = h2_sq(x, basis);
    row.dissipation = 2 * fl.kappa1 * row.h2_sq * dt;
    row.implicit_residual = dt * dt * fl.kappa1 * fl.kappa1 * resid;
    row.increment_sq = l2_sq(y);
  } else {
    x = u + y;
    for (std::size_t i = 0; i < m; ++i) x[i] -= dt * fl.kappa1 * basis.eigenvalue(i) * u[i];
    row.h2_sq = h2_sq(x, basis);
    row.dissipation = 2 * fl.kappa1 * row.h2_sq_pre * dt;
    row.increment_sq = l2_sq(x - u);
  }
  row.energy = l2_sq(x);
  return out;
}

StepOutput apply_jump(const GalerkinModel& model, const SpectralField& u, const JumpEvent& jump) {
  StepOutput out;
  const SpectralField s = model.noise().sigma(jump.t, u, jump.mark);
  out.next = u + s;
  LedgerRow& row = out.row;
  row.t = jump.t;
  row.jumps = 1;
  row.martingale = 2 * inner(s, u);
  row.increment_sq = l2_sq(s);
  row.jump_qv = row.increment_sq;
  row.energy = l2_sq(out.next);
  row.h2_sq_pre = h2_sq(u, model.basis());
  row.h2_sq = h2_sq(out.next, model.basis());
  return out;
}

Trajectory integrate(const GalerkinModel& model, const SolverConfig& config, const SpectralField& initial,
                     const std::vector<JumpEvent>& jumps, const StepObserver& observer, bool record) {
  config.validate();
  if (initial.level() != model.level()) throw std::invalid_argument("integrate: initial state level mismatch");
  Trajectory traj;
  traj.jumps = jumps;
  traj.ledger.initial_energy = l2_sq(initial);
  if (record) {
    traj.times.push_back(0.0);
    traj.states.push_back(initial);
  }
  const double horizon = config.horizon;
  SpectralField u = initial;
  std::size_t count = 0;

  auto accept = [&](StepOutput&& s) {
    ++count;
    if (!s.next.all_finite() || !(s.row.energy <= 1e200)) {
      throw BlowUpError(count, s.row.t, std::sqrt(s.row.energy), std::sqrt(s.row.h2_sq));
    }
    u = std::move(s.next);
    if (observer) observer(s.row, u);
    if (record) {
      traj.times.push_back(s.row.t);
      traj.states.push_back(u);
      traj.ledger.rows.push_back(s.row);
    }
  };

  if (horizon > 0) {
    const auto steps = static_cast<std::size_t>(std::ceil(horizon / config.dt - 1e-9));
    for (std::size_t k = 0; k < steps; ++k) {
      const double t0 = static_cast<double>(k) * config.dt;
      const double t1 = k + 1 == steps ? horizon : static_cast<double>(k + 1) * config.dt;
      const auto [lo, hi] = jumps_in_window(jumps, t0, t1);
      const std::span<const JumpEvent> window(jumps.data() + lo, hi - lo);
      if (config.jumps == JumpHandling::Grid || window.empty()) {
        accept(step(model, config, u, t0, t1 - t0, window));
        continue;
      }
      double cur = t0;
      for (const JumpEvent& e : window) {
        if (e.t > cur) accept(step(model, config, u, cur, e.t - cur, {}));
        accept(apply_jump(model, u, e));
        cur = e.t;
      }
      if (t1 > cur) accept(step(model, config, u, cur, t1 - cur, {}));
    }
  }
  if (!record) {
    traj.times.push_back(horizon);
    traj.states.push_back(u);
  }
  return traj;
}

std::vector<JumpEvent> path_jumps(const GalerkinModel& model, double horizon, std::uint64_t seed) {
  if (model.noise().is_zero()) return {};
  Stream stream(seed, StreamPurpose::Jumps, 0);
  return sample_jumps(MarkSpace(model.noise().rates()), horizon, stream);
}

Trajectory integrate(const GalerkinModel& model, const SolverConfig& config, const SpectralField& initial,
                     std::uint64_t seed) {
  return integrate(model, config, initial, path_jumps(model, config.horizon, seed));
}

std::pair<Trajectory, Trajectory> paired_integrate(const GalerkinModel& model, const SolverConfig& config,
                                                   const SpectralField& xi1, const SpectralField& xi2,
                                                   std::uint64_t seed) {
  const auto jumps = path_jumps(model, config.horizon, seed);
  return {integrate(model, config, xi1, jumps), integrate(model, config, xi2, jumps)};
}

// ---------------------------------------------------------------------------

EnergyAuditReport energy_audit(const Trajectory& traj, double convection_tolerance) {
  EnergyAuditReport rep;
  const EnergyLedger& ledger = traj.ledger;
  const double xi = ledger.initial_energy;
  double diss = 0, book = 0, jump = 0, prev = xi;
  rep.min_bookkeeping_slack = 0;
  rep.min_jump_slack = 0;
  rep.min_stress_work = 0;
  bool first = true;
  for (std::size_t n = 0; n < ledger.rows.size(); ++n) {
    const LedgerRow& r = ledger.rows[n];
    diss += r.dissipation;
    book += r.martingale + r.increment_sq - 2 * r.dt * r.convection_work;
    jump += r.martingale + r.jump_qv - 2 * r.dt * r.convection_work;
    const double lhs = r.energy + diss;
    const double s_book = xi + book - lhs;
    const double s_jump = xi + jump - lhs;
    if (first) {
      rep.min_bookkeeping_slack = s_book;
      rep.min_jump_slack = s_jump;
      rep.min_stress_work = r.stress_work;
      first = false;
    }
    rep.min_bookkeeping_slack = std::min(rep.min_bookkeeping_slack, s_book);
    rep.min_jump_slack = std::min(rep.min_jump_slack, s_jump);
    rep.min_stress_work = std::min(rep.min_stress_work, r.stress_work);
    rep.max_energy_increase = std::max(rep.max_energy_increase, r.energy - prev);
    rep.max_increment_sq = std::max(rep.max_increment_sq, r.increment_sq);
    const double ratio = std::abs(r.convection_work) / (1.0 + prev * std::sqrt(r.h2_sq_pre));
    rep.max_convection_ratio = std::max(rep.max_convection_ratio, ratio);
    if (ratio > convection_tolerance) rep.flagged_steps.push_back(n);
    prev = r.energy;
  }
  if (!ledger.rows.empty()) {
    const double final_energy = ledger.rows.back().energy;
    rep.replay_error = std::abs(ledger.replayed_energy() - final_energy) / (1.0 + final_energy);
  }
  return rep;
}

void write_trajectory_csv(const std::string& path, const Trajectory& traj, const GalerkinBasis& basis,
                          const std::vector<std::pair<std::string, std::string>>& comments) {
  SeriesWriter w(path,
                 {{"t", "time"}, {"l2", "velocity"}, {"h1", "velocity/length"}, {"h2", "velocity/length^2"},
                  {"jumps", "count"}},
                 comments);
  std::size_t next_jump = 0;
  for (std::size_t i = 0; i < traj.states.size(); ++i) {
    const double t = traj.times[i];
    while (next_jump < traj.jumps.size() && traj.jumps[next_jump].t <= t) ++next_jump;
    const Norms n = norms(traj.states[i], basis);
    w.row({t, n.l2, n.h1, n.h2, static_cast<double>(next_jump)});
  }
  w.close();
}

void write_ledger_jsonl(std::ostream& os, const EnergyLedger& ledger) {
  for (const auto& r : ledger.rows) {
    nlohmann::json j = {{"t", r.t},
                        {"dt", r.dt},
                        {"energy", r.energy},
                        {"dissipation", r.dissipation},
                        {"implicit_residual", r.implicit_residual},
                        {"stress_work", r.stress_work},
                        {"convection_work", r.convection_work},
                        {"martingale", r.martingale},
                        {"increment_sq", r.increment_sq},
                        {"jump_qv", r.jump_qv},
                        {"jumps", r.jumps}};
    os << j.dump() << '\n';
  }
}

// ---------------------------------------------------------------------------

namespace {

constexpr char kMagic[8] = {'B', 'P', 'L', 'R', 'S', 'N', 'A', 'P'};
constexpr std::uint32_t kSnapshotVersion = 1;

static_assert(std::endian::native == std::endian::little, "snapshot format is little-endian");

template <class T>
void put(std::ostream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <class T>
T get(std::istream& is, const std::string& path) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof v);
  if (!is) throw std::runtime_error(path + ": truncated snapshot");
  return v;
}

}  // namespace

void write_snapshot(const std::string& path, const Snapshot& snap) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error(path + ": cannot open snapshot for writing");
  os.write(kMagic, sizeof kMagic);
  put(os, kSnapshotVersion);
  put(os, static_cast<std::uint32_t>(snap.dim));
  put(os, static_cast<std::uint64_t>(snap.state.level()));
  put(os, static_cast<std::uint32_t>(snap.mode_table_hash.size()));
  os.write(snap.mode_table_hash.data(), static_cast<std::streamsize>(snap.mode_table_hash.size()));
  put(os, snap.t);
  for (std::size_t i = 0; i < snap.state.level(); ++i) put(os, snap.state[i]);
  os.flush();
  if (!os) throw std::runtime_error(path + ": snapshot write failed");
}

Snapshot read_snapshot(const std::string& path, const std::string& expected_hash) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error(path + ": cannot open snapshot");
  char magic[8];
  is.read(magic, sizeof magic);
  if (!is || std::memcmp(magic, kMagic, sizeof kMagic) != 0) throw std::runtime_error(path + ": not a snapshot");
  const auto version = get<std::uint32_t>(is, path);
  if (version != kSnapshotVersion) {
    throw std::runtime_error(path + ": unsupported snapshot version " + std::to_string(version));
  }
  Snapshot snap;
  snap.dim = static_cast<int>(get<std::uint32_t>(is, path));
  const auto m = get<std::uint64_t>(is, path);
  const auto hash_len = get<std::uint32_t>(is, path);
  if (hash_len > 1024 || m > (1u << 24)) throw std::runtime_error(path + ": corrupt snapshot header");
  snap.mode_table_hash.resize(hash_len);
  is.read(snap.mode_table_hash.data(), hash_len);
  snap.t = get<double>(is, path);
  snap.state = SpectralField(static_cast<std::size_t>(m));
  for (std::size_t i = 0; i < m; ++i) snap.state[i] = get<double>(is, path);
  if (!expected_hash.empty() && snap.mode_table_hash != expected_hash) {
    throw std::runtime_error(path + ": mode table hash mismatch");
  }
  return snap;
}

}  // namespace bipolar
