#include "bipolar/ergodics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <sstream>
#include <stdexcept>

namespace bipolar {
namespace {

const std::vector<Functional>& registry() {
  static const std::vector<Functional> table = {
      {"one", true, [](const SpectralField&, const GalerkinBasis&) { return 1.0; }},
      {"gaussian", true, [](const SpectralField& u, const GalerkinBasis&) { return std::exp(-l2_sq(u)); }},
      {"saturating_energy", true,
       [](const SpectralField& u, const GalerkinBasis&) {
         const double e = l2_sq(u);
         return e / (1 + e);
       }},
      {"cosine", true, [](const SpectralField& u, const GalerkinBasis&) { return std::cos(u[0]); }},
      {"l2_sq", false, [](const SpectralField& u, const GalerkinBasis&) { return l2_sq(u); }},
      {"h2_sq", false, [](const SpectralField& u, const GalerkinBasis& b) { return h2_sq(u, b); }},
      {"energy", false, [](const SpectralField& u, const GalerkinBasis& b) { return l2_sq(u) + h2_sq(u, b); }},
  };
  return table;
}

const Functional& bounded_functional(const std::string& name) {
  const Functional& f = functional(name);
  if (!f.bounded) throw std::invalid_argument("functional '" + name + "' is not bounded");
  return f;
}

SolverConfig at_level(SolverConfig config, const GalerkinModel& model, std::optional<double> horizon = {}) {
  config.m = model.level();
  if (horizon) config.horizon = *horizon;
  return config;
}

SpectralField fit(const SpectralField& u, std::size_t level) {
  return u.level() >= level ? project(u, level) : prolong(u, level);
}

std::vector<double> sample_times(double horizon, std::size_t samples) {
  if (samples < 2) throw std::invalid_argument("need at least two sample times");
  std::vector<double> t(samples);
  for (std::size_t j = 0; j < samples; ++j) t[j] = horizon * static_cast<double>(j) / static_cast<double>(samples - 1);
  t.back() = horizon;
  return t;
}

// Index of the last recorded state at or before t.
std::size_t state_index(const std::vector<double>& times, double t) {
  const auto it = std::upper_bound(times.begin(), times.end(), t + 1e-12);
  return it == times.begin() ? 0 : static_cast<std::size_t>(it - times.begin() - 1);
}

Estimate estimate_of(const std::vector<double>& v) { return estimate(std::span<const double>(v)); }

// Joint z-score with the convention 0/0 = 0.
double z_score(double diff, double err) {
  if (err > 0) return std::abs(diff) / err;
  return diff == 0 ? 0.0 : std::numeric_limits<double>::infinity();
}

}  // namespace

const Functional& functional(const std::string& name) {
  for (const auto& f : registry()) {
    if (f.name == name) return f;
  }
  std::string known;
  for (const auto& f : registry()) known += (known.empty() ? "" : ", ") + f.name;
  throw std::invalid_argument("unregistered functional '" + name + "' (known: " + known + ")");
}

std::vector<std::string> functional_names() {
  std::vector<std::string> names;
  for (const auto& f : registry()) names.push_back(f.name);
  return names;
}

// ---------------------------------------------------------------------------

MomentReport mc_moment(const GalerkinModel& model, const SolverConfig& config, const EnsembleSpec& spec, int r) {
  if (r != 1 && r != 2) throw std::invalid_argument("moment order r must be 1 or 2");
  spec.validate();
  const SolverConfig cfg = at_level(config, model);
  struct Member {
    double sup = 0, diss = 0, terminal = 0;
    bool blown = false;
  };
  const auto members = run_indexed(spec.paths, spec.workers, [&](std::size_t i) {
    Member out;
    const SpectralField xi = spec.initial.draw(model.level(), spec.seed, i);
    double e = l2_sq(xi);
    out.sup = std::pow(e, r);
    auto observe = [&](const LedgerRow& row, const SpectralField&) {
      e = row.energy;
      out.sup = std::max(out.sup, std::pow(e, r));
      out.diss += row.dt * row.h2_sq * (r == 2 ? e : 1.0);
    };
    try {
      integrate(model, cfg, xi, path_jumps(model, cfg.horizon, path_seed(spec.seed, i)), observe, false);
    } catch (const BlowUpError&) {
      out.blown = true;
    }
    out.terminal = std::pow(e, r);
    return out;
  });

  MomentReport rep;
  rep.r = r;
  rep.paths = spec.paths;
  std::vector<double> sup, diss, term;
  for (const auto& m : members) {
    if (m.blown) {
      ++rep.blowups;
      continue;
    }
    sup.push_back(m.sup);
    diss.push_back(m.diss);
    term.push_back(m.terminal);
  }
  rep.sup_moment = estimate_of(sup);
  rep.dissipation = estimate_of(diss);
  rep.terminal = estimate_of(term);
  rep.sup_interval = bootstrap_interval(sup, derive_seed(spec.seed, StreamPurpose::Bootstrap, 0));
  rep.dissipation_interval = bootstrap_interval(diss, derive_seed(spec.seed, StreamPurpose::Bootstrap, 1));
  return rep;
}

// ---------------------------------------------------------------------------

CauchyReport cauchy_study(const std::vector<const GalerkinModel*>& models, const SolverConfig& config,
                          const EnsembleSpec& spec) {
  if (models.size() < 2) throw std::invalid_argument("cauchy study needs at least two levels");
  for (std::size_t l = 1; l < models.size(); ++l) {
    if (models[l]->level() < models[l - 1]->level()) throw std::invalid_argument("cauchy levels must be nondecreasing");
  }
  spec.validate();
  const std::size_t pairs = models.size() - 1;
  struct Member {
    std::vector<double> terminal, integrated;
    bool blown = false;
  };
  const auto members = run_indexed(spec.paths, spec.workers, [&](std::size_t i) {
    Member out;
    const auto jumps = path_jumps(*models.front(), config.horizon, path_seed(spec.seed, i));
    std::vector<Trajectory> traj;
    traj.reserve(models.size());
    try {
      for (const GalerkinModel* m : models) {
        traj.push_back(integrate(*m, at_level(config, *m), spec.initial.draw(m->level(), spec.seed, i), jumps));
      }
    } catch (const BlowUpError&) {
      out.blown = true;
      return out;
    }
    for (std::size_t l = 0; l < pairs; ++l) {
      const Trajectory& a = traj[l];
      const Trajectory& b = traj[l + 1];
      if (a.times.size() != b.times.size()) throw std::logic_error("cauchy levels produced different time grids");
      const std::size_t fine = models[l + 1]->level();
      const GalerkinBasis& basis = models[l + 1]->basis();
      double integral = 0;
      for (std::size_t k = 1; k < a.times.size(); ++k) {
        integral += (b.times[k] - b.times[k - 1]) * h2_sq(prolong(a.states[k], fine) - b.states[k], basis);
      }
      out.terminal.push_back(l2_sq(prolong(a.states.back(), fine) - b.states.back()));
      out.integrated.push_back(integral);
    }
    return out;
  });

  CauchyReport rep;
  for (std::size_t l = 0; l < pairs; ++l) {
    std::vector<double> t, g;
    for (const auto& m : members) {
      if (m.blown) continue;
      t.push_back(m.terminal[l]);
      g.push_back(m.integrated[l]);
    }
    rep.rows.push_back({models[l]->level(), models[l + 1]->level(), estimate_of(t), estimate_of(g)});
  }
  for (const auto& m : members) rep.blowups += m.blown ? 1 : 0;
  rep.decreasing = true;
  for (std::size_t l = 1; l < rep.rows.size(); ++l) {
    if (!(rep.rows[l].terminal_gap.mean < rep.rows[l - 1].terminal_gap.mean)) rep.decreasing = false;
  }
  if (rep.rows.size() >= 2) {
    const double prev = rep.rows[rep.rows.size() - 2].terminal_gap.mean;
    rep.last_ratio = prev > 0 ? rep.rows.back().terminal_gap.mean / prev : std::numeric_limits<double>::infinity();
  }
  rep.converged = rep.rows.size() >= 2 && rep.decreasing && rep.last_ratio < 0.5;
  rep.refine_dt = !rep.decreasing;
  return rep;
}

// ---------------------------------------------------------------------------

ContractionReport uniqueness_contraction(const GalerkinModel& model, const SolverConfig& config,
                                         const EnsembleSpec& spec, const SpectralField& xi1,
                                         const SpectralField& xi2, double c0, std::size_t samples) {
  spec.validate();
  const SolverConfig cfg = at_level(config, model);
  const SpectralField a = fit(xi1, model.level());
  const SpectralField b = fit(xi2, model.level());
  ContractionReport rep;
  const double sep2 = l2_sq(a - b);
  rep.separation = std::sqrt(sep2);
  rep.c0 = cfg.convection ? c0 : 0.0;
  rep.times = sample_times(cfg.horizon, samples);
  const double rate = rep.c0 * rep.c0 / cfg.fluid.kappa1;

  struct Member {
    std::vector<double> weighted;
    double max_ratio = 0;
    bool blown = false;
  };
  const auto members = run_indexed(spec.paths, spec.workers, [&](std::size_t i) {
    Member out;
    Trajectory t1, t2;
    try {
      std::tie(t1, t2) = paired_integrate(model, cfg, a, b, path_seed(spec.seed, i));
    } catch (const BlowUpError&) {
      out.blown = true;
      return out;
    }
    std::vector<double> exponent(t1.times.size(), 0.0);
    for (std::size_t k = 1; k < t1.times.size(); ++k) {
      exponent[k] = exponent[k - 1] + (t1.times[k] - t1.times[k - 1]) * h2_sq(t1.states[k], model.basis());
    }
    for (double t : rep.times) {
      const std::size_t k = state_index(t1.times, t);
      const double w2 = l2_sq(t1.states[k] - t2.states[k]);
      out.weighted.push_back(std::exp(-rate * exponent[k]) * w2);
    }
    if (sep2 > 0) {
      for (std::size_t k = 0; k < t1.times.size(); ++k) {
        out.max_ratio = std::max(out.max_ratio, l2_sq(t1.states[k] - t2.states[k]) / sep2);
      }
    }
    return out;
  });

  for (std::size_t j = 0; j < rep.times.size(); ++j) {
    std::vector<double> w, s;
    for (const auto& m : members) {
      if (m.blown) continue;
      w.push_back(m.weighted[j]);
      s.push_back(sep2 > 0 ? m.weighted[j] / sep2 : 0.0);
    }
    rep.weighted.push_back(estimate_of(w));
    rep.statistic.push_back(estimate_of(s));
  }
  for (const auto& m : members) {
    rep.blowups += m.blown ? 1 : 0;
    rep.max_pathwise_ratio = std::max(rep.max_pathwise_ratio, m.max_ratio);
  }
  return rep;
}

bool contraction_consistent(const std::vector<ContractionReport>& reports, double z) {
  if (reports.empty()) return false;
  const std::size_t n = reports.front().times.size();
  for (const auto& r : reports) {
    if (r.times.size() != n) throw std::invalid_argument("contraction reports use different time grids");
  }
  for (std::size_t j = 0; j < n; ++j) {
    std::vector<Estimate> at;
    for (const auto& r : reports) at.push_back(r.statistic[j]);
    if (!intervals_overlap(at, z)) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------

Estimate semigroup_eval(const GalerkinModel& model, const SolverConfig& config, const EnsembleSpec& spec,
                        const std::string& name, const SpectralField& xi) {
  const Functional& phi = bounded_functional(name);
  spec.validate();
  const SpectralField start = fit(xi, model.level());
  if (config.horizon == 0) return {phi.eval(start, model.basis()), 0.0, spec.paths};
  const SolverConfig cfg = at_level(config, model);
  const auto values = run_indexed(spec.paths, spec.workers, [&](std::size_t i) {
    const auto traj =
        integrate(model, cfg, start, path_jumps(model, cfg.horizon, path_seed(spec.seed, i)), {}, false);
    return phi.eval(traj.states.back(), model.basis());
  });
  return estimate_of(values);
}

ChapmanKolmogorovReport chapman_kolmogorov(const GalerkinModel& model, const SolverConfig& config,
                                           const EnsembleSpec& spec, const std::string& name,
                                           const SpectralField& xi, double t, double s, std::size_t outer,
                                           std::size_t inner, double sigmas) {
  const Functional& phi = bounded_functional(name);
  if (outer < 2 || inner < 1) throw std::invalid_argument("nested estimator needs outer >= 2 and inner >= 1");
  ChapmanKolmogorovReport rep;
  rep.direct = semigroup_eval(model, at_level(config, model, t + s), spec, name, xi);

  const SolverConfig first = at_level(config, model, t);
  const SolverConfig second = at_level(config, model, s);
  const SpectralField start = fit(xi, model.level());
  const auto values = run_indexed(outer, spec.workers, [&](std::size_t i) {
    SpectralField mid = start;
    if (t > 0) {
      const auto jumps = path_jumps(model, t, derive_seed(spec.seed, StreamPurpose::Sampling, i));
      mid = integrate(model, first, start, jumps, {}, false).states.back();
    }
    if (s == 0) return phi.eval(mid, model.basis());
    const std::uint64_t inner_root = derive_seed(spec.seed, StreamPurpose::Inner, i);
    double sum = 0;
    for (std::size_t j = 0; j < inner; ++j) {
      const auto jumps = path_jumps(model, s, derive_seed(inner_root, StreamPurpose::Inner, j));
      sum += phi.eval(integrate(model, second, mid, jumps, {}, false).states.back(), model.basis());
    }
    return sum / static_cast<double>(inner);
  });
  rep.nested = estimate_of(values);
  rep.z = z_score(rep.direct.mean - rep.nested.mean, std::hypot(rep.direct.error, rep.nested.error));
  rep.pass = rep.z <= sigmas;
  return rep;
}

FellerReport feller_modulus(const GalerkinModel& model, const SolverConfig& config, const EnsembleSpec& spec,
                            const std::string& name, const SpectralField& xi, const SpectralField& direction,
                            std::size_t count, double z) {
  const Functional& phi = bounded_functional(name);
  spec.validate();
  if (count < 2) throw std::invalid_argument("feller modulus needs at least two points");
  const SolverConfig cfg = at_level(config, model);
  const SpectralField base = fit(xi, model.level());
  const SpectralField dir = fit(direction, model.level());
  std::vector<SpectralField> points;
  FellerReport rep;
  for (std::size_t k = 1; k <= count; ++k) {
    const double h = std::ldexp(1.0, -static_cast<int>(k));
    points.push_back(base + h * dir);
    rep.distances.push_back(h * std::sqrt(l2_sq(dir)));
  }
  const auto diffs = run_indexed(spec.paths, spec.workers, [&](std::size_t i) {
    const auto jumps = path_jumps(model, cfg.horizon, path_seed(spec.seed, i));
    auto value = [&](const SpectralField& x0) {
      return phi.eval(integrate(model, cfg, x0, jumps, {}, false).states.back(), model.basis());
    };
    const double v0 = value(base);
    std::vector<double> d;
    for (const auto& p : points) d.push_back(value(p) - v0);
    return d;
  });
  for (std::size_t k = 0; k < count; ++k) {
    std::vector<double> col;
    for (const auto& d : diffs) col.push_back(d[k]);
    Estimate e = estimate_of(col);
    e.mean = std::abs(e.mean);
    rep.modulus.push_back(e);
  }
  rep.monotone = rep.modulus.back().mean < rep.modulus.front().mean;
  for (std::size_t k = 1; k < count; ++k) {
    const double slack = z * std::hypot(rep.modulus[k].error, rep.modulus[k - 1].error);
    if (rep.modulus[k].mean > rep.modulus[k - 1].mean + slack) rep.monotone = false;
  }
  return rep;
}

// ---------------------------------------------------------------------------

OccupationMeasure occupation_measure(const GalerkinModel& model, const SolverConfig& config,
                                     const SpectralField& xi, const OccupationSpec& spec) {
  if (spec.schedule.empty()) throw std::invalid_argument("occupation schedule is empty");
  for (std::size_t n = 0; n < spec.schedule.size(); ++n) {
    if (!(spec.schedule[n] > spec.burn_in) || (n && !(spec.schedule[n] > spec.schedule[n - 1]))) {
      throw std::invalid_argument("occupation schedule must be increasing and beyond the burn-in");
    }
  }
  if (!(spec.block_length > 0)) throw std::invalid_argument("block length must be positive");
  if (spec.replicas == 0) throw std::invalid_argument("occupation needs at least one replica");
  std::vector<const Functional*> fs;
  for (const auto& name : spec.functionals) fs.push_back(&functional(name));

  // Segment ends: block boundaries merged with the schedule.
  std::vector<double> ends;
  const double last = spec.schedule.back();
  for (double b = spec.burn_in + spec.block_length; b < last - 1e-12; b += spec.block_length) ends.push_back(b);
  ends.insert(ends.end(), spec.schedule.begin(), spec.schedule.end());
  std::sort(ends.begin(), ends.end());
  ends.erase(std::unique(ends.begin(), ends.end(), [](double a, double b) { return std::abs(a - b) < 1e-12; }),
             ends.end());

  const SolverConfig cfg = at_level(config, model, last);
  const SpectralField start = fit(xi, model.level());
  const std::size_t nf = fs.size();
  struct Chain {
    std::vector<double> weight;  // per segment
    std::vector<double> sums;    // segment-major, nf per segment
    double reached = 0;
    std::string failure;
  };
  const auto chains = run_indexed(spec.replicas, spec.workers, [&](std::size_t r) {
    Chain c;
    c.weight.assign(ends.size(), 0.0);
    c.sums.assign(ends.size() * nf, 0.0);
    std::size_t seg = 0;
    auto observe = [&](const LedgerRow& row, const SpectralField& u) {
      c.reached = row.t;
      const double t0 = row.t - row.dt;
      const double w = row.t - std::max(t0, spec.burn_in);
      if (!(w > 0)) return;
      while (seg + 1 < ends.size() && row.t > ends[seg] + 1e-12) ++seg;
      c.weight[seg] += w;
      for (std::size_t f = 0; f < nf; ++f) c.sums[seg * nf + f] += w * fs[f]->eval(u, model.basis());
    };
    try {
      integrate(model, cfg, start, path_jumps(model, last, path_seed(spec.seed, r)), observe, false);
      c.reached = last;
    } catch (const BlowUpError& e) {
      c.failure = e.what();
    }
    return c;
  });

  OccupationMeasure occ;
  occ.functionals = spec.functionals;
  occ.burn_in = spec.burn_in;
  occ.block_length = spec.block_length;
  occ.replicas = spec.replicas;
  double reached = last;
  for (const auto& c : chains) {
    if (!c.failure.empty()) {
      occ.truncated = true;
      if (occ.truncation_reason.empty()) occ.truncation_reason = c.failure;
      reached = std::min(reached, c.reached);
    }
  }
  for (std::size_t n = 0; n < spec.schedule.size(); ++n) {
    const double horizon = spec.schedule[n];
    if (occ.truncated && horizon > reached) break;
    OccupationRow row;
    row.horizon = horizon;
    for (std::size_t f = 0; f < nf; ++f) {
      std::vector<double> means, weights;
      double num = 0, den = 0;
      for (const auto& c : chains) {
        for (std::size_t s = 0; s < ends.size() && ends[s] <= horizon + 1e-12; ++s) {
          if (!(c.weight[s] > 0)) continue;
          means.push_back(c.sums[s * nf + f] / c.weight[s]);
          weights.push_back(c.weight[s]);
          num += c.sums[s * nf + f];
          den += c.weight[s];
        }
      }
      Estimate e;
      e.n = means.size();
      e.mean = den > 0 ? num / den : 0.0;
      e.error = block_bootstrap_error(means, weights, derive_seed(spec.seed, StreamPurpose::Bootstrap, n * nf + f));
      row.averages.push_back(e);
    }
    occ.rows.push_back(std::move(row));
  }
  occ.stabilized = occ.rows.size() >= 2;
  const std::size_t first = occ.rows.size() > 4 ? occ.rows.size() - 4 : 0;
  for (std::size_t n = first + 1; n < occ.rows.size(); ++n) {
    for (std::size_t f = 0; f < nf; ++f) {
      const Estimate& a = occ.rows[n - 1].averages[f];
      const Estimate& b = occ.rows[n].averages[f];
      if (std::abs(b.mean - a.mean) > std::hypot(a.error, b.error)) occ.stabilized = false;
    }
  }
  return occ;
}

// ---------------------------------------------------------------------------

RegimeReport ergodic_regime(double kappa1, double lambda1, double l1) {
  RegimeReport r;
  r.dissipation = 2 * kappa1 * lambda1 * lambda1;
  r.growth = l1;
  r.admissible = r.dissipation > l1;
  std::ostringstream msg;
  msg << "2 kappa1 lambda1^2 = " << r.dissipation << (r.admissible ? " > " : " <= ") << "l1 = " << l1;
  if (!r.admissible) msg << "; the invariant moment bound does not apply";
  r.message = msg.str();
  return r;
}

double invariant_bound(double kappa1, double lambda1, double l0, double l1) {
  const RegimeReport r = ergodic_regime(kappa1, lambda1, l1);
  if (!r.admissible) throw std::domain_error(r.message);
  const double gap = r.dissipation - l1;
  return l0 / gap * ((l1 + 1) / (2 * kappa1) + 1) + l0 / (2 * kappa1);
}

InvariantCheck invariant_moment_check(const GalerkinModel& model, const SolverConfig& config,
                                      const SpectralField& xi, const NoiseConstants& declared,
                                      const OccupationSpec& spec, double tolerance, double zero_floor) {
  InvariantCheck chk;
  chk.tolerance = tolerance;
  chk.zero_floor = zero_floor;
  chk.lambda1 = poincare_lambda1(model.basis());
  chk.regime = ergodic_regime(config.fluid.kappa1, chk.lambda1, declared.l1);
  if (!chk.regime.admissible) {
    chk.refused = true;
    return chk;
  }
  chk.bound = invariant_bound(config.fluid.kappa1, chk.lambda1, declared.l0, declared.l1);
  OccupationSpec occ = spec;
  occ.functionals = {"energy"};
  chk.occupation = occupation_measure(model, config, xi, occ);
  if (chk.occupation.rows.empty() || chk.occupation.truncated) return chk;
  chk.measured = chk.occupation.rows.back().averages.front();
  chk.pass = chk.bound > 0 ? chk.measured.mean <= chk.bound * (1 + tolerance) : chk.measured.mean < zero_floor;
  return chk;
}

// ---------------------------------------------------------------------------

std::string to_string(GronwallReport::Status s) {
  switch (s) {
    case GronwallReport::Status::Pass: return "pass";
    case GronwallReport::Status::Fail: return "fail";
    case GronwallReport::Status::Inapplicable: return "inapplicable";
  }
  return "unknown";
}

namespace {

struct GronwallMeans {
  std::vector<double> x, y, i, xint, z;
  double z_mean = 0;
};

GronwallMeans gronwall_means(std::size_t n, const std::vector<GronwallPath>& paths) {
  GronwallMeans m;
  m.x.assign(n, 0);
  m.y.assign(n, 0);
  m.i.assign(n, 0);
  m.xint.assign(n, 0);
  const double w = 1.0 / static_cast<double>(paths.size());
  for (const auto& p : paths) {
    for (std::size_t k = 0; k < n; ++k) {
      m.x[k] += w * p.x[k];
      m.y[k] += w * p.y[k];
      m.i[k] += w * p.i[k];
      m.xint[k] += w * p.x_integral[k];
    }
    m.z_mean += w * p.z;
  }
  return m;
}

// Accumulates the Gronwall processes from ledger rows.
class GronwallRecorder {
 public:
  GronwallRecorder(const std::vector<double>& times, double initial_energy, double kappa1)
      : times_(times), kappa1_(kappa1), sup_(initial_energy) {
    path_.z = 2 * initial_energy;
    emit_until(0.0);
  }

  void add(const LedgerRow& r) {
    xint_ += sup_ * (r.t - last_t_);
    last_t_ = r.t;
    sup_ = std::max(sup_, r.energy);
    y_ += r.dissipation / (2 * kappa1_);
    mart_ += r.martingale;
    sup_mart_ = std::max(sup_mart_, std::abs(mart_));
    q_ += r.increment_sq;
    emit_until(r.t);
  }

  GronwallPath finish() {
    while (path_.x.size() < times_.size()) emit();
    return std::move(path_);
  }

 private:
  void emit() {
    path_.x.push_back(sup_);
    path_.y.push_back(y_);
    path_.i.push_back(2 * (sup_mart_ + q_));
    path_.x_integral.push_back(xint_);
    path_.phi_integral.push_back(0.0);
    path_.phi_x.push_back(0.0);
  }
  void emit_until(double t) {
    while (path_.x.size() < times_.size() && times_[path_.x.size()] <= t + 1e-12) emit();
  }

  const std::vector<double>& times_;
  double kappa1_;
  double sup_;
  double y_ = 0, mart_ = 0, sup_mart_ = 0, q_ = 0, xint_ = 0, last_t_ = 0;
  GronwallPath path_;
};

}  // namespace

GronwallReport gronwall_audit(const std::vector<double>& times, const std::vector<GronwallPath>& paths,
                              const GronwallConstants& c) {
  GronwallReport rep;
  const std::size_t n = times.size();
  if (paths.empty() || n == 0) {
    rep.violations.push_back("no samples");
    return rep;
  }
  for (const auto& p : paths) {
    if (p.x.size() != n || p.y.size() != n || p.i.size() != n || p.x_integral.size() != n ||
        p.phi_integral.size() != n || p.phi_x.size() != n) {
      throw std::invalid_argument("gronwall path sampled on a different grid");
    }
  }
  auto violate = [&](const std::string& what) { rep.violations.push_back(what); };
  const double ec = std::exp(c.c);
  if (c.c < 0 || c.alpha < 0 || c.beta < 0 || c.gamma < 0 || c.delta < 0) violate("negative constant");
  if (!(c.c_tilde > 0)) violate("C-tilde must be positive");
  if (2 * c.beta * ec > 1) violate("2 beta e^C <= 1");
  if (2 * c.delta * ec > c.alpha) violate("2 delta e^C <= alpha");
  bool phi_ok = true, monotone = true, pathwise = true;
  for (const auto& p : paths) {
    for (std::size_t k = 0; k < n; ++k) {
      if (p.phi_integral[k] > c.c * (1 + 1e-12)) phi_ok = false;
      if (k && p.i[k] < p.i[k - 1] * (1 - 1e-12)) monotone = false;
      const double lhs = p.x[k] + c.alpha * p.y[k];
      const double rhs = p.z + p.phi_x[k] + p.i[k];
      if (lhs > rhs + 1e-9 * (1 + std::abs(rhs))) pathwise = false;
    }
  }
  if (!phi_ok) violate("int phi <= C");
  if (!monotone) violate("I non-decreasing");
  if (!pathwise) violate("X + alpha Y <= Z + int phi X + I");
  const GronwallMeans m = gronwall_means(n, paths);
  for (std::size_t k = 0; k < n; ++k) {
    const double bound = c.beta * m.x[k] + c.gamma * m.xint[k] + c.delta * m.y[k] + c.c_tilde;
    if (m.i[k] > bound + 1e-12 * (1 + std::abs(bound))) {
      violate("E I <= beta E X + gamma int E X + delta E Y + C-tilde");
      break;
    }
  }
  rep.margin = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < n; ++k) {
    rep.lhs.push_back(m.x[k] + c.alpha * m.y[k]);
    rep.rhs.push_back(2 * std::exp(c.c + 2 * times[k] * c.gamma * ec) * (m.z_mean + c.c_tilde));
    rep.margin = std::min(rep.margin, rep.rhs.back() - rep.lhs.back());
  }
  if (!rep.violations.empty()) {
    rep.status = GronwallReport::Status::Inapplicable;
  } else {
    rep.status = rep.margin >= 0 ? GronwallReport::Status::Pass : GronwallReport::Status::Fail;
  }
  return rep;
}

GronwallPath gronwall_path(const Trajectory& traj, const std::vector<double>& times, double kappa1) {
  GronwallRecorder rec(times, traj.ledger.initial_energy, kappa1);
  for (const auto& r : traj.ledger.rows) rec.add(r);
  return rec.finish();
}

GronwallConstants measure_gronwall_constants(const std::vector<double>& times,
                                             const std::vector<GronwallPath>& paths, double kappa1, double l1) {
  GronwallConstants c;
  c.alpha = 2 * kappa1;
  c.beta = 0.5;
  c.delta = kappa1;
  c.gamma = 2 * l1;
  c.c = 0;
  if (paths.empty()) return c;
  const GronwallMeans m = gronwall_means(times.size(), paths);
  double need = 0;
  for (std::size_t k = 0; k < times.size(); ++k) {
    need = std::max(need, m.i[k] - c.beta * m.x[k] - c.gamma * m.xint[k] - c.delta * m.y[k]);
  }
  c.c_tilde = std::max(need, 1e-12 * (1 + m.z_mean));
  return c;
}

GronwallStudy gronwall_study(const GalerkinModel& model, const SolverConfig& config, const EnsembleSpec& spec,
                             double l1, std::size_t samples) {
  spec.validate();
  const SolverConfig cfg = at_level(config, model);
  GronwallStudy study;
  study.times = sample_times(cfg.horizon, samples);
  const auto members = run_indexed(spec.paths, spec.workers, [&](std::size_t i) -> std::optional<GronwallPath> {
    const SpectralField xi = spec.initial.draw(model.level(), spec.seed, i);
    GronwallRecorder rec(study.times, l2_sq(xi), cfg.fluid.kappa1);
    try {
      integrate(model, cfg, xi, path_jumps(model, cfg.horizon, path_seed(spec.seed, i)),
                [&](const LedgerRow& r, const SpectralField&) { rec.add(r); }, false);
    } catch (const BlowUpError&) {
      return std::nullopt;
    }
    return rec.finish();
  });
  std::vector<GronwallPath> paths;
  for (const auto& m : members) {
    if (m) {
      paths.push_back(*m);
    } else {
      ++study.blowups;
    }
  }
  study.constants = measure_gronwall_constants(study.times, paths, cfg.fluid.kappa1, l1);
  study.report = gronwall_audit(study.times, paths, study.constants);
  return study;
}

}  // namespace bipolar
