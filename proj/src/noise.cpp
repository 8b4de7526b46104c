#include "bipolar/noise.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>
#include <stdexcept>

#include <json.hpp>

namespace bipolar {

MarkSpace::MarkSpace(std::vector<double> r) : rates(std::move(r)) {
  for (double v : rates) {
    if (!(v > 0) || !std::isfinite(v)) throw std::invalid_argument("MarkSpace: rates must be positive and finite");
  }
}

double MarkSpace::total_rate() const { return std::accumulate(rates.begin(), rates.end(), 0.0); }

std::vector<JumpEvent> sample_jumps(const MarkSpace& marks, double horizon, Stream& stream) {
  std::vector<JumpEvent> out;
  const double total = marks.total_rate();
  if (marks.size() == 0 || total <= 0 || horizon <= 0) return out;
  std::vector<double> cumulative(marks.size());
  std::partial_sum(marks.rates.begin(), marks.rates.end(), cumulative.begin());
  double t = 0;
  for (;;) {
    t += stream.exponential(total);
    if (t > horizon) break;
    const double target = stream.uniform() * total;
    auto it = std::upper_bound(cumulative.begin(), cumulative.end(), target);
    if (it == cumulative.end()) --it;
    out.push_back({t, static_cast<std::size_t>(it - cumulative.begin())});
  }
  return out;
}

std::pair<std::size_t, std::size_t> jumps_in_window(const std::vector<JumpEvent>& jumps, double t0, double t1) {
  auto lo = std::upper_bound(jumps.begin(), jumps.end(), t0, [](double t, const JumpEvent& e) { return t < e.t; });
  auto hi = std::upper_bound(lo, jumps.end(), t1, [](double t, const JumpEvent& e) { return t < e.t; });
  return {static_cast<std::size_t>(lo - jumps.begin()), static_cast<std::size_t>(hi - jumps.begin())};
}

// ---------------------------------------------------------------------------

std::string to_string(NoiseKind kind) {
  switch (kind) {
    case NoiseKind::Zero: return "zero";
    case NoiseKind::Linear: return "linear";
    case NoiseKind::Additive: return "additive";
    case NoiseKind::Affine: return "affine";
    case NoiseKind::Saturating: return "saturating";
  }
  return "zero";
}

NoiseKind noise_kind_from_string(const std::string& s) {
  if (s == "zero") return NoiseKind::Zero;
  if (s == "linear") return NoiseKind::Linear;
  if (s == "additive") return NoiseKind::Additive;
  if (s == "affine") return NoiseKind::Affine;
  if (s == "saturating") return NoiseKind::Saturating;
  throw std::invalid_argument("unknown noise kind '" + s + "' (expected zero|linear|additive|affine|saturating)");
}

std::string to_string(ForcingLayout layout) { return layout == ForcingLayout::Common ? "common" : "modal"; }

ForcingLayout forcing_layout_from_string(const std::string& s) {
  if (s == "common") return ForcingLayout::Common;
  if (s == "modal") return ForcingLayout::Modal;
  throw std::invalid_argument("unknown forcing layout '" + s + "' (expected common|modal)");
}

namespace {

bool uses_forcing(NoiseKind k) {
  return k == NoiseKind::Additive || k == NoiseKind::Affine || k == NoiseKind::Saturating;
}
bool uses_state(NoiseKind k) {
  return k == NoiseKind::Linear || k == NoiseKind::Affine || k == NoiseKind::Saturating;
}

// Forcing directions for marks of `spec` at the level of `basis`, m x K.
Eigen::MatrixXd forcing_directions(const NoiseSpec& spec, const GalerkinBasis& basis) {
  const auto m = static_cast<Eigen::Index>(basis.size());
  const auto k = static_cast<Eigen::Index>(spec.rates.size());
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(m, k);
  if (!uses_forcing(spec.kind)) return h;
  const double lam1 = mode_eigenvalue(1);
  auto profile = [&](Eigen::Index i) {
    return std::pow(lam1 / basis.eigenvalue(static_cast<std::size_t>(i)), spec.decay);
  };
  const auto forced = std::min<Eigen::Index>(m, static_cast<Eigen::Index>(spec.forcing_modes));
  for (Eigen::Index j = 0; j < k; ++j) {
    if (spec.layout == ForcingLayout::Common) {
      for (Eigen::Index i = 0; i < forced; ++i) h(i, j) = profile(i);
    } else {
      const auto i = j % static_cast<Eigen::Index>(spec.forcing_modes);
      if (i < m) h(i, j) = profile(i);
    }
  }
  return h;
}

}  // namespace

void NoiseSpec::validate() const {
  if (kind == NoiseKind::Zero) return;
  if (rates.empty()) throw std::invalid_argument("noise: at least one mark is required");
  for (double r : rates) {
    if (!(r > 0) || !std::isfinite(r)) throw std::invalid_argument("noise: rates must be positive and finite");
  }
  if (uses_forcing(kind) && jump_sizes.size() != rates.size()) {
    throw std::invalid_argument("noise: jump_sizes must have one entry per mark");
  }
  if (uses_state(kind) && multipliers.size() != rates.size()) {
    throw std::invalid_argument("noise: multipliers must have one entry per mark");
  }
  if (uses_forcing(kind) && forcing_modes == 0) throw std::invalid_argument("noise: forcing_modes must be >= 1");
  if (!std::isfinite(decay) || decay < 0) throw std::invalid_argument("noise: decay must be nonnegative");
}

NoiseConstants NoiseSpec::closed_form_constants(int d) const {
  validate();
  NoiseConstants c;
  if (kind == NoiseKind::Zero) return c;
  const std::size_t k = rates.size();
  Eigen::MatrixXd h;
  if (uses_forcing(kind)) h = forcing_directions(*this, build_basis(forcing_modes, d));
  std::vector<double> g_norm(k, 0.0), a(k, 0.0);
  Eigen::VectorXd cross = Eigen::VectorXd::Zero(h.rows());
  double sum_g2 = 0, sum_a2 = 0, sum_g4 = 0, sum_a4 = 0, sum_max4 = 0, sum_both4 = 0;
  bool any_g = false, any_a = false;
  for (std::size_t j = 0; j < k; ++j) {
    const double nu = rates[j];
    if (uses_forcing(kind)) g_norm[j] = std::abs(jump_sizes[j]) * h.col(static_cast<Eigen::Index>(j)).norm();
    if (uses_state(kind)) a[j] = multipliers[j];
    if (uses_forcing(kind) && uses_state(kind)) {
      cross += nu * jump_sizes[j] * a[j] * h.col(static_cast<Eigen::Index>(j));
    }
    const double g2 = g_norm[j] * g_norm[j], a2 = a[j] * a[j];
    any_g = any_g || g2 > 0;
    any_a = any_a || a2 > 0;
    sum_g2 += nu * g2;
    sum_a2 += nu * a2;
    sum_g4 += nu * g2 * g2;
    sum_a4 += nu * a2 * a2;
    sum_max4 += nu * std::max(g2 * g2, a2 * a2);
    sum_both4 += nu * (g2 * g2 + a2 * a2);
  }
  const double s = cross.size() > 0 ? cross.norm() : 0.0;
  c.l2 = sum_a2;
  if (kind == NoiseKind::Saturating) {
    c.l0 = sum_g2 + sum_a2 + 2 * s;
    c.l1 = 0;
    c.l3 = any_g && any_a ? 8 * sum_both4 : (any_g ? sum_g4 : sum_a4);
  } else {
    c.l0 = sum_g2 + s;
    c.l1 = sum_a2 + s;
    c.l3 = any_g && any_a ? 8 * sum_max4 : (any_g ? sum_g4 : sum_a4);
  }
  return c;
}

NoiseCoefficient::NoiseCoefficient(const NoiseSpec& spec, const GalerkinBasis& basis)
    : kind_(spec.kind), level_(basis.size()), rates_(spec.rates) {
  spec.validate();
  const std::size_t k = rates_.size();
  g_.assign(k, 0.0);
  a_.assign(k, 0.0);
  if (uses_forcing(kind_)) g_ = spec.jump_sizes;
  if (uses_state(kind_)) a_ = spec.multipliers;
  if (kind_ == NoiseKind::Zero) rates_.clear();
  directions_ = forcing_directions(spec, basis);
  if (kind_ == NoiseKind::Zero) directions_.resize(static_cast<Eigen::Index>(level_), 0);
  mean_forcing_ = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(level_));
  for (std::size_t j = 0; j < rates_.size(); ++j) {
    mean_forcing_ += rates_[j] * g_[j] * directions_.col(static_cast<Eigen::Index>(j));
    mean_multiplier_ += rates_[j] * a_[j];
  }
}

SpectralField NoiseCoefficient::state_part(const SpectralField& u) const {
  if (kind_ == NoiseKind::Saturating) return (1.0 / std::sqrt(1.0 + l2_sq(u))) * u;
  return u;
}

SpectralField NoiseCoefficient::direction(std::size_t mark) const {
  return SpectralField(Eigen::VectorXd(directions_.col(static_cast<Eigen::Index>(mark))));
}

SpectralField NoiseCoefficient::sigma(double /*t*/, const SpectralField& u, std::size_t mark) const {
  if (u.level() != level_) throw std::invalid_argument("NoiseCoefficient: field level mismatch");
  SpectralField out(level_);
  if (kind_ == NoiseKind::Zero) return out;
  out.coeffs() = g_[mark] * directions_.col(static_cast<Eigen::Index>(mark));
  if (a_[mark] != 0.0) out.coeffs() += a_[mark] * state_part(u).coeffs();
  return out;
}

SpectralField NoiseCoefficient::compensator(double /*t*/, const SpectralField& u) const {
  if (u.level() != level_) throw std::invalid_argument("NoiseCoefficient: field level mismatch");
  SpectralField out(mean_forcing_);
  if (mean_multiplier_ != 0.0) out.coeffs() += mean_multiplier_ * state_part(u).coeffs();
  return out;
}

double NoiseCoefficient::intensity(double t, const SpectralField& u) const {
  double s = 0;
  for (std::size_t j = 0; j < rates_.size(); ++j) s += rates_[j] * l2_sq(sigma(t, u, j));
  return s;
}

SpectralField compensated_increment(const NoiseCoefficient& sigma, const SpectralField& u, double t0, double t1,
                                    const std::vector<JumpEvent>& jumps) {
  if (!(t0 < t1)) throw std::invalid_argument("compensated_increment: requires t0 < t1");
  SpectralField out = (-(t1 - t0)) * sigma.compensator(t0, u);
  if (sigma.is_zero()) return out;
  for (const JumpEvent& e : jumps) out += sigma.sigma(e.t, u, e.mark);
  return out;
}

// ---------------------------------------------------------------------------

namespace {

SpectralField random_in_ball(std::size_t level, double radius, Stream& rng) {
  SpectralField u(level);
  for (std::size_t i = 0; i < level; ++i) u[i] = rng.normal();
  const double n = std::sqrt(l2_sq(u));
  // Radii spread over [0, radius] with extra mass near 0 and near the edge.
  const double pick = rng.uniform();
  double r = radius * rng.uniform();
  if (pick < 0.1) r = radius * std::pow(10.0, -6.0 * rng.uniform());
  if (pick > 0.9) r = radius;
  if (n > 0) u *= r / n;
  return u;
}

bool exceeds(double lhs, double rhs) { return lhs > rhs * (1.0 + 1e-12) + 1e-300; }

// Rounding in |sigma(u) - sigma(v)|^2 when both values are large compared to
// their difference.
double lipschitz_rounding(double lip, double scale) {
  constexpr double eps = std::numeric_limits<double>::epsilon();
  return 4 * eps * std::sqrt(lip * scale) + 4 * eps * eps * scale;
}

}  // namespace

SigmaCertificate validate_sigma(const NoiseCoefficient& sigma, const NoiseConstants& declared,
                                std::size_t sample_count, double radius, double t_max, std::uint64_t seed) {
  if (sample_count < 1000) throw std::invalid_argument("validate_sigma: at least 1000 samples are required");
  SigmaCertificate cert;
  cert.declared = declared;
  cert.samples = sample_count;
  Stream rng(seed);
  const std::size_t m = sigma.level();
  const auto& rates = sigma.rates();

  cert.measured.l0 = sigma.intensity(0.0, SpectralField(m));
  if (exceeds(cert.measured.l0, declared.l0) && !cert.witness) {
    cert.witness = SigmaWitness{"growth", 0.0, SpectralField(m), SpectralField(m), cert.measured.l0, declared.l0};
  }

  for (std::size_t s = 0; s < sample_count; ++s) {
    const double t = t_max * rng.uniform();
    const SpectralField u = random_in_ball(m, radius, rng);
    const SpectralField v = random_in_ball(m, radius, rng);
    const double u2 = l2_sq(u);

    double growth = 0, growth_v = 0, lip = 0, fourth = 0;
    for (std::size_t j = 0; j < rates.size(); ++j) {
      const SpectralField su = sigma.sigma(t, u, j);
      const SpectralField sv = sigma.sigma(t, v, j);
      const double a2 = l2_sq(su);
      growth += rates[j] * a2;
      growth_v += rates[j] * l2_sq(sv);
      fourth += rates[j] * a2 * a2;
      lip += rates[j] * l2_sq(su - sv);
    }
    const double d2 = l2_sq(u - v);

    if (u2 > 0) cert.measured.l1 = std::max(cert.measured.l1, std::max(0.0, growth - declared.l0) / u2);
    if (d2 > 0) cert.measured.l2 = std::max(cert.measured.l2, lip / d2);
    cert.measured.l3 = std::max(cert.measured.l3, fourth / (1.0 + u2 * u2));

    if (cert.witness) continue;
    if (exceeds(growth, declared.l0 + declared.l1 * u2)) {
      cert.witness = SigmaWitness{"growth", t, u, v, growth, declared.l0 + declared.l1 * u2};
    } else if (exceeds(lip - lipschitz_rounding(lip, growth + growth_v), declared.l2 * d2)) {
      cert.witness = SigmaWitness{"lipschitz", t, u, v, lip, declared.l2 * d2};
    } else if (exceeds(fourth, declared.l3 * (1.0 + u2 * u2))) {
      cert.witness = SigmaWitness{"fourth_moment", t, u, v, fourth, declared.l3 * (1.0 + u2 * u2)};
    }
  }
  cert.pass = !cert.witness.has_value();
  return cert;
}

void write_jump_log(std::ostream& os, const std::vector<JumpEvent>& jumps, const std::vector<double>& pre_norms) {
  for (std::size_t i = 0; i < jumps.size(); ++i) {
    nlohmann::json row = {{"t", jumps[i].t}, {"mark", jumps[i].mark}};
    row["pre_norm"] = i < pre_norms.size() ? pre_norms[i] : 0.0;
    os << row.dump() << '\n';
  }
}

}  // namespace bipolar
