#include "bipolar/operators.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <map>
#include <stdexcept>
#include <string>
#include <tuple>

#include "bipolar/rng.hpp"

namespace bipolar {

void FluidParams::validate() const {
  if (!(kappa0 > 0)) throw std::invalid_argument("kappa0 must be positive");
  if (!(kappa1 > 0)) throw std::invalid_argument("kappa1 must be positive");
  if (!(varkappa > 0)) throw std::invalid_argument("varkappa must be positive");
  if (!(p > 1.0 && p <= 2.0)) {
    throw std::invalid_argument("p = " + std::to_string(p) + " outside the admissible interval (1,2]");
  }
}

SpectralField apply_A(const SpectralField& u, const GalerkinBasis& basis) {
  if (u.level() > basis.size()) throw std::invalid_argument("apply_A: field level exceeds basis");
  SpectralField out(u.level());
  for (std::size_t i = 0; i < u.level(); ++i) out[i] = basis.eigenvalue(i) * u[i];
  return out;
}

// ---------------------------------------------------------------------------

StressOperator::StressOperator(const GalerkinBasis& basis, double varkappa, double p, int oversampling)
    : grid_(basis, stress_grid_size(basis, oversampling)), varkappa_(varkappa), p_(p) {
  if (!(varkappa > 0)) throw std::invalid_argument("StressOperator: varkappa must be positive");
}

SpectralField StressOperator::apply(const SpectralField& u) const {
  Eigen::MatrixXd e = grid_.strain(u);
  const Eigen::VectorXd frob = e.array().square().matrix() * grid_.strain_multiplicity();
  if (p_ != 2.0) {
    const double expo = 0.5 * (p_ - 2.0);
    const Eigen::ArrayXd gamma = (varkappa_ + frob.array()).pow(expo);
    e.array().colwise() *= gamma;
  }
  return SpectralField(grid_.strain_adjoint(e));
}

double StressOperator::strain_energy(const SpectralField& u) const {
  const Eigen::MatrixXd e = grid_.strain(u);
  return grid_.integrate(e.array().square().matrix() * grid_.strain_multiplicity());
}

// ---------------------------------------------------------------------------

namespace {

using cd = std::complex<double>;

// Coefficients alpha_s of phi = sum_{s = +-1} alpha_s e exp(i s k.x), without
// the normalization constant.
std::array<cd, 2> expansion(Phase ph) {
  if (ph == Phase::Cos) return {cd(0.5, 0.0), cd(0.5, 0.0)};
  return {cd(0.0, -0.5), cd(0.0, 0.5)};  // s = +1, s = -1
}

double dot(const std::array<double, 3>& a, const std::array<int, 3>& b, int d) {
  double s = 0;
  for (int i = 0; i < d; ++i) s += a[i] * b[i];
  return s;
}

double dot(const std::array<double, 3>& a, const std::array<double, 3>& b, int d) {
  double s = 0;
  for (int i = 0; i < d; ++i) s += a[i] * b[i];
  return s;
}

}  // namespace

ConvectionOperator::ConvectionOperator(const GalerkinBasis& basis) : level_(basis.size()) {
  const int d = basis.dim();
  const auto m = basis.size();
  const double norm3 = std::pow(2.0 / std::pow(kTwoPi, d), 1.5);
  const double volume = std::pow(kTwoPi, d);
  const int signs[2] = {1, -1};

  // raw[(i, j, k)] = b(phi_i, phi_j, phi_k) from the triad sum.
  std::map<std::tuple<std::uint32_t, std::uint32_t, std::uint32_t>, double> raw;
  for (std::size_t i = 0; i < m; ++i) {
    const Mode& a = basis[i];
    const auto ea = expansion(a.phase);
    for (std::size_t j = 0; j < m; ++j) {
      const Mode& b = basis[j];
      const double advect = dot(a.e, b.k, d);  // e_a . k_b
      if (advect == 0.0) continue;
      const auto eb = expansion(b.phase);
      for (std::size_t k = 0; k < m; ++k) {
        const Mode& c = basis[k];
        const double align = dot(b.e, c.e, d);  // e_b . e_c
        if (align == 0.0) continue;
        const auto ec = expansion(c.phase);
        cd total(0.0, 0.0);
        for (int s1 = 0; s1 < 2; ++s1) {
          for (int s2 = 0; s2 < 2; ++s2) {
            for (int s3 = 0; s3 < 2; ++s3) {
              bool resonant = true;
              for (int x = 0; x < d && resonant; ++x) {
                resonant = signs[s1] * a.k[x] + signs[s2] * b.k[x] + signs[s3] * c.k[x] == 0;
              }
              if (!resonant) continue;
              total += ea[s1] * eb[s2] * ec[s3] * cd(0.0, double(signs[s2]));
            }
          }
        }
        const double value = total.real() * advect * align * norm3 * volume;
        if (value != 0.0) raw[{std::uint32_t(i), std::uint32_t(j), std::uint32_t(k)}] = value;
      }
    }
  }

  // Enforce T[i][j][k] = -T[i][k][j] exactly.
  std::map<std::tuple<std::uint32_t, std::uint32_t, std::uint32_t>, double> anti;
  for (const auto& [key, value] : raw) {
    const auto [i, j, k] = key;
    if (j == k) continue;
    const auto it = raw.find({i, k, j});
    const double partner = it == raw.end() ? 0.0 : it->second;
    const double sym = 0.5 * (value - partner);
    anti[{i, j, k}] = sym;
    anti[{i, k, j}] = -sym;
  }
  for (const auto& [key, value] : anti) {
    if (value == 0.0) continue;
    const auto [i, j, k] = key;
    entries_.push_back({i, j, k, value});
  }
  std::sort(entries_.begin(), entries_.end(), [](const Entry& x, const Entry& y) {
    return std::tie(x.k, x.i, x.j) < std::tie(y.k, y.i, y.j);
  });
}

SpectralField ConvectionOperator::apply(const SpectralField& u, const SpectralField& v) const {
  if (u.level() != level_ || v.level() != level_) {
    throw std::invalid_argument("ConvectionOperator: field levels must match the operator level");
  }
  SpectralField out(level_);
  const double* uc = u.coeffs().data();
  const double* vc = v.coeffs().data();
  double* oc = out.coeffs().data();
  for (const Entry& e : entries_) oc[e.k] += e.value * uc[e.i] * vc[e.j];
  return out;
}

double ConvectionOperator::coefficient(std::size_t i, std::size_t j, std::size_t k) const {
  const auto it = std::lower_bound(entries_.begin(), entries_.end(), std::make_tuple(k, i, j),
                                   [](const Entry& e, const std::tuple<std::size_t, std::size_t, std::size_t>& key) {
                                     return std::make_tuple(std::size_t(e.k), std::size_t(e.i), std::size_t(e.j)) <
                                            key;
                                   });
  if (it != entries_.end() && it->k == k && it->i == i && it->j == j) return it->value;
  return 0.0;
}

SpectralField apply_B(const ConvectionOperator& conv, const SpectralField& u, const SpectralField& v) {
  if (u.level() != v.level()) throw std::invalid_argument("apply_B: mismatched levels");
  return conv.apply(u, v);
}

// ---------------------------------------------------------------------------

TrilinearQuadrature::TrilinearQuadrature(const GalerkinBasis& basis)
    : grid_(basis, triple_product_grid_size(basis)) {}

double TrilinearQuadrature::operator()(const SpectralField& u, const SpectralField& v,
                                       const SpectralField& w) const {
  const int d = grid_.dim();
  const Eigen::MatrixXd uu = grid_.velocity(u);
  const Eigen::MatrixXd gv = grid_.gradient(v);  // column l * d + j holds d_j v_l
  const Eigen::MatrixXd ww = grid_.velocity(w);
  Eigen::VectorXd integrand = Eigen::VectorXd::Zero(grid_.points());
  for (int l = 0; l < d; ++l) {
    for (int j = 0; j < d; ++j) {
      integrand.array() += uu.col(j).array() * gv.col(l * d + j).array() * ww.col(l).array();
    }
  }
  return grid_.integrate(integrand);
}

double trilinear_b(const TrilinearQuadrature& quad, const SpectralField& u, const SpectralField& v,
                   const SpectralField& w) {
  if (u.level() != v.level() || v.level() != w.level()) {
    throw std::invalid_argument("trilinear_b: mismatched levels");
  }
  if (u.level() != quad.level()) throw std::invalid_argument("trilinear_b: quadrature level mismatch");
  return quad(u, v, w);
}

// ---------------------------------------------------------------------------

namespace {

// (M)_{k, i} = sum_j T[i][j][k] v_j  when fixed_slot == 1 (v fixed, u free)
// (N)_{k, j} = sum_i T[i][j][k] u_i  when fixed_slot == 0 (u fixed, v free)
Eigen::MatrixXd slice(const ConvectionOperator& conv, const Eigen::VectorXd& fixed, int fixed_slot) {
  const auto m = static_cast<Eigen::Index>(conv.level());
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(m, m);
  for (Eigen::Index col = 0; col < m; ++col) {
    SpectralField probe = SpectralField::unit(conv.level(), static_cast<std::size_t>(col));
    SpectralField other{Eigen::VectorXd(fixed)};
    const SpectralField b = fixed_slot == 1 ? conv.apply(probe, other) : conv.apply(other, probe);
    out.col(col) = b.coeffs();
  }
  return out;
}

}  // namespace

double estimate_c0(const ConvectionOperator& conv, const GalerkinBasis& basis, std::uint64_t seed, int restarts,
                   int sweeps) {
  const auto m = static_cast<Eigen::Index>(conv.level());
  Eigen::VectorXd inv_sqrt_a(m), inv_sqrt_h(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    inv_sqrt_a[i] = 1.0 / std::sqrt(basis.eigenvalue(static_cast<std::size_t>(i)));
    inv_sqrt_h[i] = 1.0 / std::sqrt(basis[static_cast<std::size_t>(i)].h1);
  }
  Stream rng(seed);
  double best = 0.0;
  for (int r = 0; r < restarts; ++r) {
    Eigen::VectorXd v(m);
    for (Eigen::Index i = 0; i < m; ++i) v[i] = rng.normal() * inv_sqrt_h[i];
    for (int s = 0; s < sweeps; ++s) {
      // Best u for this v.
      const Eigen::MatrixXd mv = inv_sqrt_a.asDiagonal() * slice(conv, v, 1);
      Eigen::JacobiSVD<Eigen::MatrixXd> svd_u(mv, Eigen::ComputeFullV);
      const double h1v = std::sqrt((v.array().square() / inv_sqrt_h.array().square()).sum());
      if (h1v == 0.0) break;
      best = std::max(best, svd_u.singularValues()[0] / h1v);
      const Eigen::VectorXd u = svd_u.matrixV().col(0);
      // Best v for this u, in the variable y = H^{1/2} v.
      const Eigen::MatrixXd nu = inv_sqrt_a.asDiagonal() * slice(conv, u, 0) * inv_sqrt_h.asDiagonal();
      Eigen::JacobiSVD<Eigen::MatrixXd> svd_v(nu, Eigen::ComputeFullV);
      best = std::max(best, svd_v.singularValues()[0] / u.norm());
      v = inv_sqrt_h.asDiagonal() * svd_v.matrixV().col(0);
    }
  }
  return best;
}

}  // namespace bipolar
