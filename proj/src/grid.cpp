#include "bipolar/grid.hpp"

#include <cmath>
#include <stdexcept>

namespace bipolar {

PhysicalGrid::PhysicalGrid(const GalerkinBasis& basis, int n_per_dim) : dim_(basis.dim()), n_(n_per_dim) {
  if (n_per_dim < 1) throw std::invalid_argument("PhysicalGrid: grid size must be positive");
  const int d = dim_;
  const auto m = static_cast<Eigen::Index>(basis.size());
  Eigen::Index p_count = 1;
  for (int i = 0; i < d; ++i) p_count *= n_;
  weight_ = std::pow(kTwoPi / n_, d);

  for (int a = 0; a < d; ++a) {
    for (int b = a; b < d; ++b) strain_pairs_.emplace_back(a, b);
  }
  const auto c_count = static_cast<Eigen::Index>(strain_pairs_.size());
  strain_mult_.resize(c_count);
  for (Eigen::Index c = 0; c < c_count; ++c) {
    strain_mult_[c] = strain_pairs_[c].first == strain_pairs_[c].second ? 1.0 : 2.0;
  }

  const double norm = std::sqrt(2.0 / std::pow(kTwoPi, d));
  profile_.resize(p_count, m);
  dprofile_.resize(p_count, m);
  polar_.resize(m, d);
  grad_coef_.resize(m, d * d);
  strain_coef_.resize(m, c_count);

  for (Eigen::Index i = 0; i < m; ++i) {
    const Mode& mode = basis[static_cast<std::size_t>(i)];
    for (int l = 0; l < d; ++l) {
      polar_(i, l) = mode.e[l];
      for (int j = 0; j < d; ++j) grad_coef_(i, l * d + j) = mode.e[l] * mode.k[j];
    }
    for (Eigen::Index c = 0; c < c_count; ++c) {
      const auto [a, b] = strain_pairs_[c];
      strain_coef_(i, c) = 0.5 * (mode.e[a] * mode.k[b] + mode.e[b] * mode.k[a]);
    }
  }

  const double h = kTwoPi / n_;
  for (Eigen::Index p = 0; p < p_count; ++p) {
    Eigen::Index rem = p;
    std::array<double, 3> x{0.0, 0.0, 0.0};
    for (int a = d - 1; a >= 0; --a) {
      x[a] = h * static_cast<double>(rem % n_);
      rem /= n_;
    }
    for (Eigen::Index i = 0; i < m; ++i) {
      const Mode& mode = basis[static_cast<std::size_t>(i)];
      double theta = 0;
      for (int a = 0; a < d; ++a) theta += mode.k[a] * x[a];
      const double c = std::cos(theta);
      const double s = std::sin(theta);
      if (mode.phase == Phase::Cos) {
        profile_(p, i) = norm * c;
        dprofile_(p, i) = -norm * s;
      } else {
        profile_(p, i) = norm * s;
        dprofile_(p, i) = norm * c;
      }
    }
  }
}

Eigen::MatrixXd PhysicalGrid::velocity(const SpectralField& u) const {
  if (u.level() != modes()) throw std::invalid_argument("PhysicalGrid: field level mismatch");
  return profile_ * (u.coeffs().asDiagonal() * polar_);
}

Eigen::MatrixXd PhysicalGrid::gradient(const SpectralField& u) const {
  if (u.level() != modes()) throw std::invalid_argument("PhysicalGrid: field level mismatch");
  return dprofile_ * (u.coeffs().asDiagonal() * grad_coef_);
}

Eigen::MatrixXd PhysicalGrid::strain(const SpectralField& u) const {
  if (u.level() != modes()) throw std::invalid_argument("PhysicalGrid: field level mismatch");
  return dprofile_ * (u.coeffs().asDiagonal() * strain_coef_);
}

Eigen::VectorXd PhysicalGrid::strain_adjoint(const Eigen::MatrixXd& g) const {
  const Eigen::MatrixXd r = dprofile_.transpose() * g;  // m x C
  return weight_ * (r.cwiseProduct(strain_coef_) * strain_mult_);
}

int stress_grid_size(const GalerkinBasis& basis, int oversampling) {
  return oversampling * 2 * std::max(1, basis.max_wavenumber());
}

int triple_product_grid_size(const GalerkinBasis& basis) { return 3 * basis.max_wavenumber() + 1; }

}  // namespace bipolar
