#pragma once

#include <cstddef>
#include <vector>

#include <Eigen/Dense>

#include "bipolar/basis.hpp"
#include "bipolar/field.hpp"

namespace bipolar {

/// Uniform N^d collocation grid on [0, 2pi)^d with the basis modes sampled on
/// it. For basis mode i with profile s_i(x) = norm * trig(k_i . x):
///   velocity   phi_i(x)      = e_i s_i(x)
///   gradient   d_j (phi_i)_l = e_il k_ij s_i'(x)
///   strain     E_ab(phi_i)   = (e_ia k_ib + e_ib k_ia) / 2 * s_i'(x)
/// The trapezoid rule on this grid integrates trigonometric polynomials with
/// all frequencies below N exactly.
class PhysicalGrid {
 public:
  PhysicalGrid(const GalerkinBasis& basis, int n_per_dim);

  int n_per_dim() const { return n_; }
  int dim() const { return dim_; }
  Eigen::Index points() const { return profile_.rows(); }
  std::size_t modes() const { return static_cast<std::size_t>(profile_.cols()); }
  double weight() const { return weight_; }
  /// Number of independent strain components, d(d+1)/2.
  int strain_components() const { return static_cast<int>(strain_pairs_.size()); }
  /// 1 for diagonal components, 2 for off-diagonal ones (Frobenius weights).
  const Eigen::VectorXd& strain_multiplicity() const { return strain_mult_; }

  /// Point values of the velocity, P x d.
  Eigen::MatrixXd velocity(const SpectralField& u) const;
  /// Point values of d_j u_l stored at column l * d + j, P x d^2.
  Eigen::MatrixXd gradient(const SpectralField& u) const;
  /// Point values of the independent strain components, P x C.
  Eigen::MatrixXd strain(const SpectralField& u) const;
  /// r_i = w * sum_x sum_c mult_c G_c(x) E_c(phi_i)(x): the Galerkin
  /// projection of the tensor field G tested against each mode's strain.
  Eigen::VectorXd strain_adjoint(const Eigen::MatrixXd& g) const;

  /// Quadrature of a point field against the squared Frobenius norm etc.
  double integrate(const Eigen::VectorXd& point_values) const { return weight_ * point_values.sum(); }

 private:
  int dim_;
  int n_;
  double weight_;
  std::vector<std::pair<int, int>> strain_pairs_;
  Eigen::VectorXd strain_mult_;
  Eigen::MatrixXd profile_;     // P x m, s_i(x_p)
  Eigen::MatrixXd dprofile_;    // P x m, s_i'(x_p)
  Eigen::MatrixXd polar_;       // m x d, e_i
  Eigen::MatrixXd grad_coef_;   // m x d^2, e_il k_ij
  Eigen::MatrixXd strain_coef_; // m x C
};

/// Grid size used for the nonlinear stress quadrature: oversampling factor
/// times the Nyquist size 2 * kmax of the mode set.
int stress_grid_size(const GalerkinBasis& basis, int oversampling = 4);

/// Smallest grid on which the product of three basis modes is integrated
/// exactly: N = 3 * kmax + 1.
int triple_product_grid_size(const GalerkinBasis& basis);

}  // namespace bipolar
