#pragma once

#include <cstdint>
#include <vector>

#include "bipolar/basis.hpp"
#include "bipolar/field.hpp"
#include "bipolar/grid.hpp"

namespace bipolar {

/// Constants of the stress tensor
///   T(E) = 2 kappa0 (varkappa + |E|^2)^((p-2)/2) E - 2 kappa1 Laplace E.
struct FluidParams {
  double kappa0 = 0.5;
  double kappa1 = 1.0;
  double varkappa = 1.0;
  double p = 1.5;

  /// Throws std::invalid_argument unless all constants are positive and
  /// p lies in (1, 2].
  void validate() const;
  friend bool operator==(const FluidParams&, const FluidParams&) = default;
};

/// (A u)_i = eigenvalue_i * u_i.
SpectralField apply_A(const SpectralField& u, const GalerkinBasis& basis);

/// Galerkin projection of the shear-thinning stress operator,
///   (A_p u, v) = int Gamma(u) E_ij(u) E_ij(v) dx,
///   Gamma(u)   = (varkappa + |E(u)|^2)^((p-2)/2),
/// evaluated by collocation on an oversampled grid.
class StressOperator {
 public:
  StressOperator(const GalerkinBasis& basis, double varkappa, double p, int oversampling = 4);

  SpectralField apply(const SpectralField& u) const;
  /// int |E(u)|^2 dx by quadrature.
  double strain_energy(const SpectralField& u) const;

  const PhysicalGrid& grid() const { return grid_; }
  double varkappa() const { return varkappa_; }
  double p() const { return p_; }

 private:
  PhysicalGrid grid_;
  double varkappa_;
  double p_;
};

/// Exact Galerkin convection B(u, v) through the interaction tensor
/// T[i][j][k] = b(phi_i, phi_j, phi_k), computed from the wavevector triads.
/// The tensor is antisymmetric in its last two slots by construction.
class ConvectionOperator {
 public:
  explicit ConvectionOperator(const GalerkinBasis& basis);

  std::size_t level() const { return level_; }
  /// (B(u, v))_k = sum_ij u_i v_j T[i][j][k].
  SpectralField apply(const SpectralField& u, const SpectralField& v) const;
  /// b(phi_i, phi_j, phi_k).
  double coefficient(std::size_t i, std::size_t j, std::size_t k) const;
  std::size_t nonzeros() const { return entries_.size(); }

 private:
  struct Entry {
    std::uint32_t i, j, k;
    double value;
  };
  std::size_t level_;
  std::vector<Entry> entries_;  // sorted by (k, i, j)
};

/// b(u, v, w) = int u_i (d_i v_j) w_j dx by exact collocation on a grid with
/// N = 3 kmax + 1 points per direction. Independent of ConvectionOperator.
class TrilinearQuadrature {
 public:
  explicit TrilinearQuadrature(const GalerkinBasis& basis);
  std::size_t level() const { return grid_.modes(); }
  double operator()(const SpectralField& u, const SpectralField& v, const SpectralField& w) const;

 private:
  PhysicalGrid grid_;
};

/// Throws std::invalid_argument on mismatched levels.
double trilinear_b(const TrilinearQuadrature& quad, const SpectralField& u, const SpectralField& v,
                   const SpectralField& w);
SpectralField apply_B(const ConvectionOperator& conv, const SpectralField& u, const SpectralField& v);

/// Estimate of C0 = sup |b(u,v,w)| / (|u| ||v||_1 ||w||_2) over H_m by
/// alternating maximization: for fixed v the best (u, w) is a singular pair
/// of the map u -> A^{-1/2} B(u, v), and symmetrically for fixed u.
double estimate_c0(const ConvectionOperator& conv, const GalerkinBasis& basis, std::uint64_t seed,
                   int restarts = 8, int sweeps = 20);

}  // namespace bipolar
