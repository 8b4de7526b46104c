#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <vector>

#include <json.hpp>

namespace bipolar {

enum class Phase { Cos = 0, Sin = 1 };

/// One real divergence-free Fourier mode on the periodic cell [0, 2pi)^d:
///   phi(x) = norm * e * cos(k.x)   or   norm * e * sin(k.x),
/// with norm = sqrt(2 / (2pi)^d) so that (phi, phi) = 1.
struct Mode {
  std::array<int, 3> k{0, 0, 0};
  std::array<double, 3> e{0.0, 0.0, 0.0};
  int polarization = 0;
  Phase phase = Phase::Cos;
  int k2 = 0;             // |k|^2
  double eigenvalue = 0;  // a(phi, phi)
  double h1 = 0;          // ||phi||_1^2 = int |grad phi|^2
};

/// Ordered orthonormal divergence-free basis of H_m.
///
/// Ordering is nondecreasing in the eigenvalue, ties broken by
/// (|k|^2, k lexicographic, polarization, phase). Only one representative of
/// each pair {k, -k} is kept: the one whose first nonzero component is
/// positive. The level-m basis is always a prefix of the level-m' basis.
class GalerkinBasis {
 public:
  GalerkinBasis() = default;
  GalerkinBasis(int dim, std::vector<Mode> modes);

  int dim() const { return dim_; }
  std::size_t size() const { return modes_.size(); }
  const Mode& operator[](std::size_t i) const { return modes_[i]; }
  const std::vector<Mode>& modes() const { return modes_; }

  double eigenvalue(std::size_t i) const { return modes_[i].eigenvalue; }
  /// Largest absolute wavevector component over the basis.
  int max_wavenumber() const;
  /// SHA-256 of the canonical mode table text.
  std::string mode_table_hash() const;

 private:
  int dim_ = 2;
  std::vector<Mode> modes_;
};

/// a(phi, phi) = int d_k E_ij(phi) d_k E_ij(phi) dx for a unit mode. For a
/// divergence-free plane wave this is |k|^4 / 2.
double mode_eigenvalue(int k2);

/// First m modes in canonical order. Throws std::invalid_argument for
/// d not in {2, 3} or m == 0.
GalerkinBasis build_basis(std::size_t m, int d);

/// min_i ||phi_i||_2^2 / ||phi_i||_1^2.
double poincare_lambda1(const GalerkinBasis& basis);

nlohmann::json basis_to_json(const GalerkinBasis& basis);

constexpr double kTwoPi = 6.283185307179586476925286766559;

}  // namespace bipolar
