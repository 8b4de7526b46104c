#include "bipolar/basis.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>
#include <tuple>

#include "bipolar/hash.hpp"

namespace bipolar {
namespace {

bool canonical_half(const std::array<int, 3>& k, int d) {
  for (int i = 0; i < d; ++i) {
    if (k[i] > 0) return true;
    if (k[i] < 0) return false;
  }
  return false;  // k == 0
}

std::array<double, 3> cross(const std::array<double, 3>& a, const std::array<double, 3>& b) {
  return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
}

std::array<double, 3> normalized(std::array<double, 3> v) {
  const double n = std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]);
  for (auto& x : v) x /= n;
  return v;
}

// Unit vectors orthogonal to k. In 2D there is one; in 3D two, built from the
// coordinate axis least aligned with k (lowest index on ties).
std::vector<std::array<double, 3>> polarizations(const std::array<int, 3>& k, int d) {
  if (d == 2) {
    return {normalized({-static_cast<double>(k[1]), static_cast<double>(k[0]), 0.0})};
  }
  const std::array<double, 3> kd{double(k[0]), double(k[1]), double(k[2])};
  int axis = 0;
  for (int i = 1; i < 3; ++i) {
    if (std::abs(k[i]) < std::abs(k[axis])) axis = i;
  }
  std::array<double, 3> a{0.0, 0.0, 0.0};
  a[axis] = 1.0;
  const auto e1 = normalized(cross(kd, a));
  const auto e2 = normalized(cross(normalized(kd), e1));
  return {e1, e2};
}

void append_shell(int k2, int d, std::vector<Mode>& out) {
  const int r = static_cast<int>(std::floor(std::sqrt(double(k2)))) + 1;
  std::vector<std::array<int, 3>> ks;
  for (int a = -r; a <= r; ++a) {
    for (int b = -r; b <= r; ++b) {
      const int c_lo = (d == 3) ? -r : 0;
      const int c_hi = (d == 3) ? r : 0;
      for (int c = c_lo; c <= c_hi; ++c) {
        std::array<int, 3> k{a, b, c};
        if (a * a + b * b + c * c != k2 || !canonical_half(k, d)) continue;
        ks.push_back(k);
      }
    }
  }
  std::sort(ks.begin(), ks.end());
  for (const auto& k : ks) {
    const auto pols = polarizations(k, d);
    for (int pi = 0; pi < static_cast<int>(pols.size()); ++pi) {
      for (Phase ph : {Phase::Cos, Phase::Sin}) {
        Mode mode;
        mode.k = k;
        mode.e = pols[pi];
        mode.polarization = pi;
        mode.phase = ph;
        mode.k2 = k2;
        mode.eigenvalue = mode_eigenvalue(k2);
        mode.h1 = double(k2);
        out.push_back(mode);
      }
    }
  }
}

}  // namespace

double mode_eigenvalue(int k2) { return 0.5 * double(k2) * double(k2); }

GalerkinBasis::GalerkinBasis(int dim, std::vector<Mode> modes) : dim_(dim), modes_(std::move(modes)) {}

int GalerkinBasis::max_wavenumber() const {
  int kmax = 0;
  for (const auto& m : modes_) {
    for (int i = 0; i < dim_; ++i) kmax = std::max(kmax, std::abs(m.k[i]));
  }
  return kmax;
}

std::string GalerkinBasis::mode_table_hash() const {
  std::string text = "d=" + std::to_string(dim_) + "\n";
  char buf[160];
  for (const auto& m : modes_) {
    std::snprintf(buf, sizeof buf, "%d %d %d %d %d %.17g %.17g %.17g\n", m.k[0], m.k[1], m.k[2],
                  m.polarization, static_cast<int>(m.phase), m.e[0], m.e[1], m.e[2]);
    text += buf;
  }
  return sha256_hex(text);
}

GalerkinBasis build_basis(std::size_t m, int d) {
  if (d != 2 && d != 3) throw std::invalid_argument("build_basis: dimension must be 2 or 3");
  if (m == 0) throw std::invalid_argument("build_basis: m must be at least 1");
  std::vector<Mode> modes;
  for (int k2 = 1; modes.size() < m; ++k2) append_shell(k2, d, modes);
  modes.resize(m);
  return GalerkinBasis(d, std::move(modes));
}

double poincare_lambda1(const GalerkinBasis& basis) {
  if (basis.size() == 0) throw std::invalid_argument("poincare_lambda1: empty basis");
  double best = INFINITY;
  for (const auto& m : basis.modes()) best = std::min(best, m.eigenvalue / m.h1);
  return best;
}

nlohmann::json basis_to_json(const GalerkinBasis& basis) {
  nlohmann::json modes = nlohmann::json::array();
  for (std::size_t i = 0; i < basis.size(); ++i) {
    const auto& m = basis[i];
    const int d = basis.dim();
    nlohmann::json k = nlohmann::json::array();
    nlohmann::json e = nlohmann::json::array();
    for (int j = 0; j < d; ++j) {
      k.push_back(m.k[j]);
      e.push_back(m.e[j]);
    }
    modes.push_back({{"index", i},
                     {"k", k},
                     {"polarization", m.polarization},
                     {"phase", m.phase == Phase::Cos ? "cos" : "sin"},
                     {"e", e},
                     {"k2", m.k2},
                     {"eigenvalue", m.eigenvalue},
                     {"h1", m.h1}});
  }
  return {{"dim", basis.dim()},
          {"m", basis.size()},
          {"lambda1", poincare_lambda1(basis)},
          {"mode_table_hash", basis.mode_table_hash()},
          {"modes", modes}};
}

}  // namespace bipolar
