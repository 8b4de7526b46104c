#include "bipolar/field.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace bipolar {
namespace {

void require_level(const SpectralField& u, const GalerkinBasis& basis) {
  if (u.level() > basis.size()) throw std::invalid_argument("field level exceeds basis size");
}

}  // namespace

SpectralField& SpectralField::operator+=(const SpectralField& o) {
  if (o.level() != level()) throw std::invalid_argument("level mismatch in field addition");
  c_ += o.c_;
  return *this;
}

SpectralField& SpectralField::operator-=(const SpectralField& o) {
  if (o.level() != level()) throw std::invalid_argument("level mismatch in field subtraction");
  c_ -= o.c_;
  return *this;
}

SpectralField operator+(SpectralField a, const SpectralField& b) { return a += b; }
SpectralField operator-(SpectralField a, const SpectralField& b) { return a -= b; }
SpectralField operator*(double s, SpectralField a) { return a *= s; }

double inner(const SpectralField& a, const SpectralField& b) {
  const auto n = static_cast<Eigen::Index>(std::min(a.level(), b.level()));
  return a.coeffs().head(n).dot(b.coeffs().head(n));
}

SpectralField project(const SpectralField& u, std::size_t m) {
  if (m > u.level()) throw std::invalid_argument("project: target level exceeds field level");
  return SpectralField(Eigen::VectorXd(u.coeffs().head(static_cast<Eigen::Index>(m))));
}

SpectralField prolong(const SpectralField& u, std::size_t level) {
  if (level < u.level()) throw std::invalid_argument("prolong: target level below field level");
  SpectralField out(level);
  out.coeffs().head(u.coeffs().size()) = u.coeffs();
  return out;
}

double l2_sq(const SpectralField& u) { return u.coeffs().squaredNorm(); }

double h1_sq(const SpectralField& u, const GalerkinBasis& basis) {
  require_level(u, basis);
  double s = 0;
  for (std::size_t i = 0; i < u.level(); ++i) s += basis[i].h1 * u[i] * u[i];
  return s;
}

double h2_sq(const SpectralField& u, const GalerkinBasis& basis) {
  require_level(u, basis);
  double s = 0;
  for (std::size_t i = 0; i < u.level(); ++i) s += basis[i].eigenvalue * u[i] * u[i];
  return s;
}

double dual_norm(const SpectralField& f, const GalerkinBasis& basis) {
  require_level(f, basis);
  double s = 0;
  for (std::size_t i = 0; i < f.level(); ++i) s += f[i] * f[i] / basis[i].eigenvalue;
  return std::sqrt(s);
}

Norms norms(const SpectralField& u, const GalerkinBasis& basis) {
  return {std::sqrt(l2_sq(u)), std::sqrt(h1_sq(u, basis)), std::sqrt(h2_sq(u, basis))};
}

}  // namespace bipolar
