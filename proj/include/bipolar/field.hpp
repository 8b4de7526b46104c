#pragma once

#include <cstddef>

#include <Eigen/Dense>

#include "bipolar/basis.hpp"

namespace bipolar {

/// A divergence-free field in H_m, stored as coefficients on the first m
/// basis modes. The physical field is sum_i c_i phi_i.
class SpectralField {
 public:
  SpectralField() = default;
  explicit SpectralField(std::size_t level) : c_(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(level))) {}
  explicit SpectralField(Eigen::VectorXd coeffs) : c_(std::move(coeffs)) {}

  static SpectralField unit(std::size_t level, std::size_t mode, double amplitude = 1.0) {
    SpectralField f(level);
    f.c_[static_cast<Eigen::Index>(mode)] = amplitude;
    return f;
  }

  std::size_t level() const { return static_cast<std::size_t>(c_.size()); }
  const Eigen::VectorXd& coeffs() const { return c_; }
  Eigen::VectorXd& coeffs() { return c_; }
  double operator[](std::size_t i) const { return c_[static_cast<Eigen::Index>(i)]; }
  double& operator[](std::size_t i) { return c_[static_cast<Eigen::Index>(i)]; }

  SpectralField& operator+=(const SpectralField& o);
  SpectralField& operator-=(const SpectralField& o);
  SpectralField& operator*=(double s) {
    c_ *= s;
    return *this;
  }

  bool all_finite() const { return c_.allFinite(); }

  friend bool operator==(const SpectralField& a, const SpectralField& b) {
    return a.c_.size() == b.c_.size() && a.c_ == b.c_;
  }

 private:
  Eigen::VectorXd c_;
};

SpectralField operator+(SpectralField a, const SpectralField& b);
SpectralField operator-(SpectralField a, const SpectralField& b);
SpectralField operator*(double s, SpectralField a);

/// L2 inner product; fields of different levels compare by zero padding.
double inner(const SpectralField& a, const SpectralField& b);

/// Pi_m u: keep the first m coefficients. Throws if m exceeds the level.
SpectralField project(const SpectralField& u, std::size_t m);

/// Zero-pad a field to a higher level (the inclusion H_m -> H_M).
SpectralField prolong(const SpectralField& u, std::size_t level);

struct Norms {
  double l2 = 0;  // |u|
  double h1 = 0;  // ||u||_1, from int |grad u|^2
  double h2 = 0;  // ||u||_2, from the a-form <A u, u>
};

Norms norms(const SpectralField& u, const GalerkinBasis& basis);
double l2_sq(const SpectralField& u);
double h1_sq(const SpectralField& u, const GalerkinBasis& basis);
double h2_sq(const SpectralField& u, const GalerkinBasis& basis);
/// sup_w <f, w> / ||w||_2 over H_m, for the V* norm.
double dual_norm(const SpectralField& f, const GalerkinBasis& basis);

}  // namespace bipolar
