#include <doctest.h>

#include <cmath>
#include <random>
#include <stdexcept>

#include "bipolar/basis.hpp"
#include "bipolar/field.hpp"
#include "bipolar/rng.hpp"
#include "oracles.hpp"

using namespace bipolar;

TEST_CASE("build_basis rejects bad arguments") {
  CHECK_THROWS_AS(build_basis(4, 1), std::invalid_argument);
  CHECK_THROWS_AS(build_basis(4, 4), std::invalid_argument);
  CHECK_THROWS_AS(build_basis(0, 2), std::invalid_argument);
}

TEST_CASE("modes are divergence free and ordered") {
  for (int d : {2, 3}) {
    const auto basis = build_basis(64, d);
    REQUIRE(basis.size() == 64);
    for (std::size_t i = 0; i < basis.size(); ++i) {
      const Mode& m = basis[i];
      double ke = 0, ee = 0;
      for (int a = 0; a < d; ++a) {
        ke += m.k[a] * m.e[a];
        ee += m.e[a] * m.e[a];
      }
      CHECK(ke == 0.0);
      CHECK(ee == doctest::Approx(1.0).epsilon(1e-15));
      CHECK(m.eigenvalue > 0);
      if (i > 0) CHECK(basis.eigenvalue(i) >= basis.eigenvalue(i - 1));
    }
  }
}

TEST_CASE("single mode level 1 has |k| = 1 and the smallest a-form ratio") {
  const auto basis = build_basis(1, 2);
  CHECK(basis[0].k2 == 1);
  const double quad = oracle::a_form(basis[0], basis[0], 2, 128);
  // frozen: a-form of a unit |k| = 1 mode by 128^2 quadrature
  CHECK(quad == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(basis.eigenvalue(0) == doctest::Approx(quad).epsilon(1e-12));
  const auto big = build_basis(64, 2);
  for (const auto& m : big.modes()) CHECK(m.eigenvalue >= basis.eigenvalue(0));
}

TEST_CASE("eigenvalues match the quadrature a-form") {
  const auto basis = build_basis(36, 2);
  for (std::size_t i = 0; i < basis.size(); ++i) {
    const double quad = oracle::a_form(basis[i], basis[i], 2, 128);
    CHECK(basis.eigenvalue(i) == doctest::Approx(quad).epsilon(1e-11));
    CHECK(basis[i].h1 == doctest::Approx(oracle::h1_form(basis[i], basis[i], 2, 128)).epsilon(1e-11));
  }
  const auto b3 = build_basis(24, 3);
  for (std::size_t i = 0; i < b3.size(); ++i) {
    CHECK(b3.eigenvalue(i) == doctest::Approx(oracle::a_form(b3[i], b3[i], 3, 24)).epsilon(1e-11));
  }
}

TEST_CASE("level 8 consists of the |k|^2 = 1 and |k|^2 = 2 shells with identity Gram matrix") {
  const auto basis = build_basis(8, 2);
  for (std::size_t i = 0; i < 4; ++i) CHECK(basis[i].k2 == 1);
  for (std::size_t i = 4; i < 8; ++i) CHECK(basis[i].k2 == 2);
  for (std::size_t i = 0; i < 8; ++i) {
    for (std::size_t j = 0; j < 8; ++j) {
      const double g = oracle::l2_form(basis[i], basis[j], 2, 128);
      CHECK(std::abs(g - (i == j ? 1.0 : 0.0)) < 1e-12);
    }
  }
}

TEST_CASE("Gram matrix is the identity at larger levels") {
  for (int d : {2, 3}) {
    const auto basis = build_basis(d == 2 ? 32 : 18, d);
    const int n = d == 2 ? 32 : 12;
    double worst = 0;
    for (std::size_t i = 0; i < basis.size(); ++i) {
      for (std::size_t j = i; j < basis.size(); ++j) {
        const double g = oracle::l2_form(basis[i], basis[j], d, n);
        worst = std::max(worst, std::abs(g - (i == j ? 1.0 : 0.0)));
      }
    }
    CHECK(worst < 1e-12);
  }
}

TEST_CASE("basis nesting up to level 64") {
  for (int d : {2, 3}) {
    const auto full = build_basis(64, d);
    for (std::size_t m = 1; m < 64; ++m) {
      const auto part = build_basis(m, d);
      for (std::size_t i = 0; i < m; ++i) {
        CHECK(part[i].k == full[i].k);
        CHECK(part[i].e == full[i].e);
        CHECK(part[i].phase == full[i].phase);
        CHECK(part[i].polarization == full[i].polarization);
      }
    }
  }
}

TEST_CASE("mode table hash depends only on the mode table") {
  CHECK(build_basis(16, 2).mode_table_hash() == build_basis(16, 2).mode_table_hash());
  CHECK(build_basis(16, 2).mode_table_hash() != build_basis(17, 2).mode_table_hash());
  const auto j = basis_to_json(build_basis(4, 2));
  CHECK(j["m"] == 4);
  CHECK(j["modes"].size() == 4);
  CHECK(j["lambda1"].get<double>() == doctest::Approx(0.5));
}

TEST_CASE("Parseval against physical quadrature") {
  const auto basis = build_basis(20, 2);
  Stream rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    SpectralField u(20);
    for (std::size_t i = 0; i < 20; ++i) u[i] = rng.normal();
    const double quad = oracle::field_l2_sq(basis, u.coeffs(), 32);
    CHECK(std::abs(quad - l2_sq(u)) <= 1e-10 * l2_sq(u));
  }
}

TEST_CASE("projection properties") {
  Stream rng(3);
  SpectralField u(16);
  for (std::size_t i = 0; i < 16; ++i) u[i] = rng.normal();
  CHECK(project(u, 16) == u);
  CHECK_THROWS_AS(project(u, 17), std::invalid_argument);
  for (std::size_t m = 1; m <= 16; ++m) {
    const SpectralField pu = project(u, m);
    CHECK(pu.level() == m);
    CHECK(l2_sq(pu) <= l2_sq(u));
    const SpectralField rest = u - prolong(pu, 16);
    CHECK(std::abs(inner(rest, pu)) < 1e-14);
    CHECK(project(prolong(pu, 16), m) == pu);
  }
}

TEST_CASE("fields at different levels compare by zero padding") {
  SpectralField a(3), b(5);
  a[0] = 1;
  a[2] = 2;
  b[0] = 3;
  b[2] = 5;
  b[4] = 100;
  CHECK(inner(a, b) == 13.0);
  CHECK_THROWS_AS(a += b, std::invalid_argument);
}

TEST_CASE("norms") {
  const auto basis = build_basis(16, 2);
  SpectralField zero(16);
  const Norms z = norms(zero, basis);
  CHECK(z.l2 == 0.0);
  CHECK(z.h1 == 0.0);
  CHECK(z.h2 == 0.0);

  for (std::size_t i = 0; i < 16; ++i) {
    const double a = 0.5 + double(i);
    const Norms n = norms(SpectralField::unit(16, i, a), basis);
    CHECK(n.l2 == doctest::Approx(a));
    const double oracle_a = oracle::a_form(basis[i], basis[i], 2, 64);
    CHECK(n.h2 * n.h2 == doctest::Approx(oracle_a * a * a).epsilon(1e-12));
  }

  const double lam1 = poincare_lambda1(basis);
  Stream rng(11);
  for (int t = 0; t < 1000; ++t) {
    SpectralField u(16);
    for (std::size_t i = 0; i < 16; ++i) u[i] = rng.normal();
    CHECK(h1_sq(u, basis) <= h2_sq(u, basis) / lam1 * (1 + 1e-14));
  }
}

TEST_CASE("Poincare constant") {
  const auto b1 = build_basis(1, 2);
  const double ratio = oracle::a_form(b1[0], b1[0], 2, 128) / oracle::h1_form(b1[0], b1[0], 2, 128);
  CHECK(poincare_lambda1(b1) == doctest::Approx(ratio).epsilon(1e-12));
  double prev = poincare_lambda1(b1);
  for (std::size_t m = 2; m <= 64; ++m) {
    const auto b = build_basis(m, 2);
    const double lam = poincare_lambda1(b);
    CHECK(lam <= prev);
    for (const auto& mode : b.modes()) CHECK(mode.h1 <= mode.eigenvalue / lam * (1 + 1e-15));
    prev = lam;
  }
}

namespace {

double taylor_remainder(const SpectralField& x, const SpectralField& h, int r) {
  const double nx = l2_sq(x);
  return std::abs(std::pow(l2_sq(x + h), r) - std::pow(nx, r) - 2.0 * r * std::pow(nx, r - 1) * inner(x, h));
}

double taylor_scale(const SpectralField& x, const SpectralField& h, int r) {
  const double nx = l2_sq(x), nh = l2_sq(h);
  return std::pow(nx, r - 1) * nh + std::pow(nh, r);
}

}  // namespace

TEST_CASE("Taylor inequality for powers of the norm") {
  // r = 1: the remainder is |h|^2, within C_1 = 1. r = 2: the constant
  // (r^2 + r)/2 = 3 is too small (h parallel to x, |h| << |x| gives a ratio
  // near 6); the sharp constant is (7 + sqrt 41)/2.
  const double c2_sharp = 0.5 * (7.0 + std::sqrt(41.0));
  Stream rng(5);
  double worst2 = 0;
  for (int trial = 0; trial < 10000; ++trial) {
    const std::size_t m = 1 + rng.next() % 32;
    SpectralField x(m), h(m);
    const double sx = std::pow(10.0, 4 * rng.uniform() - 2);
    const double sh = std::pow(10.0, 4 * rng.uniform() - 2);
    for (std::size_t i = 0; i < m; ++i) {
      x[i] = sx * rng.normal();
      h[i] = sh * rng.normal();
    }
    const double slack = 1e-12 * std::pow(l2_sq(x) + l2_sq(h), 1);
    CHECK(taylor_remainder(x, h, 1) <= 1.0 * taylor_scale(x, h, 1) * (1 + 1e-12) + slack);
    const double ratio2 = taylor_remainder(x, h, 2) / taylor_scale(x, h, 2);
    worst2 = std::max(worst2, ratio2);
    CHECK(ratio2 <= c2_sharp * (1 + 1e-9));
  }
  CHECK(worst2 > 3.0);

  // The extremal direction: h = s x with s = (sqrt 41 - 5) / 4.
  SpectralField x(4);
  x[0] = 1.0;
  x[2] = -2.0;
  const double root = (std::sqrt(41.0) - 5.0) / 4.0;
  const SpectralField h = root * x;
  const double ratio = taylor_remainder(x, h, 2) / taylor_scale(x, h, 2);
  CHECK(ratio == doctest::Approx(c2_sharp).epsilon(1e-12));
  CHECK(ratio > 3.0);
}
