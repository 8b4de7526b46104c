#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "bipolar/basis.hpp"
#include "bipolar/field.hpp"
#include "bipolar/operators.hpp"
#include "bipolar/rng.hpp"
#include "oracles.hpp"

using namespace bipolar;

namespace {

SpectralField random_field(std::size_t m, Stream& rng, double scale = 1.0) {
  SpectralField u(m);
  for (std::size_t i = 0; i < m; ++i) u[i] = scale * rng.normal();
  return u;
}

}  // namespace

TEST_CASE("FluidParams validation") {
  FluidParams p;
  CHECK_NOTHROW(p.validate());
  p.p = 2.5;
  try {
    p.validate();
    FAIL("expected rejection");
  } catch (const std::invalid_argument& e) {
    CHECK(std::string(e.what()).find("(1,2]") != std::string::npos);
  }
  p.p = 1.0;
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
  p.p = 2.0;
  CHECK_NOTHROW(p.validate());
  p.kappa1 = 0;
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
}

TEST_CASE("apply_A is diagonal and self adjoint") {
  const auto basis = build_basis(16, 2);
  const SpectralField e0 = SpectralField::unit(16, 0);
  CHECK(apply_A(e0, basis) == basis.eigenvalue(0) * e0);
  Stream rng(1);
  for (int t = 0; t < 100; ++t) {
    const auto u = random_field(16, rng), v = random_field(16, rng);
    CHECK(inner(apply_A(u, basis), v) == doctest::Approx(inner(u, apply_A(v, basis))).epsilon(1e-14));
    CHECK(inner(apply_A(u, basis), u) == doctest::Approx(h2_sq(u, basis)).epsilon(1e-15));
  }
}

TEST_CASE("stress operator vanishes at zero") {
  const auto basis = build_basis(16, 2);
  const StressOperator ap(basis, 1.0, 1.5);
  const SpectralField z = ap.apply(SpectralField(16));
  CHECK(z.coeffs().cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("p = 2 reduces to the strain Gram matrix") {
  const auto basis = build_basis(20, 2);
  const StressOperator ap(basis, 1.0, 2.0);
  for (std::size_t i = 0; i < basis.size(); ++i) {
    const SpectralField ui = SpectralField::unit(20, i);
    // 256^2 quadrature of int |E(phi_i)|^2 for comparison with the closed form k2 / 2.
    const double oracle_val = oracle::strain_and_gradient_sq(basis, ui.coeffs(), 256).first;
    CHECK(oracle_val == doctest::Approx(0.5 * basis[i].k2).epsilon(1e-12));
    const SpectralField r = ap.apply(ui);
    for (std::size_t j = 0; j < basis.size(); ++j) {
      const double expected = i == j ? 0.5 * basis[i].k2 : 0.0;
      CHECK(std::abs(r[j] - expected) < 1e-12);
    }
  }
}

TEST_CASE("stress quadrature agrees with a dense-grid evaluation") {
  const auto basis = build_basis(12, 2);
  const StressOperator ap(basis, 1.0, 1.5);
  Stream rng(2);
  const auto u = random_field(12, rng);
  const SpectralField r = ap.apply(u);
  // Dense 96^2 quadrature of int Gamma(u) E(u) : E(phi_j).
  const int n = 96;
  double worst = 0, scale = 0;
  for (std::size_t j = 0; j < 12; ++j) {
    double sum = 0;
    oracle::for_each_point(2, n, [&](const std::array<double, 3>& x) {
      const auto fu = oracle::evaluate(basis, u.coeffs(), x);
      const auto fj = oracle::evaluate(basis, SpectralField::unit(12, j).coeffs(), x);
      double ee = 0, ej = 0;
      for (int a = 0; a < 2; ++a) {
        for (int b = 0; b < 2; ++b) {
          ee += fu.strain[a][b] * fu.strain[a][b];
          ej += fu.strain[a][b] * fj.strain[a][b];
        }
      }
      sum += std::pow(1.0 + ee, -0.25) * ej;
    });
    sum *= oracle::weight(2, n);
    worst = std::max(worst, std::abs(r[j] - sum));
    scale = std::max(scale, std::abs(sum));
  }
  // Residual of the factor-4 collocation, measured at about 1e-3 relative.
  CHECK(worst < 3e-3 * scale);
}

TEST_CASE("stress operator is monotone, positive and Lipschitz") {
  for (std::size_t m : {4, 8, 16}) {
    const auto basis = build_basis(m, 2);
    const StressOperator ap(basis, 1.0, 1.5);
    const double lam1 = poincare_lambda1(basis);
    // Lipschitz constant of E -> (varkappa + |E|^2)^((p-2)/2) E is varkappa^((p-2)/2) = 1; with
    // |E(w)| = ||w||_1 / sqrt(2) and ||w||_1 <= ||w||_2 / sqrt(lambda1):
    const double sharp = 0.5 / std::sqrt(lam1);
    Stream rng(10 + m);
    double worst_ratio = 0;
    for (int t = 0; t < 1000; ++t) {
      const double su = std::pow(10.0, 3 * rng.uniform() - 1.5);
      const auto u = random_field(m, rng, su);
      const auto v = random_field(m, rng, su * std::pow(10.0, rng.uniform() - 0.5));
      const auto au = ap.apply(u), av = ap.apply(v);
      const auto diff = u - v;
      const double mono = inner(au - av, diff);
      CHECK(mono >= -1e-8 * (1 + h1_sq(u, basis) + h1_sq(v, basis)));
      CHECK(inner(au, u) >= 0);
      const double ratio = dual_norm(au - av, basis) / std::sqrt(h1_sq(diff, basis));
      worst_ratio = std::max(worst_ratio, ratio);
    }
    CHECK(worst_ratio <= sharp * (1 + 1e-9));
  }
}

TEST_CASE("Korn constants on the torus") {
  const auto basis = build_basis(16, 2);
  const StressOperator ap(basis, 1.0, 2.0);
  Stream rng(4);
  for (int t = 0; t < 50; ++t) {
    const auto u = random_field(16, rng);
    const auto [strain_sq, grad_sq] = oracle::strain_and_gradient_sq(basis, u.coeffs(), 24);
    CHECK(grad_sq == doctest::Approx(h1_sq(u, basis)).epsilon(1e-12));
    CHECK(strain_sq == doctest::Approx(0.5 * grad_sq).epsilon(1e-12));
    CHECK(ap.strain_energy(u) == doctest::Approx(strain_sq).epsilon(1e-12));
  }
}

TEST_CASE("convection tensor is skew and matches quadrature") {
  for (int d : {2, 3}) {
    const std::size_t m = d == 2 ? 16 : 24;
    const auto basis = build_basis(m, d);
    const ConvectionOperator conv(basis);
    const TrilinearQuadrature quad(basis);
    CHECK(conv.nonzeros() > 0);
    Stream rng(20 + d);
    for (int t = 0; t < 1000; ++t) {
      const auto u = random_field(m, rng), v = random_field(m, rng), w = random_field(m, rng);
      const double tensor = inner(apply_B(conv, u, v), w);
      const double direct = trilinear_b(quad, u, v, w);
      const double scale = std::sqrt(l2_sq(u) * h1_sq(v, basis) * h2_sq(w, basis));
      CHECK(std::abs(tensor - direct) <= 1e-12 * scale);
      CHECK(std::abs(inner(apply_B(conv, u, v), v)) <= 1e-14 * scale);
      CHECK(std::abs(trilinear_b(quad, u, v, v)) <= 1e-10 * scale);
      CHECK(std::abs(tensor + inner(apply_B(conv, u, w), v)) <= 1e-13 * scale);
    }
  }
}

TEST_CASE("convection matches the pointwise oracle") {
  const auto basis = build_basis(12, 2);
  const ConvectionOperator conv(basis);
  Stream rng(33);
  for (int t = 0; t < 5; ++t) {
    const auto u = random_field(12, rng), v = random_field(12, rng), w = random_field(12, rng);
    const double o = oracle::trilinear(basis, u.coeffs(), v.coeffs(), w.coeffs(), 16);
    CHECK(inner(apply_B(conv, u, v), w) == doctest::Approx(o).epsilon(1e-11));
  }
  for (std::size_t i = 0; i < 12; ++i) {
    for (std::size_t j = 0; j < 12; ++j) {
      for (std::size_t k = 0; k < 12; ++k) {
        const double o = oracle::trilinear(basis, SpectralField::unit(12, i).coeffs(),
                                           SpectralField::unit(12, j).coeffs(),
                                           SpectralField::unit(12, k).coeffs(), 10);
        CHECK(std::abs(conv.coefficient(i, j, k) - o) < 1e-12);
      }
    }
  }
}

TEST_CASE("convection rejects mismatched levels and is linear in the first slot") {
  const auto basis = build_basis(8, 2);
  const ConvectionOperator conv(basis);
  const TrilinearQuadrature quad(basis);
  CHECK_THROWS_AS(apply_B(conv, SpectralField(8), SpectralField(7)), std::invalid_argument);
  CHECK_THROWS_AS(trilinear_b(quad, SpectralField(8), SpectralField(8), SpectralField(4)), std::invalid_argument);
  Stream rng(8);
  const auto v = random_field(8, rng);
  CHECK(apply_B(conv, SpectralField(8), v).coeffs().cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("B2 bound with the estimated constant") {
  const auto basis = build_basis(16, 2);
  const ConvectionOperator conv(basis);
  const double c0 = estimate_c0(conv, basis, 99);
  CHECK(c0 > 0);
  CHECK(estimate_c0(conv, basis, 99) == c0);
  Stream rng(12);
  for (int t = 0; t < 2000; ++t) {
    const auto u = random_field(16, rng), v = random_field(16, rng), w = random_field(16, rng);
    const double b = std::abs(inner(apply_B(conv, u, v), w));
    CHECK(b <= c0 * std::sqrt(l2_sq(u) * h1_sq(v, basis) * h2_sq(w, basis)) * (1 + 1e-9));
  }
}
