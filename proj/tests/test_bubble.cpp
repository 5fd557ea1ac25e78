#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "hslab/bubble.hpp"
#include "support.hpp"

namespace hslab {
namespace {

std::vector<double> s_grid() { return linear_grid(0.0, 1.75, 0.25); }

TEST(BubbleParams, Validation) {
  EXPECT_THROW(BubbleParams(2, 0.5), DomainError);
  EXPECT_THROW(BubbleParams(3, 2.0), DomainError);
  EXPECT_THROW(BubbleParams(3, -0.1), DomainError);
  const BubbleParams b(5, 1.0);
  EXPECT_DOUBLE_EQ(b.crit(), 8.0 / 3.0);
}

TEST(Phi, PointValues) {
  EXPECT_DOUBLE_EQ(phi(BubbleParams(4, 1.0), 0.0), 1.0);
  EXPECT_NEAR(phi(BubbleParams(4, 1.0), 1.0), 0.25, 1e-15);
  const BubbleParams b(3, 0.5);
  for (double r : {1e3, 1e6, 1e9}) EXPECT_NEAR(phi(b, r) * r, 1.0, 2.0 * std::pow(r, -1.5));
}

TEST(Phi, StrictlyDecreasing) {
  const BubbleParams b(6, 1.25);
  double prev = phi(b, 0.0);
  for (double r : log_spaced(1e-4, 1e4, 200)) {
    const double v = phi(b, r);
    EXPECT_LT(v, prev);
    prev = v;
  }
}

TEST(BubbleIntegrals, ClosedFormMatchesQuadratureOnGrid) {
  for (int n = 3; n <= 10; ++n) {
    for (double s : s_grid()) {
      for (const auto& row : compare_bubble_integrals(BubbleParams(n, s))) {
        EXPECT_LT(row.rel_err, 1e-8) << "n=" << n << " s=" << s << " " << field_name(row.field);
      }
    }
  }
}

TEST(BubbleIntegrals, DivergentFieldsAbsent) {
  const auto I = bubble_integrals(BubbleParams(4, 1.0));
  EXPECT_FALSE(I.l2mass.has_value());
  EXPECT_FALSE(I.moment2_grad.has_value());
  EXPECT_TRUE(I.dirichlet.has_value());
  EXPECT_THROW((void)I.require(BubbleField::kL2Mass), DivergenceError);
  try {
    (void)bubble_integral(BubbleParams(4, 0.0), BubbleField::kL2Mass);
    FAIL() << "expected DivergenceError";
  } catch (const DivergenceError& e) {
    EXPECT_EQ(e.field(), "l2mass");
  }
}

TEST(BubbleIntegrals, ExactRationalRatios) {
  const auto I5 = bubble_integrals(BubbleParams(5, 1.0));
  EXPECT_NEAR(*I5.moment2_grad / *I5.l2mass, 45.0 / 7.0, 1e-12 * 45.0 / 7.0);
  EXPECT_NEAR(*I5.dirichlet / *I5.weighted_crit, 12.0, 1e-12 * 12.0);
  const auto I6 = bubble_integrals(BubbleParams(6, 0.5));
  EXPECT_NEAR(*I6.moment_crit / *I6.l2mass, 12.0 / 76.0, 1e-12);
}

TEST(Identities, QuadratureRatiosOnGrid) {
  for (int n = 3; n <= 10; ++n) {
    for (double s : s_grid()) {
      const auto rows = integral_identities(BubbleParams(n, s));
      EXPECT_EQ(rows.size(), n >= 5 ? 3u : (n == 3 ? 2u : 1u));
      for (const auto& r : rows) {
        EXPECT_LT(r.rel_err, 1e-8) << "n=" << n << " s=" << s << " " << r.name;
      }
    }
  }
}

TEST(Identities, DimensionThreeNormalisation) {
  for (double s = 0.25; s < 1.8; s += 0.25) {
    const auto f = dimension3_flux_identity(s);
    EXPECT_NEAR(f.closed_form, 1.0 / (3.0 - s), 1e-15);
    EXPECT_NEAR(f.quadrature, f.closed_form, 1e-9 * f.closed_form) << "s=" << s;
  }
}

TEST(SharpConstant, FrozenQuadratureOracle) {
  for (const auto& k : testing::kFrozenK) {
    const BubbleParams b(k.n, k.s);
    EXPECT_NEAR(sharp_constant(b), k.K, 1e-9 * k.K) << "n=" << k.n << " s=" << k.s;
  }
}

TEST(SharpConstant, ClassicalSobolevAtSZero) {
  for (int n = 3; n <= 6; ++n) {
    const double ref = testing::kClassicalK[static_cast<std::size_t>(n - 3)];
    EXPECT_NEAR(sharp_constant(BubbleParams(n, 0.0)), ref, 1e-8 * ref) << "n=" << n;
  }
}

TEST(SharpConstant, ClosedFormOnGrid) {
  for (int n = 3; n <= 10; ++n) {
    for (double s : s_grid()) {
      const BubbleParams b(n, s);
      EXPECT_NEAR(sharp_constant_closed_form(b), sharp_constant(b), 1e-8 * sharp_constant(b));
    }
  }
}

TEST(SharpConstant, EuclideanQuotientOfPhi) {
  for (int n : {3, 4, 7}) {
    for (double s : {0.0, 0.75, 1.5}) {
      const BubbleParams b(n, s);
      const double qv = euclidean_quotient(
          b, [&](double r) { return phi(b, r); }, [&](double r) { return phi_prime(b, r); });
      EXPECT_NEAR(qv * sharp_constant(b), 1.0, 1e-10);
    }
  }
}

TEST(Extremality, RandomPerturbationsNeverLower) {
  for (int n : {3, 4, 5, 6}) {
    for (double s : {0.0, 0.5, 1.0, 1.5}) {
      const auto rep = extremality_check(BubbleParams(n, s), 1234 + static_cast<unsigned>(n), 20);
      EXPECT_EQ(rep.trials, 20);
      EXPECT_GE(rep.min_ratio, 1.0 - 1e-12) << "n=" << n << " s=" << s;
    }
  }
}

TEST(ExpansionConstants, ThresholdValues) {
  EXPECT_NEAR(curvature_threshold(4, 0.0), 1.0 / 6.0, 1e-15);
  EXPECT_NEAR(curvature_threshold(3, 0.0), 1.0 / 8.0, 1e-15);
  EXPECT_NEAR(curvature_threshold(5, 1.0), 5.0 / 28.0, 1e-15);
}

TEST(ExpansionConstants, RatioEqualsThreshold) {
  for (int n = 5; n <= 10; ++n) {
    for (double s : s_grid()) {
      const auto k = expansion_constants(BubbleParams(n, s));
      ASSERT_TRUE(k.C1 && k.C2);
      EXPECT_GT(*k.C1, 0.0);
      EXPECT_NEAR(*k.C2 / *k.C1, k.c, 1e-8 * k.c) << "n=" << n << " s=" << s;
    }
  }
}

TEST(ExpansionConstants, LowDimensionsDiverge) {
  for (int n : {3, 4}) {
    const auto k = expansion_constants(BubbleParams(n, 1.0));
    EXPECT_FALSE(k.C1.has_value());
    EXPECT_THROW((void)k.require_C1(), DivergenceError);
    EXPECT_THROW((void)k.require_C2(), DivergenceError);
  }
  EXPECT_TRUE(expansion_constants(BubbleParams(4, 0.0)).log_prefactor.has_value());
}

TEST(BubblePde, ResidualOnLogGrid) {
  const auto grid = log_spaced(1e-3, 1e3, 400);
  for (int n = 3; n <= 10; ++n) {
    for (double s : s_grid()) {
      EXPECT_LT(bubble_pde_residual(BubbleParams(n, s), grid), 1e-9) << "n=" << n << " s=" << s;
    }
  }
  EXPECT_NEAR(bubble_kappa(BubbleParams(3, 1.0)), 2.0, 1e-15);
  EXPECT_NEAR(bubble_kappa(BubbleParams(5, 0.5)), 13.5, 1e-15);
  EXPECT_NEAR(bubble_kappa(BubbleParams(4, 0.0)), 8.0, 1e-15);
}

TEST(BubblePde, SymbolicDerivativeOracle) {
  // Phi' = -(n-2) r^{1-s} (1+r^{2-s})^{-(n-s)/(2-s)}; central differences as check.
  const BubbleParams b(5, 0.5);
  for (double r : {0.1, 0.7, 3.0}) {
    const double sym = -3.0 * std::pow(r, 0.5) * std::pow(1.0 + std::pow(r, 1.5), -3.0);
    EXPECT_NEAR(phi_prime(b, r), sym, 1e-14);
    const double h = 1e-5 * r;
    const double fd = (phi_prime(b, r + h) - phi_prime(b, r - h)) / (2.0 * h);
    EXPECT_NEAR(phi_second(b, r), fd, 1e-7 * std::fabs(fd) + 1e-12);
  }
}

TEST(BubblePde, GridWithZeroRejected) {
  const std::vector<double> grid{0.0, 1.0};
  EXPECT_THROW((void)bubble_pde_residual(BubbleParams(3, 1.0), grid), DomainError);
}

}  // namespace
}  // namespace hslab
