#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "hslab/green_mass.hpp"
#include "support.hpp"

namespace hslab {
namespace {

const ModelManifold kS3 = ModelManifold::round_sphere(3, 1.0);

double bump(double r, double c, double w) {
  const double x = (r - c) / w;
  return std::fabs(x) < 1.0 ? std::exp(-1.0 / (1.0 - x * x)) : 0.0;
}

TEST(ConstantPotentialMass, ClosedFormBranches) {
  EXPECT_NEAR(constant_potential_mass(1.0, 0.75), 0.0, 1e-15);
  EXPECT_NEAR(constant_potential_mass(1.0, 1.0), -1.0 / std::numbers::pi, 1e-15);
  // Continuity across k = 0.
  EXPECT_NEAR(constant_potential_mass(1.0, 1.0 - 1e-7), -1.0 / std::numbers::pi, 2e-7);
  EXPECT_NEAR(constant_potential_mass(1.0, 1.0 + 1e-7), -1.0 / std::numbers::pi, 2e-7);
  // Scaling m(R, a) = m(1, a R^2) / R.
  EXPECT_NEAR(constant_potential_mass(2.0, 0.1), constant_potential_mass(1.0, 0.4) / 2.0, 1e-14);
  EXPECT_THROW((void)constant_potential_mass(1.0, 0.0), DomainError);
  EXPECT_THROW((void)constant_potential_mass(0.0, 0.5), DomainError);
}

TEST(GreenMass, MatchesClosedFormForConstantPotentials) {
  for (double a : {0.1, 0.5, 1.0, 2.0}) {
    const auto g = solve_green(kS3, Potential::constant(a));
    const double ref = constant_potential_mass(1.0, a);
    EXPECT_NEAR(g.mass, ref, 5e-6 * std::max(1.0, std::fabs(ref))) << "a=" << a;
    EXPECT_LT(g.residual, kGreenResidualTol);
    EXPECT_NEAR(g.coercivity_margin, a, 1e-8);
  }
}

TEST(GreenMass, ConformalPotentialHasZeroMass) {
  const auto g = solve_green(kS3, Potential::constant(0.75));
  EXPECT_LE(std::fabs(g.mass), 1e-3);
}

TEST(GreenMass, NegativeForLargePotential) {
  EXPECT_LT(solve_green(kS3, Potential::constant(1.0)).mass, 0.0);
}

TEST(GreenMass, StrictlyDecreasingInPotential) {
  double prev = std::numeric_limits<double>::infinity();
  for (double a : {0.1, 0.25, 0.5, 0.74, 1.0}) {
    const double m = solve_green(kS3, Potential::constant(a)).mass;
    EXPECT_LT(m, prev) << "a=" << a;
    prev = m;
  }
}

TEST(GreenMass, CutoffRadiusDoesNotChangeMass) {
  const double ref = constant_potential_mass(1.0, 0.5);
  // A steeper cutoff needs more cells for the same accuracy.
  for (double rho : {0.2, 0.4, 1.0}) {
    EXPECT_NEAR(solve_green(kS3, Potential::constant(0.5), 512, rho).mass, ref, 1e-4) << rho;
    EXPECT_NEAR(solve_green(kS3, Potential::constant(0.5), 1024, rho).mass, ref, 1e-5) << rho;
  }
  EXPECT_THROW((void)solve_green(kS3, Potential::constant(0.5), 512, 1.6), DomainError);
}

TEST(GreenFunction, DiracNormalisationAndPositivity) {
  const auto g = solve_green(kS3, Potential::constant(0.5));
  const double omega2 = sphere_volume(2);
  const double r0 = g.G.grid->node(0);
  EXPECT_NEAR(omega2 * r0 * g.G[0], 1.0, 2.0 * std::fabs(g.mass) * r0 + 1e-9);
  for (double v : g.G.values) EXPECT_GT(v, 0.0);
  for (double r : {1e-3, 0.3, 1.0, 3.0}) EXPECT_GT(g.scaled_green_at(r), 0.0);
}

TEST(GreenFunction, ScaledGreenMatchesExactSolution) {
  // For constant a < 1 on S^3: omega_2 G = sin(k (pi - r)) / (sin(k pi) sin r).
  const double a = 0.5;
  const double k = std::sqrt(1.0 - a);
  const auto g = solve_green(kS3, Potential::constant(a));
  for (double r : {0.05, 0.5, 1.5, 2.5}) {
    const double exact = std::sin(k * (std::numbers::pi - r)) / (std::sin(k * std::numbers::pi) * std::sin(r));
    EXPECT_NEAR(g.scaled_green_at(r), exact, 5e-4 * exact) << "r=" << r;
  }
}

TEST(GreenFunction, RequiresDimensionThreeAndCoercivity) {
  EXPECT_THROW((void)solve_green(ModelManifold::round_sphere(4, 1.0), Potential::constant(0.5)),
               DomainError);
  EXPECT_THROW((void)solve_green(kS3, Potential::constant(-0.5)), CoercivityError);
}

TEST(MassComparison, EqualPotentialsGiveZeroGap) {
  const auto c = mass_comparison(kS3, Potential::constant(0.5), Potential::constant(0.5));
  EXPECT_NEAR(c.min_gap, 0.0, 1e-12);
  EXPECT_NEAR(c.mass - c.mass_prime, 0.0, 1e-12);
}

TEST(MassComparison, SmallerPotentialHasLargerMass) {
  const auto c = mass_comparison(kS3, Potential::constant(0.25), Potential::constant(0.5));
  EXPECT_GT(c.min_gap, 0.0);
  EXPECT_GT(c.mass - c.mass_prime, 0.0);
  EXPECT_THROW((void)mass_comparison(kS3, Potential::constant(0.5), Potential::constant(0.25)),
               PropertyViolation);
}

TEST(MassComparison, BumpNearAntipodeMatchesRepresentationFormula) {
  // m - m' = omega_2 \int G_a (a' - a) G_{a'} dv_g.
  const auto a = Potential::constant(0.5);
  auto extra = [](double r) { return 0.4 * bump(r, 2.4, 0.6); };
  const auto ap = Potential::radial([&](double r) { return 0.5 + extra(r); });
  const auto g = solve_green(kS3, a);
  const auto gp = solve_green(kS3, ap);
  const double omega2 = sphere_volume(2);
  const double oracle =
      omega2 * testing::cubic_integral(g.G, [&](double r) { return extra(r) * gp.scaled_green_at(r) / omega2; });
  EXPECT_GT(oracle, 0.0);
  EXPECT_NEAR(g.mass - gp.mass, oracle, 1e-3 * oracle + 1e-6);
  const auto c = mass_comparison(kS3, a, ap);
  EXPECT_GT(c.mass - c.mass_prime, 0.0);
  EXPECT_GE(c.min_gap, -1e-9);
}

TEST(GreenMass, MeshConvergence) {
  const double ref = constant_potential_mass(1.0, 0.1);
  double prev = std::numeric_limits<double>::infinity();
  for (int N : {128, 256, 512}) {
    const double err = std::fabs(solve_green(kS3, Potential::constant(0.1), N).mass - ref);
    EXPECT_LT(err, prev) << "N=" << N;
    prev = err;
  }
}

}  // namespace
}  // namespace hslab
