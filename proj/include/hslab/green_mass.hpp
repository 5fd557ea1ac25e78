#pragma once

// Green's function of Delta_g + a at the pole of S^3(R), written as
//     omega_2 G(r) = eta(r)/r + beta(r),
// where beta is the bounded solution of (Delta_g + a) beta = f with
//     f = -Delta_g(eta/r) - a eta/r.
// The mass is m = beta(0).

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "hslab/cutoff.hpp"
#include "hslab/errors.hpp"
#include "hslab/geometry.hpp"
#include "hslab/quadrature.hpp"
#include "hslab/radial_fv.hpp"

namespace hslab {

inline constexpr double kGreenCutoffFraction = 0.4;
inline constexpr int kGreenDefaultNodes = 512;
inline constexpr double kGreenResidualTol = 1e-7;

namespace detail {

/// 1/x - cot x without cancellation for small x.
[[nodiscard]] inline double inv_minus_cot(double x) {
  if (std::fabs(x) < 0.1) {
    const double x2 = x * x;
    // x/3 + x^3/45 + 2x^5/945 + x^7/4725 + 2x^9/93555
    return x * (1.0 / 3 + x2 * (1.0 / 45 + x2 * (2.0 / 945 + x2 * (1.0 / 4725 + x2 * 2.0 / 93555))));
  }
  return 1.0 / x - 1.0 / std::tan(x);
}

}  // namespace detail

/// f = -Delta_g(eta/r) - a eta/r on S^3(R).
[[nodiscard]] inline double green_source(const ModelManifold& m, const Cutoff& eta,
                                         const Potential& a, double r) {
  const double R = m.radius();
  const double g = 1.0 / r;
  const double dg = -g * g;
  const double e = eta(r);
  const double h = 2.0 / (R * std::tan(r / R));
  double f = 2.0 * e * g * g / R * detail::inv_minus_cot(r / R) - a(r) * e * g;
  if (r > eta.rho()) f += eta.d2(r) * g + 2.0 * eta.d1(r) * dg + h * eta.d1(r) * g;
  return f;
}

/// Exact mass for constant a on S^3(R): with k^2 = 1 - a R^2,
/// m = -k cot(k pi) / R (k real), -1/(pi R) at k = 0 and
/// -kappa coth(kappa pi) / R with kappa^2 = a R^2 - 1.
[[nodiscard]] inline double constant_potential_mass(double radius, double a) {
  if (!(radius > 0.0)) throw DomainError("constant_potential_mass: radius must be positive");
  if (!(a > 0.0)) throw DomainError("constant_potential_mass: Delta_g + a needs a > 0");
  const double k2 = 1.0 - a * radius * radius;
  const double pi = std::numbers::pi;
  if (std::fabs(k2) < 1e-12) return -1.0 / (pi * radius);
  if (k2 > 0.0) {
    const double k = std::sqrt(k2);
    return -k * std::cos(k * pi) / std::sin(k * pi) / radius;
  }
  const double kap = std::sqrt(-k2);
  return -kap / std::tanh(kap * pi) / radius;
}

struct MassFit {
  double mass = 0.0;
  double slope = 0.0;
  double alpha = 1.0;
  double residual = 0.0;
};

/// Fit beta(r) = m + c r^alpha, alpha in (0, 1], to the given samples.
[[nodiscard]] inline MassFit fit_pole_value(std::span<const double> r, std::span<const double> b) {
  auto solve = [&](double alpha) {
    double s1 = 0, sx = 0, sxx = 0, sy = 0, sxy = 0;
    for (std::size_t i = 0; i < r.size(); ++i) {
      const double x = std::pow(r[i], alpha);
      s1 += 1.0;
      sx += x;
      sxx += x * x;
      sy += b[i];
      sxy += x * b[i];
    }
    const double det = s1 * sxx - sx * sx;
    MassFit fit;
    fit.alpha = alpha;
    fit.mass = (sxx * sy - sx * sxy) / det;
    fit.slope = (s1 * sxy - sx * sy) / det;
    for (std::size_t i = 0; i < r.size(); ++i) {
      const double e = b[i] - fit.mass - fit.slope * std::pow(r[i], alpha);
      fit.residual += e * e;
    }
    fit.residual = std::sqrt(fit.residual / static_cast<double>(r.size()));
    return fit;
  };
  // Coarse scan then golden-section refinement of the exponent.
  double best_alpha = 1.0;
  double best = solve(1.0).residual;
  for (int k = 1; k < 40; ++k) {
    const double al = k / 40.0;
    const double res = solve(al).residual;
    if (res < best) {
      best = res;
      best_alpha = al;
    }
  }
  double lo = std::max(1e-3, best_alpha - 0.025);
  double hi = std::min(1.0, best_alpha + 0.025);
  const double g = 0.5 * (std::sqrt(5.0) - 1.0);
  for (int it = 0; it < 60; ++it) {
    const double x1 = hi - g * (hi - lo);
    const double x2 = lo + g * (hi - lo);
    if (solve(x1).residual < solve(x2).residual) {
      hi = x2;
    } else {
      lo = x1;
    }
  }
  MassFit refined = solve(0.5 * (lo + hi));
  return refined.residual <= best ? refined : solve(best_alpha);
}

struct GreenDecomposition {
  ModelManifold manifold;
  Potential a;
  Cutoff cutoff;
  RadialFunction G;
  RadialFunction beta;
  double mass = 0.0;
  double mass_alpha = 1.0;
  double beta_energy = 0.0;  // Q(beta) = \int beta f dv_g
  double residual = 0.0;
  double coercivity_margin = 0.0;

  /// beta at any r in [0, pi R]: linear between nodes, m + c r^alpha below the
  /// first node and constant past the last one.
  [[nodiscard]] double beta_at(double r) const {
    const auto nodes = beta.grid->nodes();
    if (r <= nodes.front()) {
      const double r0 = nodes.front();
      return mass + (beta[0] - mass) * std::pow(r / r0, mass_alpha);
    }
    if (r >= nodes.back()) return beta.values.back();
    const auto it = std::upper_bound(nodes.begin(), nodes.end(), r);
    const std::size_t j = static_cast<std::size_t>(it - nodes.begin());
    const double t = (r - nodes[j - 1]) / (nodes[j] - nodes[j - 1]);
    return (1.0 - t) * beta[j - 1] + t * beta[j];
  }

  /// omega_2 G(r) = eta/r + beta.
  [[nodiscard]] double scaled_green_at(double r) const { return cutoff(r) / r + beta_at(r); }
};

/// Solves for beta (cutoff radius rho, default 0.4 R) with the finite-volume operator, reassembles G and
/// extrapolates the mass from the five innermost nodes.
[[nodiscard]] inline GreenDecomposition solve_green(const ModelManifold& m, const Potential& a,
                                                    int nodes = kGreenDefaultNodes,
                                                    double rho = 0.0) {
  if (m.n() != 3) throw DomainError("solve_green: the mass is defined for n = 3 only");
  auto grid = RadialGrid::clustered(m, nodes);
  RadialOperator op(grid, a);
  const double margin = op.coercivity_margin();
  if (!(margin > kCoercivityThreshold)) {
    throw CoercivityError(margin, "solve_green: Delta_g + a is not coercive (smallest Rayleigh "
                                  "quotient " + std::to_string(margin) + ")");
  }
  if (rho <= 0.0) rho = kGreenCutoffFraction * m.radius();
  if (2.0 * rho > m.injectivity_radius()) {
    throw DomainError("solve_green: cutoff support 2 rho exceeds the injectivity radius");
  }
  const Cutoff eta(rho);
  const auto faces = grid->faces();
  std::vector<double> rhs(grid->size());
  for (std::size_t i = 0; i < rhs.size(); ++i) {
    auto integrand = [&](double r) { return green_source(m, eta, a, r) * m.area(r); };
    const double lo = faces[i];
    const double hi = faces[i + 1];
    if (lo < eta.rho() && hi > eta.rho()) {
      rhs[i] = quad::gauss15(integrand, lo, eta.rho()) + quad::gauss15(integrand, eta.rho(), hi);
    } else if (lo < eta.support() && hi > eta.support()) {
      rhs[i] = quad::gauss15(integrand, lo, eta.support()) +
               quad::gauss15(integrand, eta.support(), hi);
    } else {
      rhs[i] = quad::gauss15(integrand, lo, hi);
    }
  }
  std::vector<double> beta = op.solve(rhs);

  const auto applied = op.apply(beta);
  double worst = 0.0;
  double scale = 0.0;
  for (std::size_t i = 0; i < rhs.size(); ++i) {
    worst = std::max(worst, std::fabs(applied[i] - rhs[i]));
    scale = std::max(scale, std::fabs(rhs[i]));
  }
  const double residual = scale > 0.0 ? worst / scale : worst;
  if (residual > kGreenResidualTol) {
    throw ResolutionError("solve_green: discrete residual " + std::to_string(residual) +
                          " above tolerance");
  }

  quad::CompensatedSum energy;
  for (std::size_t i = 0; i < rhs.size(); ++i) energy.add(beta[i] * rhs[i]);

  const auto r = grid->nodes();
  const auto fit = fit_pole_value(r.first(5), std::span<const double>(beta).first(5));
  RadialFunction G{grid, std::vector<double>(grid->size())};
  const double omega2 = sphere_volume(2);
  for (std::size_t i = 0; i < G.size(); ++i) G[i] = (eta(r[i]) / r[i] + beta[i]) / omega2;
  for (double g : G.values) {
    if (!(g > 0.0)) throw ResolutionError("solve_green: Green's function not positive on the grid");
  }
  return GreenDecomposition{m,
                            a,
                            eta,
                            std::move(G),
                            RadialFunction{grid, std::move(beta)},
                            fit.mass,
                            fit.alpha,
                            energy.value(),
                            residual,
                            margin};
}

struct MassComparison {
  double mass = 0.0;
  double mass_prime = 0.0;
  double min_gap = 0.0;  // min over nodes of beta - beta'
  std::size_t argmin = 0;
};

/// Checks beta > beta' pointwise and m > m' for a <= a'. With a == a' the gap is
/// zero up to rounding and no violation is reported.
[[nodiscard]] inline MassComparison mass_comparison(const ModelManifold& m, const Potential& a,
                                                    const Potential& a_prime,
                                                    int nodes = kGreenDefaultNodes) {
  const auto g = solve_green(m, a, nodes);
  const auto gp = solve_green(m, a_prime, nodes);
  MassComparison out;
  out.mass = g.mass;
  out.mass_prime = gp.mass;
  out.min_gap = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < g.beta.size(); ++i) {
    const double gap = g.beta[i] - gp.beta[i];
    if (gap < out.min_gap) {
      out.min_gap = gap;
      out.argmin = i;
    }
  }
  if (out.min_gap < -1e-6 || out.mass - out.mass_prime < -1e-6) {
    throw PropertyViolation("mass_comparison: beta(a) < beta(a') beyond tolerance (gap " +
                            std::to_string(out.min_gap) + ")");
  }
  return out;
}

}  // namespace hslab
