#pragma once

// Gamma/beta, unit-sphere volumes, and the radial integrals
//     I_p^q = \int_0^\infty t^q (1+t)^{-p} dt = B(q+1, p-q-1)
// together with their two three-term recurrences.

#include <cmath>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include <boost/math/special_functions/beta.hpp>

#include "hslab/errors.hpp"
#include "hslab/quadrature.hpp"

namespace hslab {

[[nodiscard]] inline double gamma(double x) {
  if (!(x > 0.0) || !std::isfinite(x)) {
    throw DomainError("gamma: argument must be positive and finite, got " + std::to_string(x));
  }
  return std::tgamma(x);
}

[[nodiscard]] inline double beta(double a, double b) {
  if (!(a > 0.0) || !(b > 0.0)) {
    throw DomainError("beta: arguments must be positive");
  }
  return boost::math::beta(a, b);
}

/// omega_k: (k)-volume of the unit sphere S^k in R^{k+1}.
[[nodiscard]] inline double sphere_volume(int k) {
  if (k < 1) throw DomainError("sphere_volume: k must be >= 1, got " + std::to_string(k));
  const double h = 0.5 * (k + 1);
  return 2.0 * std::pow(std::numbers::pi, h) / gamma(h);
}

struct AubinIntegralParams {
  double p = 0.0;
  double q = 0.0;

  [[nodiscard]] bool valid() const noexcept {
    return std::isfinite(p) && std::isfinite(q) && q > -1.0 && p - q > 1.0;
  }
  /// Near the divergence boundary p - q = 1 the integral is huge and the
  /// recurrences lose relative accuracy.
  [[nodiscard]] bool ill_conditioned() const noexcept { return p - q - 1.0 < 0.05; }
};

namespace detail {
inline void require_valid(const AubinIntegralParams& pq) {
  if (!pq.valid()) {
    throw DomainError("aubin_integral: need q > -1 and p - q > 1 (p=" + std::to_string(pq.p) +
                      ", q=" + std::to_string(pq.q) + ")");
  }
}
}  // namespace detail

[[nodiscard]] inline double aubin_integral(const AubinIntegralParams& pq) {
  detail::require_valid(pq);
  return beta(pq.q + 1.0, pq.p - pq.q - 1.0);
}

/// Quadrature route for I_p^q, independent of the beta closed form.
///
/// Split at t = 1 and fold [1, inf) onto (0, 1] with t = 1/x. Both halves
/// then read \int_0^1 x^c (1+x)^{-p} dx with c > -1; the x^c part is
/// integrated exactly and only the bounded remainder x^c((1+x)^{-p} - 1)
/// goes through the adaptive rule.
[[nodiscard]] inline double aubin_integral_quadrature(const AubinIntegralParams& pq,
                                                      double tol = quad::kDefaultTol) {
  detail::require_valid(pq);
  const double p = pq.p;
  auto folded = [p, tol](double c) {
    const double remainder = quad::finite(
        [p, c](double x) { return std::pow(x, c) * std::expm1(-p * std::log1p(x)); }, 0.0, 1.0,
        tol);
    return 1.0 / (c + 1.0) + remainder;
  };
  quad::CompensatedSum s;
  s.add(folded(pq.q));
  s.add(folded(pq.p - pq.q - 2.0));
  return s.value();
}

struct RecurrencePair {
  double p = 0.0;
  double q = 0.0;
  double first_violation = 0.0;   // I_{p+1}^q vs (p-q-1)/p I_p^q
  double second_violation = 0.0;  // I_{p+1}^{q+1} vs (q+1)/(p-q-1) I_{p+1}^q
  bool ill_conditioned = false;
};

struct RecurrenceReport {
  std::vector<RecurrencePair> pairs;
  std::vector<AubinIntegralParams> skipped;
  double max_first = 0.0;
  double max_second = 0.0;

  [[nodiscard]] double max_violation() const noexcept { return std::max(max_first, max_second); }
  [[nodiscard]] std::size_t ill_conditioned_count() const noexcept {
    std::size_t c = 0;
    for (const auto& p : pairs) c += p.ill_conditioned ? 1 : 0;
    return c;
  }
};

[[nodiscard]] inline RecurrencePair check_recurrences(const AubinIntegralParams& pq) {
  const double p = pq.p;
  const double q = pq.q;
  const double base = aubin_integral(pq);
  const double up = aubin_integral({p + 1.0, q});
  const double up_both = aubin_integral({p + 1.0, q + 1.0});
  RecurrencePair r{p, q};
  r.first_violation = std::fabs(up - (p - q - 1.0) / p * base) / std::fabs(up);
  r.second_violation = std::fabs(up_both - (q + 1.0) / (p - q - 1.0) * up) / std::fabs(up_both);
  r.ill_conditioned = pq.ill_conditioned();
  return r;
}

/// Checks both recurrences on the Cartesian product of the grids. Invalid
/// pairs are skipped and listed; the first recurrence needs p > 0.
[[nodiscard]] inline RecurrenceReport verify_aubin_recurrences(std::span<const double> p_grid,
                                                               std::span<const double> q_grid) {
  RecurrenceReport report;
  for (double p : p_grid) {
    for (double q : q_grid) {
      const AubinIntegralParams pq{p, q};
      if (!pq.valid() || !(p > 0.0)) {
        report.skipped.push_back(pq);
        continue;
      }
      const auto r = check_recurrences(pq);
      report.max_first = std::max(report.max_first, r.first_violation);
      report.max_second = std::max(report.max_second, r.second_violation);
      report.pairs.push_back(r);
    }
  }
  return report;
}

/// Uniform grid lo, lo+step, ..., <= hi (+ rounding slack).
[[nodiscard]] inline std::vector<double> linear_grid(double lo, double hi, double step) {
  std::vector<double> g;
  const auto count = static_cast<long>(std::floor((hi - lo) / step + 1e-9));
  for (long i = 0; i <= count; ++i) g.push_back(lo + static_cast<double>(i) * step);
  return g;
}

}  // namespace hslab
