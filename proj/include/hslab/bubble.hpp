#pragma once

// The Euclidean extremal profile
//     Phi(r) = (1 + r^{2-s})^{-(n-2)/(2-s)}
// of the Hardy-Sobolev inequality, its weighted integrals over R^n, the sharp
// constant K(n,s) and the constants of the small-eps expansion of J(u_eps).
//
// Every radial integral over R^n reduces, after t = r^{2-s}, to an Aubin
// integral:  \int_0^\infty r^alpha (1+r^sigma)^{-P} dr
//               = I_P^{(alpha+1)/sigma - 1} / sigma,   sigma = 2 - s.

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "hslab/errors.hpp"
#include "hslab/quadrature.hpp"
#include "hslab/special_math.hpp"

namespace hslab {

class BubbleParams {
 public:
  BubbleParams(int n, double s) : n_(n), s_(s) {
    if (n < 3) throw DomainError("BubbleParams: dimension must be >= 3");
    if (!(s >= 0.0 && s < 2.0)) throw DomainError("BubbleParams: s must lie in [0, 2)");
    crit_ = 2.0 * (n - s) / (n - 2);
  }

  [[nodiscard]] int n() const noexcept { return n_; }
  [[nodiscard]] double s() const noexcept { return s_; }
  /// Critical Hardy-Sobolev exponent 2*(s) = 2(n-s)/(n-2).
  [[nodiscard]] double crit() const noexcept { return crit_; }
  [[nodiscard]] double sigma() const noexcept { return 2.0 - s_; }
  /// Decay exponent (n-2)/(2-s) of Phi in the variable r^{2-s}.
  [[nodiscard]] double decay() const noexcept { return (n_ - 2) / sigma(); }

 private:
  int n_;
  double s_;
  double crit_;
};

[[nodiscard]] inline double phi(const BubbleParams& b, double r) {
  return std::pow(1.0 + std::pow(r, b.sigma()), -b.decay());
}

/// Phi'(r) = -(n-2) r^{1-s} (1 + r^{2-s})^{-(n-s)/(2-s)}.
[[nodiscard]] inline double phi_prime(const BubbleParams& b, double r) {
  return -(b.n() - 2) * std::pow(r, 1.0 - b.s()) *
         std::pow(1.0 + std::pow(r, b.sigma()), -b.decay() - 1.0);
}

[[nodiscard]] inline double phi_second(const BubbleParams& b, double r) {
  const double sig = b.sigma();
  const double rs = std::pow(r, sig);
  const double k = b.decay() + 1.0;
  return -(b.n() - 2) * ((1.0 - b.s()) * std::pow(r, -b.s()) * std::pow(1.0 + rs, -k) -
                         k * sig * std::pow(r, 1.0 - b.s()) * std::pow(r, sig - 1.0) *
                             std::pow(1.0 + rs, -k - 1.0));
}

enum class BubbleField { kDirichlet, kL2Mass, kWeightedCrit, kMoment2Grad, kMomentCrit };

inline constexpr std::array<BubbleField, 5> kAllBubbleFields{
    BubbleField::kDirichlet, BubbleField::kL2Mass, BubbleField::kWeightedCrit,
    BubbleField::kMoment2Grad, BubbleField::kMomentCrit};

[[nodiscard]] constexpr std::string_view field_name(BubbleField f) noexcept {
  switch (f) {
    case BubbleField::kDirichlet: return "dirichlet";
    case BubbleField::kL2Mass: return "l2mass";
    case BubbleField::kWeightedCrit: return "weighted_crit";
    case BubbleField::kMoment2Grad: return "moment2_grad";
    case BubbleField::kMomentCrit: return "moment_crit";
  }
  return "?";
}

/// Radial integrand r^alpha (1+r^sigma)^{-P} times `coef`, integrated over
/// R^n (so the omega_{n-1} factor is included separately).
struct RadialMoment {
  double coef;
  double alpha;
  double power;
};

[[nodiscard]] inline RadialMoment radial_moment(const BubbleParams& b, BubbleField f) {
  const int n = b.n();
  const double s = b.s();
  const double sig = b.sigma();
  const double grad_power = 2.0 * (n - s) / sig;
  const double nm2sq = static_cast<double>((n - 2) * (n - 2));
  switch (f) {
    case BubbleField::kDirichlet: return {nm2sq, n + 1 - 2 * s, grad_power};
    case BubbleField::kL2Mass: return {1.0, static_cast<double>(n - 1), 2.0 * (n - 2) / sig};
    case BubbleField::kWeightedCrit: return {1.0, n - 1 - s, grad_power};
    case BubbleField::kMoment2Grad: return {nm2sq, n + 3 - 2 * s, grad_power};
    case BubbleField::kMomentCrit: return {1.0, n + 1 - s, grad_power};
  }
  return {0, 0, 0};
}

[[nodiscard]] inline AubinIntegralParams aubin_reduction(const BubbleParams& b,
                                                         const RadialMoment& m) {
  return {m.power, (m.alpha + 1.0) / b.sigma() - 1.0};
}

[[nodiscard]] inline bool field_converges(const BubbleParams& b, BubbleField f) {
  return aubin_reduction(b, radial_moment(b, f)).valid();
}

/// Closed-form value of one field via the beta function.
[[nodiscard]] inline double bubble_integral(const BubbleParams& b, BubbleField f) {
  const auto m = radial_moment(b, f);
  const auto pq = aubin_reduction(b, m);
  if (!pq.valid()) {
    throw DivergenceError(std::string(field_name(f)),
                          std::string(field_name(f)) + " diverges for n=" + std::to_string(b.n()) +
                              ", s=" + std::to_string(b.s()));
  }
  return m.coef * sphere_volume(b.n() - 1) * aubin_integral(pq) / b.sigma();
}

/// Same field by adaptive radial quadrature of the profile itself
/// (Phi, Phi' evaluated pointwise), with no use of the beta reduction.
[[nodiscard]] inline double bubble_integral_quadrature(const BubbleParams& b, BubbleField f,
                                                       double tol = quad::kDefaultTol) {
  if (!field_converges(b, f)) {
    throw DivergenceError(std::string(field_name(f)),
                          std::string(field_name(f)) + " diverges for n=" + std::to_string(b.n()));
  }
  const int n = b.n();
  const double s = b.s();
  const double crit = b.crit();
  auto integrand = [&](double r) -> double {
    if (r > 1e120) return 0.0;
    const double jac = std::pow(r, n - 1);
    switch (f) {
      case BubbleField::kDirichlet: {
        const double d = phi_prime(b, r);
        return d * d * jac;
      }
      case BubbleField::kL2Mass: {
        const double v = phi(b, r);
        return v * v * jac;
      }
      case BubbleField::kWeightedCrit: return std::pow(phi(b, r), crit) * std::pow(r, -s) * jac;
      case BubbleField::kMoment2Grad: {
        const double d = phi_prime(b, r);
        return r * r * d * d * jac;
      }
      case BubbleField::kMomentCrit: return std::pow(r, 2.0 - s) * std::pow(phi(b, r), crit) * jac;
    }
    return 0.0;
  };
  return sphere_volume(n - 1) * quad::positive_half_line(integrand, tol);
}

/// Integrals of Phi over R^n. Fields that diverge for (n, s) are empty.
struct BubbleIntegrals {
  std::optional<double> dirichlet;
  std::optional<double> l2mass;
  std::optional<double> weighted_crit;
  std::optional<double> moment2_grad;
  std::optional<double> moment_crit;

  [[nodiscard]] const std::optional<double>& get(BubbleField f) const {
    switch (f) {
      case BubbleField::kDirichlet: return dirichlet;
      case BubbleField::kL2Mass: return l2mass;
      case BubbleField::kWeightedCrit: return weighted_crit;
      case BubbleField::kMoment2Grad: return moment2_grad;
      case BubbleField::kMomentCrit: return moment_crit;
    }
    return dirichlet;
  }
  std::optional<double>& get(BubbleField f) {
    return const_cast<std::optional<double>&>(std::as_const(*this).get(f));
  }

  [[nodiscard]] double require(BubbleField f) const {
    const auto& v = get(f);
    if (!v) {
      throw DivergenceError(std::string(field_name(f)),
                            std::string(field_name(f)) + " is divergent for these parameters");
    }
    return *v;
  }
};

struct FieldComparison {
  BubbleField field;
  double closed_form;
  double quadrature;
  double rel_err;
};

/// Both routes for every convergent field.
[[nodiscard]] inline std::vector<FieldComparison> compare_bubble_integrals(const BubbleParams& b) {
  std::vector<FieldComparison> rows;
  for (auto f : kAllBubbleFields) {
    if (!field_converges(b, f)) continue;
    const double cf = bubble_integral(b, f);
    const double qd = bubble_integral_quadrature(b, f);
    rows.push_back({f, cf, qd, std::fabs(cf - qd) / std::fabs(cf)});
  }
  return rows;
}

/// Closed-form integrals only; the cheap path used by downstream modules.
[[nodiscard]] inline BubbleIntegrals closed_form_integrals(const BubbleParams& b) {
  BubbleIntegrals out;
  for (auto f : kAllBubbleFields) {
    if (field_converges(b, f)) out.get(f) = bubble_integral(b, f);
  }
  return out;
}

inline constexpr double kBubbleCrossCheckTol = 1e-8;

/// Computes each field both ways and returns the closed form. Throws
/// ResolutionError if the quadrature route disagrees beyond 1e-8.
[[nodiscard]] inline BubbleIntegrals bubble_integrals(const BubbleParams& b) {
  BubbleIntegrals out;
  for (const auto& row : compare_bubble_integrals(b)) {
    if (row.rel_err > kBubbleCrossCheckTol) {
      throw ResolutionError(std::string("bubble_integrals: quadrature disagrees on ") +
                            std::string(field_name(row.field)));
    }
    out.get(row.field) = row.closed_form;
  }
  return out;
}

/// K(n,s) from the extremal: (\int Phi^{2*}|X|^{-s})^{2/2*} / \int |grad Phi|^2.
[[nodiscard]] inline double sharp_constant(const BubbleParams& b) {
  const double w = bubble_integral(b, BubbleField::kWeightedCrit);
  const double d = bubble_integral(b, BubbleField::kDirichlet);
  return std::pow(w, 2.0 / b.crit()) / d;
}

/// K(n,s) = [(n-2)(n-s)]^{-1} ( omega_{n-1}/(2-s) G^2(b)/G(2b) )^{-(2-s)/(n-s)},
/// b = (n-s)/(2-s).
[[nodiscard]] inline double sharp_constant_closed_form(const BubbleParams& b) {
  const int n = b.n();
  const double s = b.s();
  const double arg = (n - s) / b.sigma();
  const double inner = sphere_volume(n - 1) / b.sigma() *
                       std::exp(2.0 * std::lgamma(arg) - std::lgamma(2.0 * arg));
  return std::pow(inner, -b.sigma() / (n - s)) / ((n - 2) * (n - s));
}

/// (n-2)(n-s): Phi solves Delta Phi = kappa Phi^{2*-1} |X|^{-s} (Delta = -div grad).
[[nodiscard]] inline double bubble_kappa(const BubbleParams& b) {
  return (b.n() - 2) * (b.n() - b.s());
}

/// c_{n,s} = (n-2)(6-s) / (12(2n-2-s)).
[[nodiscard]] inline double curvature_threshold(int n, double s) {
  return (n - 2) * (6.0 - s) / (12.0 * (2.0 * n - 2.0 - s));
}

struct ExpansionConstants {
  std::optional<double> C1;
  std::optional<double> C2;
  double c = 0.0;
  /// n = 4 only: prefactor omega_3 / \int|grad Phi|^2 of the eps^2 ln(1/eps) term.
  std::optional<double> log_prefactor;

  [[nodiscard]] double require_C1() const {
    if (!C1) throw DivergenceError("C1", "C1 needs \\int Phi^2, finite only for n >= 5");
    return *C1;
  }
  [[nodiscard]] double require_C2() const {
    if (!C2) throw DivergenceError("C2", "C2 needs \\int Phi^2, finite only for n >= 5");
    return *C2;
  }
};

/// For n >= 5,  K J(u_eps) = 1 + (C1 a(x0) - C2 Scal(x0)) eps^2 + o(eps^2) with
///   C1 = \int Phi^2 / \int|grad Phi|^2,
///   C2 = \int|X|^2|grad Phi|^2 / (6n \int|grad Phi|^2)
///        - 2/(2* 6n) \int|X|^{2-s}Phi^{2*} / \int|X|^{-s}Phi^{2*}.
[[nodiscard]] inline ExpansionConstants expansion_constants(const BubbleParams& b) {
  ExpansionConstants out;
  const int n = b.n();
  out.c = curvature_threshold(n, b.s());
  if (n >= 5) {
    const auto I = closed_form_integrals(b);
    const double d = I.require(BubbleField::kDirichlet);
    const double w = I.require(BubbleField::kWeightedCrit);
    out.C1 = I.require(BubbleField::kL2Mass) / d;
    out.C2 = I.require(BubbleField::kMoment2Grad) / (6.0 * n * d) -
             2.0 / (b.crit() * 6.0 * n) * I.require(BubbleField::kMomentCrit) / w;
  } else if (n == 4) {
    out.log_prefactor = sphere_volume(3) / bubble_integral(b, BubbleField::kDirichlet);
  }
  return out;
}

/// Max over `radii` of |Delta Phi - kappa Phi^{2*-1} r^{-s}| / |kappa Phi^{2*-1} r^{-s}|,
/// with Delta Phi = -Phi'' - (n-1)/r Phi' from the analytic derivatives.
[[nodiscard]] inline double bubble_pde_residual(const BubbleParams& b,
                                                std::span<const double> radii) {
  const double kappa = bubble_kappa(b);
  double worst = 0.0;
  for (double r : radii) {
    if (!(r > 0.0) || !std::isfinite(r)) {
      throw DomainError("bubble_pde_residual: grid must lie strictly inside (0, inf)");
    }
    const double lap = -phi_second(b, r) - (b.n() - 1) / r * phi_prime(b, r);
    const double rhs = kappa * std::pow(phi(b, r), b.crit() - 1.0) * std::pow(r, -b.s());
    worst = std::max(worst, std::fabs(lap - rhs) / std::fabs(rhs));
  }
  return worst;
}

[[nodiscard]] inline std::vector<double> log_spaced(double lo, double hi, int count) {
  std::vector<double> g(static_cast<std::size_t>(count));
  const double a = std::log(lo);
  const double step = (std::log(hi) - a) / (count - 1);
  for (int i = 0; i < count; ++i) g[static_cast<std::size_t>(i)] = std::exp(a + step * i);
  return g;
}

struct FluxIdentity {
  double closed_form;  // 1/(3-s)
  double quadrature;
};

/// n = 3:  \int_0^\infty t^{2-s} (1+t^{2-s})^{-(5-2s)/(2-s)} dt = 1/(3-s).
[[nodiscard]] inline FluxIdentity dimension3_flux_identity(double s) {
  if (!(s >= 0.0 && s < 2.0)) throw DomainError("dimension3_flux_identity: s must lie in [0, 2)");
  const double sig = 2.0 - s;
  const double p = (5.0 - 2.0 * s) / sig;
  const double q = quad::positive_half_line(
      [&](double t) { return t > 1e120 ? 0.0 : std::pow(t, sig) * std::pow(1.0 + std::pow(t, sig), -p); });
  return {1.0 / (3.0 - s), q};
}

/// Euclidean Hardy-Sobolev quotient of a radial profile f on R^n, given f and
/// f' as callables; integrals by adaptive quadrature on (0, inf).
template <class F, class DF>
[[nodiscard]] double euclidean_quotient(const BubbleParams& b, F&& f, DF&& df) {
  const int n = b.n();
  const double num = quad::positive_half_line([&](double r) {
    if (r > 1e120) return 0.0;
    const double d = df(r);
    return d * d * std::pow(r, n - 1);
  });
  const double den = quad::positive_half_line([&](double r) {
    if (r > 1e120) return 0.0;
    return std::pow(std::fabs(f(r)), b.crit()) * std::pow(r, n - 1 - b.s());
  });
  return num / std::pow(den, 2.0 / b.crit()) * std::pow(sphere_volume(n - 1), 1.0 - 2.0 / b.crit());
}

struct ExtremalityReport {
  double base = 0.0;           // Euclidean quotient of Phi
  double min_ratio = 0.0;      // min over trials of quotient(Phi + delta psi) / base
  int trials = 0;
};

/// Quotients of Phi + delta psi for random smooth bumps psi supported in
/// [c - w, c + w] and |delta| <= 1e-3.
[[nodiscard]] inline ExtremalityReport extremality_check(const BubbleParams& b, std::uint64_t seed,
                                                         int trials = 20) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> centre(0.3, 3.0);
  std::uniform_real_distribution<double> width(0.1, 0.8);
  std::uniform_real_distribution<double> amp(-1e-3, 1e-3);
  ExtremalityReport rep;
  rep.base = euclidean_quotient(
      b, [&](double r) { return phi(b, r); }, [&](double r) { return phi_prime(b, r); });
  rep.min_ratio = std::numeric_limits<double>::infinity();
  for (int k = 0; k < trials; ++k) {
    const double c = centre(rng);
    const double w = std::min(width(rng), 0.9 * c);
    const double d = amp(rng);
    auto bump = [=](double r) {
      const double x = (r - c) / w;
      return std::fabs(x) < 1.0 ? std::exp(-1.0 / (1.0 - x * x)) : 0.0;
    };
    auto dbump = [=](double r) {
      const double x = (r - c) / w;
      if (std::fabs(x) >= 1.0) return 0.0;
      const double y = 1.0 - x * x;
      return std::exp(-1.0 / y) * (-2.0 * x / (y * y)) / w;
    };
    const double qv = euclidean_quotient(
        b, [&](double r) { return phi(b, r) + d * bump(r); },
        [&](double r) { return phi_prime(b, r) + d * dbump(r); });
    rep.min_ratio = std::min(rep.min_ratio, qv / rep.base);
    ++rep.trials;
  }
  return rep;
}

struct IdentityRow {
  std::string name;
  double closed_form;
  double quadrature;
  double rel_err;
};

/// Ratio identities between the Phi-integrals, each compared against the
/// ratio of independently computed quadratures:
///   moment2_grad / l2mass     = n(n-2)(n+2-s) / (2(2n-2-s))      (n >= 5)
///   moment_crit / l2mass      = n(n-4) / (2(n-2)(2n-2-s))         (n >= 5)
///   dirichlet / weighted_crit = (n-2)(n-s)
/// and for n = 3 the normalisation integral 1/(3-s).
[[nodiscard]] inline std::vector<IdentityRow> integral_identities(const BubbleParams& b) {
  const int n = b.n();
  const double s = b.s();
  std::vector<IdentityRow> rows;
  auto q = [&](BubbleField f) { return bubble_integral_quadrature(b, f); };
  auto push = [&](std::string name, double cf, double qd) {
    rows.push_back({std::move(name), cf, qd, std::fabs(qd - cf) / std::fabs(cf)});
  };
  const double dir = q(BubbleField::kDirichlet);
  const double wc = q(BubbleField::kWeightedCrit);
  if (n >= 5) {
    const double l2 = q(BubbleField::kL2Mass);
    push("moment2_grad/l2mass", n * (n - 2.0) * (n + 2.0 - s) / (2.0 * (2.0 * n - 2.0 - s)),
         q(BubbleField::kMoment2Grad) / l2);
    push("moment_crit/l2mass", n * (n - 4.0) / (2.0 * (n - 2.0) * (2.0 * n - 2.0 - s)),
         q(BubbleField::kMomentCrit) / l2);
  }
  push("dirichlet/weighted_crit", (n - 2.0) * (n - s), dir / wc);
  if (n == 3) {
    const auto flux = dimension3_flux_identity(s);
    push("flux_normalization", flux.closed_form, flux.quadrature);
  }
  return rows;
}

}  // namespace hslab
