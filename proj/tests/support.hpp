#pragma once

// Frozen oracle values and independent reference solvers for the tests.

#include <array>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <stdexcept>
#include <vector>

#include <boost/numeric/odeint.hpp>

#include "hslab/hslab.hpp"

namespace hslab::testing {

// 30-digit quadrature of the bubble integrals (mpmath, tanh-sinh), ratio
// W^{2/2*}/D taken afterwards.
struct FrozenK {
  int n;
  double s;
  double K;
};
inline constexpr std::array<FrozenK, 6> kFrozenK{{
    {3, 1.0, 0.34549414947133547927},
    {4, 0.0, 0.097462100154209513488},
    {3, 0.0, 0.18255157148718098549},
    {5, 1.0, 0.12655626332680269315},
    {6, 0.5, 0.066670152690074626506},
    {4, 1.0, 0.19162224362768024215},
}};

// 4 / (n (n-2) omega_n^{2/n}) evaluated in 30-digit arithmetic.
inline constexpr std::array<double, 4> kClassicalK{0.18255157148718098549, 0.097462100154209513488,
                                                   0.067513229818223584206,
                                                   0.051922544720211084607};

// I_{3.01}^{2} from the hypergeometric representation
// \int_0^1 x^c (1+x)^{-p} dx = 2F1(p, c+1; c+2; -1)/(c+1) on both folded halves.
inline constexpr double kAubinNearDivergent = 98.517314418008965076;

// J(2 + cos r) on S^3, s = 1, a = 0.5 by 30-digit quadrature.
inline constexpr double kJSmoothS3 = 2.5380236568525111618;

/// Value at r of a local cubic Lagrange interpolant of grid samples.
[[nodiscard]] inline double cubic_at(const RadialFunction& u, double r) {
  const auto x = u.grid->nodes();
  const std::size_t n = x.size();
  std::size_t j = static_cast<std::size_t>(std::upper_bound(x.begin(), x.end(), r) - x.begin());
  std::size_t lo = j >= 2 ? j - 2 : 0;
  lo = std::min(lo, n - 4);
  double out = 0.0;
  for (std::size_t a = lo; a < lo + 4; ++a) {
    double l = 1.0;
    for (std::size_t b = lo; b < lo + 4; ++b) {
      if (b != a) l *= (r - x[b]) / (x[a] - x[b]);
    }
    out += l * u[a];
  }
  return out;
}

/// \int_M f dv_g for grid samples f, through the cubic interpolant and a
/// 15-point Gauss rule on every cell.
template <class W>
[[nodiscard]] double cubic_integral(const RadialFunction& f, W&& weight) {
  const auto faces = f.grid->faces();
  const auto& m = f.grid->manifold();
  quad::CompensatedSum s;
  for (std::size_t i = 0; i + 1 < faces.size(); ++i) {
    s.add(quad::gauss15([&](double r) { return cubic_at(f, r) * weight(r) * m.area(r); }, faces[i],
                        faces[i + 1]));
  }
  return s.value();
}

/// Shooting solution of the radial problem on S^n(R)
///   -v'' - (n-1) cot(r/R)/R v' + a v = v^{q-1} / r^s,  v(0) = v0,
/// integrated with an adaptive Dormand-Prince scheme from r0 (series start)
/// to pi R - delta. `slope_end` is v' there; it vanishes for the solution
/// that is smooth at the antipode. `norm_q` is \int r^{-s} v^q dv_g.
struct ShootResult {
  double slope_end = 0.0;
  double norm_q = 0.0;
  double v_end = 0.0;
};

[[nodiscard]] inline ShootResult shoot(const ModelManifold& m, double s, double a, double q,
                                       double v0, double delta = 1e-4) {
  namespace odeint = boost::numeric::odeint;
  using State = std::array<double, 3>;
  const int n = m.n();
  const double R = m.radius();
  auto rhs = [&](const State& y, State& dy, double r) {
    const double v = std::max(y[0], 0.0);
    const double cotr = std::cos(r / R) / std::sin(r / R) / R;
    dy[0] = y[1];
    dy[1] = -(n - 1) * cotr * y[1] + a * y[0] - std::pow(v, q - 1.0) * std::pow(r, -s);
    dy[2] = std::pow(v, q) * std::pow(r, -s) * m.area(r);
  };
  // Near r = 0: (r^{n-1} v')' = -v0^{q-1} r^{n-1-s} + O(r^{n-1}), so
  // v' = -v0^{q-1} r^{1-s} / (n-s) and v = v0 - v0^{q-1} r^{2-s} / ((n-s)(2-s)).
  const double r0 = 1e-7 * R;
  const double g = std::pow(v0, q - 1.0);
  State y{v0 - g * std::pow(r0, 2.0 - s) / ((n - s) * (2.0 - s)),
          -g * std::pow(r0, 1.0 - s) / (n - s),
          std::pow(v0, q) * m.omega() * std::pow(r0, n - s) / (n - s)};
  auto stepper = odeint::make_controlled(1e-13, 1e-13, odeint::runge_kutta_dopri5<State>());
  odeint::integrate_adaptive(stepper, rhs, y, r0, m.injectivity_radius() - delta, 1e-6 * R);
  return {y[1], y[2], y[0]};
}

struct ShootingOracle {
  double v0 = 0.0;
  double lambda = 0.0;  // \|v\|_q^{q-2}
};

/// Bisection on v0 for the antipodal regularity condition inside [lo, hi].
[[nodiscard]] inline ShootingOracle shooting_oracle(const ModelManifold& m, double s, double a,
                                                    double q, double lo, double hi) {
  double flo = shoot(m, s, a, q, lo).slope_end;
  const double fhi = shoot(m, s, a, q, hi).slope_end;
  if (flo * fhi > 0.0) throw std::runtime_error("shooting_oracle: bracket has no sign change");
  for (int it = 0; it < 200 && hi - lo > 1e-15 * hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double fm = shoot(m, s, a, q, mid).slope_end;
    if ((fm < 0.0) == (flo < 0.0)) {
      lo = mid;
      flo = fm;
    } else {
      hi = mid;
    }
  }
  ShootingOracle out;
  out.v0 = 0.5 * (lo + hi);
  const auto res = shoot(m, s, a, q, out.v0);
  out.lambda = std::pow(res.norm_q, (q - 2.0) / q);
  return out;
}

}  // namespace hslab::testing
