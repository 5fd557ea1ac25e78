#pragma once

// Adaptive quadrature helpers shared by every module.
//
// Finite intervals go through double-exponential (tanh-sinh) quadrature, which
// tolerates integrable algebraic endpoint singularities such as r^{-s}. The
// half line (0, inf) is split at r = 1 and each half is mapped to [0, inf) by
// r = e^{-tau} (resp. r = e^{tau}); algebraic decay/blow-up becomes
// exponential in tau and exp-sinh handles it.

#include <array>
#include <cmath>
#include <limits>
#include <span>

#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>

#include "hslab/errors.hpp"

namespace hslab::quad {

inline constexpr double kDefaultTol = 1e-13;

/// Neumaier-compensated running sum.
class CompensatedSum {
 public:
  void add(double x) noexcept {
    const double t = sum_ + x;
    if (std::fabs(sum_) >= std::fabs(x)) {
      comp_ += (sum_ - t) + x;
    } else {
      comp_ += (x - t) + sum_;
    }
    sum_ = t;
  }
  [[nodiscard]] double value() const noexcept { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

namespace detail {

inline boost::math::quadrature::tanh_sinh<double>& tanh_sinh_engine() {
  static thread_local boost::math::quadrature::tanh_sinh<double> engine(18);
  return engine;
}

inline boost::math::quadrature::exp_sinh<double>& exp_sinh_engine() {
  static thread_local boost::math::quadrature::exp_sinh<double> engine(12);
  return engine;
}

inline void check_finite(double v, const char* where) {
  if (!std::isfinite(v)) {
    throw ResolutionError(std::string("quadrature produced a non-finite value in ") + where);
  }
}

}  // namespace detail

/// \int_a^b f. Endpoints are never evaluated.
template <class F>
[[nodiscard]] double finite(F&& f, double a, double b, double tol = kDefaultTol) {
  if (a == b) return 0.0;
  // Integrate over [0, 1] so abscissae near an endpoint never round onto it.
  const double h = b - a;
  double err = 0.0;
  const double v = detail::tanh_sinh_engine().integrate(
      [&](double u) {
        const double y = f(u < 0.5 ? a + h * u : b - h * (1.0 - u));
        return std::isfinite(y) ? y : 0.0;
      },
      0.0, 1.0, tol, &err);
  detail::check_finite(v, "finite()");
  return v * h;
}

/// \int_0^\infty f(r) dr for f integrable at both ends.
template <class F>
[[nodiscard]] double positive_half_line(F&& f, double tol = kDefaultTol) {
  constexpr double kMaxTau = 700.0;
  auto& engine = detail::exp_sinh_engine();
  auto inner = [&](double tau) {
    if (tau > kMaxTau) return 0.0;
    const double r = std::exp(-tau);
    const double y = f(r) * r;
    return std::isfinite(y) ? y : 0.0;
  };
  auto outer = [&](double tau) {
    if (tau > kMaxTau) return 0.0;
    const double r = std::exp(tau);
    const double y = f(r) * r;
    return std::isfinite(y) ? y : 0.0;
  };
  const double inf = std::numeric_limits<double>::infinity();
  double e1 = 0.0;
  double e2 = 0.0;
  CompensatedSum total;
  total.add(engine.integrate(inner, 0.0, inf, tol, &e1));
  total.add(engine.integrate(outer, 0.0, inf, tol, &e2));
  detail::check_finite(total.value(), "positive_half_line()");
  return total.value();
}

/// \int_T^\infty f(r) dr, T > 0, through r = T e^tau.
template <class F>
[[nodiscard]] double upper_tail(F&& f, double T, double tol = kDefaultTol) {
  constexpr double kMaxTau = 700.0;
  auto g = [&](double tau) {
    if (tau > kMaxTau) return 0.0;
    const double r = T * std::exp(tau);
    const double y = f(r) * r;
    return std::isfinite(y) ? y : 0.0;
  };
  double err = 0.0;
  const double v = detail::exp_sinh_engine().integrate(
      g, 0.0, std::numeric_limits<double>::infinity(), tol, &err);
  detail::check_finite(v, "upper_tail()");
  return v;
}

/// Sum of finite() over consecutive breakpoints (sorted ascending).
template <class F>
[[nodiscard]] double piecewise(F&& f, std::span<const double> breaks, double tol = kDefaultTol) {
  CompensatedSum total;
  for (std::size_t i = 0; i + 1 < breaks.size(); ++i) {
    if (breaks[i + 1] > breaks[i]) total.add(finite(f, breaks[i], breaks[i + 1], tol));
  }
  return total.value();
}

/// Composite 15-point Gauss-Legendre over consecutive breakpoints.
template <class F>
[[nodiscard]] double composite_gauss15(F&& f, std::span<const double> breaks) {
  CompensatedSum total;
  for (std::size_t i = 0; i + 1 < breaks.size(); ++i) {
    if (breaks[i + 1] > breaks[i]) {
      total.add(boost::math::quadrature::gauss<double, 15>::integrate(f, breaks[i], breaks[i + 1]));
    }
  }
  return total.value();
}

/// Fixed 15-point Gauss-Legendre on [a, b]; for smooth per-cell integrands.
template <class F>
[[nodiscard]] double gauss15(F&& f, double a, double b) {
  return boost::math::quadrature::gauss<double, 15>::integrate(f, a, b);
}

}  // namespace hslab::quad
