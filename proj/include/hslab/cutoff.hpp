#pragma once

// eta = 1 on [0, rho], 0 beyond 2 rho, joined by the quintic smoothstep
// 1 - (10x^3 - 15x^4 + 6x^5), x = (r - rho)/rho, which is C^2.

#include <cmath>

#include "hslab/errors.hpp"

namespace hslab {

class Cutoff {
 public:
  explicit Cutoff(double rho) : rho_(rho) {
    if (!(rho > 0.0) || !std::isfinite(rho)) throw DomainError("Cutoff: rho must be positive");
  }

  [[nodiscard]] double rho() const noexcept { return rho_; }
  [[nodiscard]] double support() const noexcept { return 2.0 * rho_; }

  [[nodiscard]] double operator()(double r) const noexcept {
    if (r <= rho_) return 1.0;
    if (r >= 2.0 * rho_) return 0.0;
    const double x = (r - rho_) / rho_;
    return 1.0 - x * x * x * (10.0 + x * (-15.0 + 6.0 * x));
  }

  [[nodiscard]] double d1(double r) const noexcept {
    if (r <= rho_ || r >= 2.0 * rho_) return 0.0;
    const double x = (r - rho_) / rho_;
    return -30.0 * x * x * (1.0 - x) * (1.0 - x) / rho_;
  }

  [[nodiscard]] double d2(double r) const noexcept {
    if (r <= rho_ || r >= 2.0 * rho_) return 0.0;
    const double x = (r - rho_) / rho_;
    return -60.0 * x * (1.0 - x) * (1.0 - 2.0 * x) / (rho_ * rho_);
  }

 private:
  double rho_;
};

}  // namespace hslab
