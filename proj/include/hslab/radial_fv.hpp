#pragma once

// Cell-centred finite-volume form of Delta_g + a on a RadialGrid. For a
// radial u the quadratic form
//     Q(u) = \int_M |grad u|^2 + a u^2 dv_g
// is approximated by
//     Q_h(u) = sum_faces |S_f| (u_{i+1} - u_i)^2 / (r_{i+1} - r_i) + sum_i m_i u_i^2,
// m_i = \int_cell a dv_g. The poles are faces of zero area, so no boundary
// condition is imposed: regularity at x0 and at the antipode is natural.

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <vector>

#include "hslab/errors.hpp"
#include "hslab/geometry.hpp"
#include "hslab/quadrature.hpp"

namespace hslab {

/// Symmetric tridiagonal matrix: diag[i], off[i] couples i and i+1.
struct Tridiagonal {
  std::vector<double> diag;
  std::vector<double> off;

  [[nodiscard]] std::size_t size() const noexcept { return diag.size(); }

  [[nodiscard]] std::vector<double> apply(std::span<const double> u) const {
    const std::size_t n = size();
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) {
      double v = diag[i] * u[i];
      if (i > 0) v += off[i - 1] * u[i - 1];
      if (i + 1 < n) v += off[i] * u[i + 1];
      out[i] = v;
    }
    return out;
  }

  [[nodiscard]] double quadratic_form(std::span<const double> u) const {
    quad::CompensatedSum s;
    const std::size_t n = size();
    for (std::size_t i = 0; i < n; ++i) {
      s.add(diag[i] * u[i] * u[i]);
      if (i + 1 < n) s.add(2.0 * off[i] * u[i] * u[i + 1]);
    }
    return s.value();
  }

  /// Thomas algorithm; the matrix must be nonsingular without pivoting
  /// (true for the diagonally dominant operators built here).
  [[nodiscard]] std::vector<double> solve(std::span<const double> rhs) const {
    const std::size_t n = size();
    std::vector<double> c(n);
    std::vector<double> x(rhs.begin(), rhs.end());
    double b = diag[0];
    if (b == 0.0) throw DomainError("Tridiagonal::solve: zero pivot");
    x[0] /= b;
    for (std::size_t i = 1; i < n; ++i) {
      c[i - 1] = off[i - 1] / b;
      b = diag[i] - off[i - 1] * c[i - 1];
      if (b == 0.0) throw DomainError("Tridiagonal::solve: zero pivot");
      x[i] = (x[i] - off[i - 1] * x[i - 1]) / b;
    }
    for (std::size_t i = n - 1; i-- > 0;) x[i] -= c[i] * x[i + 1];
    return x;
  }

  /// Number of eigenvalues strictly below x (Sturm count of the LDL^T pivots).
  [[nodiscard]] std::size_t count_below(double x) const {
    std::size_t count = 0;
    double d = 1.0;
    for (std::size_t i = 0; i < size(); ++i) {
      const double o2 = i > 0 ? off[i - 1] * off[i - 1] : 0.0;
      d = diag[i] - x - (i > 0 ? o2 / d : 0.0);
      if (d == 0.0) d = -std::numeric_limits<double>::min();
      if (d < 0.0) ++count;
    }
    return count;
  }

  /// Smallest eigenvalue by bisection on the Sturm count.
  [[nodiscard]] double smallest_eigenvalue(double tol = 1e-14) const {
    double lo = std::numeric_limits<double>::max();
    double hi = -lo;
    for (std::size_t i = 0; i < size(); ++i) {
      const double radius = (i > 0 ? std::fabs(off[i - 1]) : 0.0) +
                            (i + 1 < size() ? std::fabs(off[i]) : 0.0);
      lo = std::min(lo, diag[i] - radius);
      hi = std::max(hi, diag[i] + radius);
    }
    for (int it = 0; it < 400; ++it) {
      if (hi - lo <= tol * std::max({std::fabs(lo), std::fabs(hi), 1e-300})) break;
      const double mid = 0.5 * (lo + hi);
      if (count_below(mid) >= 1) {
        hi = mid;
      } else {
        lo = mid;
      }
    }
    return 0.5 * (lo + hi);
  }

  /// D^{-1/2} T D^{-1/2} for a positive diagonal D.
  [[nodiscard]] Tridiagonal scaled(std::span<const double> weights) const {
    Tridiagonal t = *this;
    for (std::size_t i = 0; i < size(); ++i) {
      t.diag[i] /= weights[i];
      if (i + 1 < size()) t.off[i] /= std::sqrt(weights[i] * weights[i + 1]);
    }
    return t;
  }
};

/// Discrete Delta_g + a together with the cell data it was built from.
class RadialOperator {
 public:
  RadialOperator(GridPtr grid, const Potential& a) : grid_(std::move(grid)) {
    const auto& m = grid_->manifold();
    const auto faces = grid_->faces();
    const auto nodes = grid_->nodes();
    const std::size_t n = grid_->size();
    stiffness_.diag.assign(n, 0.0);
    stiffness_.off.assign(n - 1, 0.0);
    conductance_.resize(n - 1);
    for (std::size_t i = 0; i + 1 < n; ++i) {
      const double c = m.area(faces[i + 1]) / (nodes[i + 1] - nodes[i]);
      conductance_[i] = c;
      stiffness_.off[i] = -c;
      stiffness_.diag[i] += c;
      stiffness_.diag[i + 1] += c;
    }
    mass_.resize(n);
    const auto vol = grid_->quad_weights();
    for (std::size_t i = 0; i < n; ++i) {
      mass_[i] = a.is_constant()
                     ? a.at_pole() * vol[i]
                     : quad::gauss15([&](double r) { return a(r) * m.area(r); }, faces[i],
                                     faces[i + 1]);
    }
    full_ = stiffness_;
    for (std::size_t i = 0; i < n; ++i) full_.diag[i] += mass_[i];
  }

  [[nodiscard]] const GridPtr& grid() const noexcept { return grid_; }
  [[nodiscard]] const Tridiagonal& matrix() const noexcept { return full_; }
  [[nodiscard]] const Tridiagonal& stiffness() const noexcept { return stiffness_; }
  [[nodiscard]] std::span<const double> potential_mass() const noexcept { return mass_; }

  /// Q_h(u) as a sum of nonnegative face and cell terms.
  [[nodiscard]] double energy(std::span<const double> u) const {
    quad::CompensatedSum s;
    for (std::size_t i = 0; i < conductance_.size(); ++i) {
      const double d = u[i + 1] - u[i];
      s.add(conductance_[i] * d * d);
    }
    for (std::size_t i = 0; i < mass_.size(); ++i) s.add(mass_[i] * u[i] * u[i]);
    return s.value();
  }

  /// (Delta + a) u integrated over each cell, assembled from face fluxes so
  /// that nearly constant u does not cancel catastrophically.
  [[nodiscard]] std::vector<double> apply(std::span<const double> u) const {
    std::vector<double> out(u.size());
    for (std::size_t i = 0; i < u.size(); ++i) out[i] = mass_[i] * u[i];
    for (std::size_t i = 0; i < conductance_.size(); ++i) {
      const double flux = conductance_[i] * (u[i + 1] - u[i]);
      out[i] -= flux;
      out[i + 1] += flux;
    }
    return out;
  }

  /// (Delta + a)^{-1} rhs by the Thomas algorithm plus one step of iterative
  /// refinement against the flux-form residual.
  [[nodiscard]] std::vector<double> solve(std::span<const double> rhs) const {
    auto x = full_.solve(rhs);
    const auto ax = apply(x);
    std::vector<double> r(rhs.size());
    for (std::size_t i = 0; i < r.size(); ++i) r[i] = rhs[i] - ax[i];
    const auto dx = full_.solve(r);
    for (std::size_t i = 0; i < x.size(); ++i) x[i] += dx[i];
    return x;
  }

  /// Smallest Rayleigh quotient Q_h(u) / \int u^2 over grid functions.
  [[nodiscard]] double coercivity_margin() const {
    return full_.scaled(grid_->quad_weights()).smallest_eigenvalue();
  }

  /// Smallest mu with (Delta + a) u = mu w u in the discrete sense.
  [[nodiscard]] double weighted_ground_eigenvalue(std::span<const double> w) const {
    return full_.scaled(w).smallest_eigenvalue();
  }

 private:
  GridPtr grid_;
  Tridiagonal stiffness_;
  Tridiagonal full_;
  std::vector<double> conductance_;
  std::vector<double> mass_;
};

inline constexpr double kCoercivityThreshold = 1e-8;

/// J_q(u) = Q_h(u) / (sum_i w_i |u_i|^q)^{2/q} with w_i = \int_cell d^{-s} dv_g.
class DiscreteFunctional {
 public:
  DiscreteFunctional(GridPtr grid, const Potential& a, double s, double q)
      : op_(grid, a), weights_(grid->singular_weights(s)), s_(s), q_(q) {}

  [[nodiscard]] const RadialOperator& op() const noexcept { return op_; }
  [[nodiscard]] const GridPtr& grid() const noexcept { return op_.grid(); }
  [[nodiscard]] std::span<const double> weights() const noexcept { return weights_; }
  [[nodiscard]] double s() const noexcept { return s_; }
  [[nodiscard]] double q() const noexcept { return q_; }

  [[nodiscard]] double constraint(std::span<const double> u) const {
    quad::CompensatedSum c;
    for (std::size_t i = 0; i < u.size(); ++i) c.add(weights_[i] * std::pow(std::fabs(u[i]), q_));
    return c.value();
  }

  [[nodiscard]] double energy(std::span<const double> u) const { return op_.energy(u); }

  [[nodiscard]] double value(std::span<const double> u) const {
    const double c = constraint(u);
    if (!(c > 0.0)) throw DomainError("J: u vanishes identically");
    return energy(u) / std::pow(c, 2.0 / q_);
  }

  /// Euclidean gradient of J_q at u.
  [[nodiscard]] std::vector<double> gradient(std::span<const double> u) const {
    const double c = constraint(u);
    const double scale = std::pow(c, -2.0 / q_);
    const double lambda = energy(u) * scale / c;
    auto g = op_.apply(u);
    for (std::size_t i = 0; i < u.size(); ++i) {
      const double ui = u[i];
      const double nl = weights_[i] * std::pow(std::fabs(ui), q_ - 1.0) * (ui < 0 ? -1.0 : 1.0);
      g[i] = 2.0 * scale * g[i] - 2.0 * lambda * nl;
    }
    return g;
  }

 private:
  RadialOperator op_;
  std::vector<double> weights_;
  double s_;
  double q_;
};

}  // namespace hslab
