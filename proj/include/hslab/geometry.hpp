#pragma once

// Round spheres S^n(R) seen from a pole x0: geodesic distance r in [0, pi R],
// geodesic-sphere area |S_r| = omega_{n-1} (R sin(r/R))^{n-1}, radial grids,
// radial functions and the radial Laplace-Beltrami operator
//     Delta u = -u'' - (n-1) cot(r/R)/R u'      (Delta = -div grad).

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "hslab/errors.hpp"
#include "hslab/quadrature.hpp"
#include "hslab/special_math.hpp"

namespace hslab {

class ModelManifold {
 public:
  enum class Kind { kRoundSphere };

  static ModelManifold round_sphere(int n, double radius) { return ModelManifold(n, radius); }

  [[nodiscard]] Kind kind() const noexcept { return Kind::kRoundSphere; }
  [[nodiscard]] int n() const noexcept { return n_; }
  [[nodiscard]] double radius() const noexcept { return radius_; }
  [[nodiscard]] double injectivity_radius() const noexcept { return std::numbers::pi * radius_; }
  [[nodiscard]] double diameter() const noexcept { return injectivity_radius(); }
  [[nodiscard]] double scalar_curvature() const noexcept {
    return n_ * (n_ - 1) / (radius_ * radius_);
  }
  /// Ricci curvature is (n-1)/R^2 g on the round sphere.
  [[nodiscard]] double ricci_factor() const noexcept { return (n_ - 1) / (radius_ * radius_); }
  [[nodiscard]] double total_volume() const { return sphere_volume(n_) * std::pow(radius_, n_); }

  /// Area of the geodesic sphere of radius r; no range check.
  [[nodiscard]] double area(double r) const noexcept {
    return omega_ * std::pow(radius_ * std::sin(r / radius_), n_ - 1);
  }

  /// (sin(r/R)/(r/R))^{n-1} = sqrt(det g) averaged over directions.
  [[nodiscard]] double area_ratio(double r) const noexcept {
    const double x = r / radius_;
    if (x < 1e-4) {
      const double x2 = x * x;
      return std::pow(1.0 - x2 / 6.0 + x2 * x2 / 120.0, n_ - 1);
    }
    return std::pow(std::sin(x) / x, n_ - 1);
  }

  /// area_ratio(r) - 1 without cancellation at small r.
  [[nodiscard]] double area_ratio_minus_one(double r) const noexcept {
    const double x = r / radius_;
    double sinc_m1;
    if (x < 0.5) {
      // (sin x - x)/x = sum_k (-1)^k x^{2k} / (2k+1)!
      const double x2 = x * x;
      double term = -x2 / 6.0;
      sinc_m1 = term;
      for (int k = 2; k < 12; ++k) {
        term *= -x2 / ((2.0 * k) * (2.0 * k + 1.0));
        sinc_m1 += term;
      }
    } else {
      sinc_m1 = std::sin(x) / x - 1.0;
    }
    return std::expm1((n_ - 1) * std::log1p(sinc_m1));
  }

  /// (n-1) cot(r/R) / R = d/dr ln |S_r|.
  [[nodiscard]] double mean_curvature(double r) const noexcept {
    return (n_ - 1) / (radius_ * std::tan(r / radius_));
  }

  [[nodiscard]] double omega() const noexcept { return omega_; }

 private:
  ModelManifold(int n, double radius) : n_(n), radius_(radius) {
    if (n < 3) throw DomainError("ModelManifold: dimension must be >= 3");
    if (!(radius > 0.0) || !std::isfinite(radius)) {
      throw DomainError("ModelManifold: radius must be positive");
    }
    omega_ = sphere_volume(n - 1);
  }

  int n_;
  double radius_;
  double omega_;
};

[[nodiscard]] inline double volume_element(const ModelManifold& m, double r) {
  if (!(r > 0.0 && r < m.injectivity_radius())) {
    throw DomainError("volume_element: r must lie in (0, pi R)");
  }
  return m.area(r);
}

struct CartanReport {
  double fitted = 0.0;  // c in sqrt(det g) ~ 1 - c r^2
  double target = 0.0;  // Scal / (6n)
  double rel_error = 0.0;
  double residual = 0.0;
};

/// Least-squares fit of the averaged sqrt(det g) against 1 - c r^2 + e r^4 on
/// (0, r_max]; the quartic term only absorbs curvature-squared bias.
[[nodiscard]] inline CartanReport cartan_check(const ModelManifold& m, double r_max) {
  if (!(r_max > 0.0) || r_max > 0.1 * m.radius() * (1.0 + 1e-12)) {
    throw DomainError("cartan_check: need 0 < r_max <= 0.1 R");
  }
  constexpr int kSamples = 200;
  // Normal equations for y - 1 = -c x + e x^2 with x = r^2.
  double sxx = 0, sxxx = 0, sxxxx = 0, sxy = 0, sxxy = 0;
  for (int j = 1; j <= kSamples; ++j) {
    const double r = r_max * j / kSamples;
    const double x = r * r;
    const double y = m.area_ratio(r) - 1.0;
    sxx += x * x;
    sxxx += x * x * x;
    sxxxx += x * x * x * x;
    sxy += x * y;
    sxxy += x * x * y;
  }
  const double det = sxx * sxxxx - sxxx * sxxx;
  const double b1 = (sxy * sxxxx - sxxy * sxxx) / det;
  const double b2 = (sxx * sxxy - sxxx * sxy) / det;

  CartanReport rep;
  rep.fitted = -b1;
  rep.target = m.scalar_curvature() / (6.0 * m.n());
  rep.rel_error = std::fabs(rep.fitted - rep.target) / rep.target;
  for (int j = 1; j <= kSamples; ++j) {
    const double r = r_max * j / kSamples;
    const double x = r * r;
    rep.residual = std::max(rep.residual, std::fabs(m.area_ratio(r) - 1.0 - (b1 * x + b2 * x * x)));
  }
  if (rep.residual > 1e-7 || rep.rel_error > 1e-3) {
    throw ResolutionError("cartan_check: fit range too large for a quadratic model");
  }
  return rep;
}

/// Cell-centred radial grid on (0, pi R). Faces 0 = f_0 < ... < f_N = pi R
/// follow a Chebyshev distribution (clustered at both poles) with a few extra
/// geometrically shrinking cells next to x0. Nodes are cell midpoints and the
/// quadrature weight of a node is the exact Riemannian volume of its cell.
class RadialGrid {
 public:
  static constexpr int kMinNodes = 64;
  static constexpr int kLogCells = 2;
  static constexpr double kLogRatio = 0.5;

  static std::shared_ptr<const RadialGrid> clustered(const ModelManifold& m, int node_count) {
    if (node_count < kMinNodes) {
      throw ResolutionError("RadialGrid: need at least " + std::to_string(kMinNodes) +
                            " nodes, got " + std::to_string(node_count));
    }
    const int cheb = node_count - kLogCells;
    const double len = m.injectivity_radius();
    std::vector<double> faces;
    faces.reserve(static_cast<std::size_t>(node_count) + 1);
    faces.push_back(0.0);
    const double first = 0.5 * len * (1.0 - std::cos(std::numbers::pi / cheb));
    for (int j = kLogCells; j >= 1; --j) faces.push_back(first * std::pow(kLogRatio, j));
    for (int k = 1; k <= cheb; ++k) {
      faces.push_back(k == cheb ? len
                                : 0.5 * len * (1.0 - std::cos(std::numbers::pi * k / cheb)));
    }
    return std::shared_ptr<const RadialGrid>(new RadialGrid(m, std::move(faces)));
  }

  [[nodiscard]] const ModelManifold& manifold() const noexcept { return manifold_; }
  [[nodiscard]] std::size_t size() const noexcept { return nodes_.size(); }
  [[nodiscard]] std::span<const double> faces() const noexcept { return faces_; }
  [[nodiscard]] std::span<const double> nodes() const noexcept { return nodes_; }
  [[nodiscard]] std::span<const double> quad_weights() const noexcept { return volumes_; }
  [[nodiscard]] double node(std::size_t i) const noexcept { return nodes_[i]; }

  /// \int_cell r^{-s} dv_g for every cell, integrated exactly in t = r^{n-s}.
  [[nodiscard]] std::vector<double> singular_weights(double s) const {
    const int n = manifold_.n();
    const double e = n - s;
    std::vector<double> w(size());
    for (std::size_t i = 0; i < size(); ++i) {
      const double t0 = std::pow(faces_[i], e);
      const double t1 = std::pow(faces_[i + 1], e);
      w[i] = manifold_.omega() / e * quad::gauss15(
                                         [&](double t) {
                                           return manifold_.area_ratio(std::pow(t, 1.0 / e));
                                         },
                                         t0, t1);
    }
    return w;
  }

 private:
  RadialGrid(const ModelManifold& m, std::vector<double> faces)
      : manifold_(m), faces_(std::move(faces)) {
    const std::size_t n = faces_.size() - 1;
    nodes_.resize(n);
    volumes_.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      nodes_[i] = 0.5 * (faces_[i] + faces_[i + 1]);
      volumes_[i] = quad::gauss15([&](double r) { return manifold_.area(r); }, faces_[i],
                                  faces_[i + 1]);
    }
  }

  ModelManifold manifold_;
  std::vector<double> faces_;
  std::vector<double> nodes_;
  std::vector<double> volumes_;
};

using GridPtr = std::shared_ptr<const RadialGrid>;

/// Samples of a rotationally symmetric function at the nodes of a grid.
struct RadialFunction {
  GridPtr grid;
  std::vector<double> values;

  template <class F>
  static RadialFunction sample(GridPtr g, F&& f) {
    RadialFunction u{std::move(g), {}};
    u.values.resize(u.grid->size());
    for (std::size_t i = 0; i < u.values.size(); ++i) u.values[i] = f(u.grid->node(i));
    return u;
  }

  [[nodiscard]] std::size_t size() const noexcept { return values.size(); }
  double& operator[](std::size_t i) { return values[i]; }
  double operator[](std::size_t i) const { return values[i]; }

  /// \int_M u dv_g with the grid's cell volumes.
  [[nodiscard]] double integral() const {
    quad::CompensatedSum s;
    const auto w = grid->quad_weights();
    for (std::size_t i = 0; i < values.size(); ++i) s.add(w[i] * values[i]);
    return s.value();
  }
};

/// Radial potential a(r) about x0, continuous on [0, pi R].
class Potential {
 public:
  static Potential constant(double value) {
    return Potential([value](double) { return value; }, true, value);
  }
  static Potential radial(std::function<double(double)> f) {
    const double at0 = f(0.0);
    return Potential(std::move(f), false, at0);
  }

  double operator()(double r) const { return f_(r); }
  [[nodiscard]] double at_pole() const noexcept { return at_pole_; }
  [[nodiscard]] bool is_constant() const noexcept { return constant_; }

 private:
  Potential(std::function<double(double)> f, bool constant, double at0)
      : f_(std::move(f)), constant_(constant), at_pole_(at0) {}

  std::function<double(double)> f_;
  bool constant_;
  double at_pole_;
};

namespace detail {

/// Fornberg's recursion: weights c[k][j] for the k-th derivative at z from
/// nodes x[0..m-1], k = 0..2.
inline void fornberg_weights(double z, std::span<const double> x, double (*c)[3]) {
  const std::size_t m = x.size();
  for (std::size_t j = 0; j < m; ++j) c[j][0] = c[j][1] = c[j][2] = 0.0;
  double c1 = 1.0;
  double c4 = x[0] - z;
  c[0][0] = 1.0;
  for (std::size_t i = 1; i < m; ++i) {
    const std::size_t mn = std::min<std::size_t>(i, 2);
    double c2 = 1.0;
    const double c5 = c4;
    c4 = x[i] - z;
    for (std::size_t j = 0; j < i; ++j) {
      const double c3 = x[i] - x[j];
      c2 *= c3;
      if (j == i - 1) {
        for (std::size_t k = mn; k >= 1; --k) {
          c[i][k] = c1 * (static_cast<double>(k) * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
        }
        c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
      }
      for (std::size_t k = mn; k >= 1; --k) {
        c[j][k] = (c4 * c[j][k] - static_cast<double>(k) * c[j][k - 1]) / c3;
      }
      c[j][0] = c4 * c[j][0] / c3;
    }
    c1 = c2;
  }
}

}  // namespace detail

/// First and second derivatives of grid samples by 5-point (4th-order for the
/// first derivative on smooth grids) Fornberg stencils; one-sided at the ends.
inline void radial_derivatives(const RadialFunction& u, std::vector<double>& d1,
                               std::vector<double>& d2) {
  const std::size_t n = u.size();
  if (n < static_cast<std::size_t>(RadialGrid::kMinNodes)) {
    throw ResolutionError("radial_derivatives: grid too coarse");
  }
  const auto nodes = u.grid->nodes();
  d1.assign(n, 0.0);
  d2.assign(n, 0.0);
  double w[5][3];
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t lo = std::min(i >= 2 ? i - 2 : 0, n - 5);
    detail::fornberg_weights(nodes[i], nodes.subspan(lo, 5), w);
    double a = 0.0;
    double b = 0.0;
    for (std::size_t j = 0; j < 5; ++j) {
      a += w[j][1] * u[lo + j];
      b += w[j][2] * u[lo + j];
    }
    d1[i] = a;
    d2[i] = b;
  }
}

/// Delta_g u = -u'' - (n-1) cot(r/R)/R u' at every node.
[[nodiscard]] inline RadialFunction radial_laplacian(const ModelManifold& m,
                                                     const RadialFunction& u) {
  if (u.grid->manifold().n() != m.n() || u.grid->manifold().radius() != m.radius()) {
    throw DomainError("radial_laplacian: function sampled on a different manifold");
  }
  std::vector<double> d1;
  std::vector<double> d2;
  radial_derivatives(u, d1, d2);
  RadialFunction out{u.grid, std::vector<double>(u.size())};
  for (std::size_t i = 0; i < u.size(); ++i) {
    out[i] = -d2[i] - m.mean_curvature(u.grid->node(i)) * d1[i];
  }
  return out;
}

}  // namespace hslab
