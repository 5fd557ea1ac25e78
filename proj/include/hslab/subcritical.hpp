#pragma once

// Minimisation of
//     J_q(u) = \int (|grad u|^2 + a u^2) dv_g / (\int |u|^q d^{-s} dv_g)^{2/q}
// over radial grid functions, for 2 < q <= 2*(s). Minimisers solve
//     Delta_g u + a u = lambda_q u^{q-1} d^{-s},   lambda_q = J_q(u),
// after the normalisation \int u^q d^{-s} dv_g = 1.
//
// The descent direction is the gradient in the metric of the energy itself,
// p = u - lambda (Delta + a)^{-1}(w u^{q-1}); a unit step is the nonlinear
// inverse iteration. Steps follow Barzilai-Borwein with monotone backtracking,
// and each iterate is replaced by |u| and renormalised.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <numbers>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "hslab/bubble.hpp"
#include "hslab/errors.hpp"
#include "hslab/geometry.hpp"
#include "hslab/quadrature.hpp"
#include "hslab/radial_fv.hpp"

namespace hslab {

struct SubcriticalProblem {
  ModelManifold manifold;
  double s;
  Potential a;
  double q;
  GridPtr grid;

  static SubcriticalProblem make(const ModelManifold& m, double s, Potential a, double q,
                                 int nodes) {
    return SubcriticalProblem{m, s, std::move(a), q, RadialGrid::clustered(m, nodes)};
  }

  [[nodiscard]] BubbleParams bubble() const { return {manifold.n(), s}; }

  void validate() const {
    const auto b = bubble();
    if (!(q > 2.0 && q <= b.crit() * (1.0 + 1e-14))) {
      throw DomainError("SubcriticalProblem: q must lie in (2, 2*(s)]");
    }
    if (grid->manifold().n() != manifold.n() || grid->manifold().radius() != manifold.radius()) {
      throw DomainError("SubcriticalProblem: grid built on another manifold");
    }
  }

  [[nodiscard]] SubcriticalProblem with_q(double q_new) const {
    auto p = *this;
    p.q = q_new;
    return p;
  }
};

struct MinimizerOptions {
  double tol = 1e-8;
  long max_iters = 100000;
  int max_backtracks = 40;
  int divergence_window = 100;
};

struct MinimizerResult {
  RadialFunction u;
  double lambda = 0.0;
  double q = 0.0;
  double el_residual = 0.0;
  double normalization = 0.0;
  long iterations = 0;
  bool converged = false;
  std::vector<double> trace;  // J_q after each accepted step
};

/// Relative sup-norm of the discrete Euler-Lagrange defect
///   ((Delta + a) u)_i - lambda (w u^{q-1})_i, per unit cell volume,
/// divided by the sup of the right-hand side.
[[nodiscard]] inline double el_residual(const DiscreteFunctional& F, std::span<const double> u,
                                        double lambda) {
  const auto Au = F.op().apply(u);
  const auto vol = F.grid()->quad_weights();
  const auto w = F.weights();
  double num = 0.0;
  double den = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    const double rhs = lambda * w[i] * std::pow(std::fabs(u[i]), F.q() - 1.0);
    num = std::max(num, std::fabs(Au[i] - rhs) / vol[i]);
    den = std::max(den, std::fabs(rhs) / vol[i]);
  }
  return den > 0.0 ? num / den : num;
}

[[nodiscard]] inline double el_residual(const RadialFunction& u, double lambda,
                                        const SubcriticalProblem& problem) {
  const DiscreteFunctional F(u.grid, problem.a, problem.s, problem.q);
  return el_residual(F, u.values, lambda);
}

namespace detail {

inline void normalize(const DiscreteFunctional& F, std::vector<double>& u) {
  for (double& x : u) x = std::fabs(x);
  const double c = F.constraint(u);
  if (!(c > 0.0) || !std::isfinite(c)) throw DomainError("minimize_Jq: iterate vanished");
  const double k = std::pow(c, -1.0 / F.q());
  for (double& x : u) x *= k;
}

/// p = u - lambda A^{-1}(w u^{q-1}) for normalised u.
[[nodiscard]] inline std::vector<double> preconditioned_gradient(const DiscreteFunctional& F,
                                                                 std::span<const double> u,
                                                                 double lambda) {
  const auto w = F.weights();
  std::vector<double> rhs(u.size());
  for (std::size_t i = 0; i < u.size(); ++i) rhs[i] = w[i] * std::pow(u[i], F.q() - 1.0);
  auto z = F.op().solve(rhs);
  for (std::size_t i = 0; i < u.size(); ++i) z[i] = u[i] - lambda * z[i];
  return z;
}

[[nodiscard]] inline double a_inner(const DiscreteFunctional& F, std::span<const double> x,
                                    std::span<const double> y) {
  const auto Ay = F.op().apply(y);
  quad::CompensatedSum s;
  for (std::size_t i = 0; i < x.size(); ++i) s.add(x[i] * Ay[i]);
  return s.value();
}

}  // namespace detail

[[nodiscard]] inline MinimizerResult minimize_Jq(const SubcriticalProblem& problem,
                                                 const RadialFunction& init,
                                                 const MinimizerOptions& opt = {}) {
  problem.validate();
  if (init.grid.get() != problem.grid.get() && init.size() != problem.grid->size()) {
    throw DomainError("minimize_Jq: initial guess sampled on another grid");
  }
  const DiscreteFunctional F(problem.grid, problem.a, problem.s, problem.q);
  const double margin = F.op().coercivity_margin();
  if (!(margin > kCoercivityThreshold)) {
    throw CoercivityError(margin, "minimize_Jq: Delta_g + a is not coercive");
  }
  std::vector<double> u = init.values;
  bool nonneg = true;
  bool nonzero = false;
  for (double x : u) {
    nonneg = nonneg && x >= 0.0;
    nonzero = nonzero || x != 0.0;
  }
  if (!nonneg || !nonzero) throw DomainError("minimize_Jq: init must be nonnegative and nonzero");
  detail::normalize(F, u);

  MinimizerResult out;
  out.q = problem.q;
  double lambda = F.energy(u);
  std::vector<double> p = detail::preconditioned_gradient(F, u, lambda);
  std::vector<double> u_prev;
  std::vector<double> p_prev;
  double tau = 1.0;
  int rising = 0;
  out.trace.push_back(lambda);

  long it = 0;
  double res = el_residual(F, u, lambda);
  for (; it < opt.max_iters && res > opt.tol; ++it) {
    if (!u_prev.empty()) {
      std::vector<double> ds(u.size());
      std::vector<double> dp(u.size());
      for (std::size_t i = 0; i < u.size(); ++i) {
        ds[i] = u[i] - u_prev[i];
        dp[i] = p[i] - p_prev[i];
      }
      const double num = detail::a_inner(F, ds, ds);
      const double den = detail::a_inner(F, ds, dp);
      tau = (den > 0.0 && num > 0.0) ? std::clamp(num / den, 1e-3, 1e3) : 1.0;
    }
    std::vector<double> trial(u.size());
    double j_trial = 0.0;
    bool accepted = false;
    for (int bt = 0; bt <= opt.max_backtracks; ++bt) {
      for (std::size_t i = 0; i < u.size(); ++i) trial[i] = u[i] - tau * p[i];
      detail::normalize(F, trial);
      j_trial = F.energy(trial);
      if (j_trial <= lambda * (1.0 + 4e-16)) {
        accepted = true;
        break;
      }
      tau *= 0.5;
    }
    if (!accepted) {
      // No decrease available at rounding level; take the plain inverse-iteration step.
      for (std::size_t i = 0; i < u.size(); ++i) trial[i] = u[i] - p[i];
      detail::normalize(F, trial);
      j_trial = F.energy(trial);
    }
    rising = j_trial > lambda ? rising + 1 : 0;
    if (rising >= opt.divergence_window) {
      throw ConvergenceError("minimize_Jq: energy increased over " +
                                 std::to_string(opt.divergence_window) + " consecutive steps",
                             out.trace);
    }
    u_prev = std::move(u);
    p_prev = std::move(p);
    u = std::move(trial);
    lambda = j_trial;
    p = detail::preconditioned_gradient(F, u, lambda);
    out.trace.push_back(lambda);
    res = el_residual(F, u, lambda);
  }

  out.iterations = it;
  out.lambda = lambda;
  out.el_residual = res;
  out.converged = res <= opt.tol;
  out.normalization = F.constraint(u);
  out.u = RadialFunction{problem.grid, std::move(u)};
  return out;
}

/// u_eps(r) = eps^{-(n-2)/2} Phi(r/eps) on the problem grid.
[[nodiscard]] inline RadialFunction bubble_initial_guess(const SubcriticalProblem& problem,
                                                         double eps) {
  const auto b = problem.bubble();
  return RadialFunction::sample(problem.grid, [&](double r) {
    return std::pow(eps, -0.5 * (b.n() - 2)) * phi(b, r / eps);
  });
}

inline constexpr double kInitialCutoffFraction = 0.4;

/// eps = 0.1 rho with rho = 0.4 R.
[[nodiscard]] inline double default_initial_eps(const ModelManifold& m) {
  return 0.1 * kInitialCutoffFraction * m.radius();
}

/// {2.2, 2.5, 2.8, ...} below 2*(s) - 0.05, then 2*(s) - 0.05 and 2*(s).
[[nodiscard]] inline std::vector<double> default_ladder(const BubbleParams& b) {
  std::vector<double> q;
  const double top = b.crit() - 0.05;
  for (double x = 2.2; x < top - 1e-9; x += 0.3) q.push_back(x);
  q.push_back(top);
  q.push_back(b.crit());
  return q;
}

struct ContinuationResult {
  std::vector<MinimizerResult> stages;
  std::optional<std::size_t> failure_index;
  std::string failure;

  [[nodiscard]] bool complete() const noexcept { return !failure_index.has_value(); }
  [[nodiscard]] const MinimizerResult& final_stage() const { return stages.back(); }

  [[nodiscard]] std::vector<double> lambdas() const {
    std::vector<double> out;
    for (const auto& r : stages) out.push_back(r.lambda);
    return out;
  }

  /// |lambda_k - lambda_{k+1}| over the last three rungs, in ladder order.
  [[nodiscard]] std::vector<double> tail_differences() const {
    std::vector<double> d;
    const auto l = lambdas();
    const std::size_t start = l.size() >= 4 ? l.size() - 4 : 0;
    for (std::size_t k = start; k + 1 < l.size(); ++k) d.push_back(std::fabs(l[k + 1] - l[k]));
    return d;
  }

  [[nodiscard]] bool cauchy_tail() const {
    const auto d = tail_differences();
    if (d.size() < 2) return false;
    for (std::size_t k = 0; k + 1 < d.size(); ++k) {
      if (!(d[k + 1] < d[k])) return false;
    }
    return true;
  }
};

/// Runs the ladder, warm-starting every rung from the previous minimiser.
/// A failing rung stops the ladder; the stages computed so far are kept.
[[nodiscard]] inline ContinuationResult continuation(const SubcriticalProblem& problem,
                                                     std::span<const double> ladder,
                                                     const RadialFunction& init,
                                                     const MinimizerOptions& opt = {}) {
  const auto b = problem.bubble();
  for (std::size_t k = 0; k < ladder.size(); ++k) {
    if (!(ladder[k] > 2.0 && ladder[k] <= b.crit() * (1.0 + 1e-14)) ||
        (k > 0 && !(ladder[k] > ladder[k - 1]))) {
      throw DomainError("continuation: ladder must increase within (2, 2*(s)]");
    }
  }
  ContinuationResult out;
  RadialFunction guess = init;
  for (std::size_t k = 0; k < ladder.size(); ++k) {
    try {
      auto r = minimize_Jq(problem.with_q(ladder[k]), guess, opt);
      guess = r.u;
      const bool ok = r.converged;
      out.stages.push_back(std::move(r));
      if (!ok) {
        out.failure_index = k;
        out.failure = "rung did not reach the residual tolerance";
        break;
      }
    } catch (const ConvergenceError& e) {
      out.failure_index = k;
      out.failure = e.what();
      break;
    }
  }
  return out;
}

enum class Verdict { kBelowThreshold, kAtThreshold, kAbove };

[[nodiscard]] constexpr std::string_view verdict_name(Verdict v) noexcept {
  switch (v) {
    case Verdict::kBelowThreshold: return "BELOW_THRESHOLD";
    case Verdict::kAtThreshold: return "AT_THRESHOLD";
    case Verdict::kAbove: return "ABOVE";
  }
  return "?";
}

struct ExistenceVerdict {
  Verdict verdict = Verdict::kAtThreshold;
  double threshold = 0.0;  // 1/K(n,s)
  double margin = 0.0;     // threshold - lambda
  bool under_resolved = false;
};

inline constexpr double kThresholdBand = 1e-4;

[[nodiscard]] inline ExistenceVerdict existence_verdict_for(double lambda, const BubbleParams& b) {
  ExistenceVerdict v;
  v.threshold = 1.0 / sharp_constant(b);
  v.margin = v.threshold - lambda;
  if (std::fabs(v.margin) <= kThresholdBand * v.threshold) {
    v.verdict = Verdict::kAtThreshold;
  } else if (v.margin > 0.0) {
    v.verdict = Verdict::kBelowThreshold;
  } else {
    v.verdict = Verdict::kAbove;
    v.under_resolved = true;
  }
  return v;
}

/// Compares lambda with 1/K(n,s). ABOVE cannot hold for the true infimum, so
/// it is reported as an under-resolution flag.
[[nodiscard]] inline ExistenceVerdict existence_verdict(const MinimizerResult& final,
                                                        const BubbleParams& b) {
  if (!final.converged) throw DomainError("existence_verdict: minimiser did not converge");
  return existence_verdict_for(final.lambda, b);
}

/// Gradient of J_q at u projected onto the tangent space of the constraint.
[[nodiscard]] inline std::vector<double> constrained_gradient(const DiscreteFunctional& F,
                                                              std::span<const double> u) {
  auto g = F.gradient(u);
  const auto w = F.weights();
  std::vector<double> c(u.size());
  double cc = 0.0;
  double gc = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    c[i] = F.q() * w[i] * std::pow(std::fabs(u[i]), F.q() - 1.0) * (u[i] < 0 ? -1.0 : 1.0);
    cc += c[i] * c[i];
    gc += g[i] * c[i];
  }
  for (std::size_t i = 0; i < u.size(); ++i) g[i] -= gc / cc * c[i];
  return g;
}

struct GradientCheck {
  double max_rel_error = 0.0;
  std::vector<double> rel_errors;
};

/// Compares the constrained gradient with central differences of J_q along
/// random tangent directions at random positive points.
[[nodiscard]] inline GradientCheck gradient_check(const SubcriticalProblem& problem,
                                                  std::uint64_t seed, int points = 10) {
  problem.validate();
  const DiscreteFunctional F(problem.grid, problem.a, problem.s, problem.q);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  const auto nodes = problem.grid->nodes();
  const double L = problem.manifold.injectivity_radius();
  GradientCheck out;
  for (int k = 0; k < points; ++k) {
    // Smooth random positive point: 1.5 + sum of a few cosine modes.
    std::vector<double> u(nodes.size());
    const double c1 = unif(rng);
    const double c2 = unif(rng);
    const double c3 = unif(rng);
    for (std::size_t i = 0; i < u.size(); ++i) {
      const double x = std::numbers::pi * nodes[i] / L;
      u[i] = 1.5 + 0.4 * c1 * std::cos(x) + 0.3 * c2 * std::cos(2 * x) + 0.2 * c3 * std::cos(3 * x);
    }
    detail::normalize(F, u);
    const auto g = constrained_gradient(F, u);
    std::vector<double> v(u.size());
    const double d1 = unif(rng);
    const double d2 = unif(rng);
    for (std::size_t i = 0; i < v.size(); ++i) {
      const double x = std::numbers::pi * nodes[i] / L;
      v[i] = d1 * std::sin(x) + d2 * std::cos(2 * x);
    }
    // Tangential part of v.
    const auto w = F.weights();
    double vc = 0.0;
    double cc = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
      const double c = problem.q * w[i] * std::pow(u[i], problem.q - 1.0);
      vc += v[i] * c;
      cc += c * c;
    }
    for (std::size_t i = 0; i < v.size(); ++i) {
      v[i] -= vc / cc * problem.q * w[i] * std::pow(u[i], problem.q - 1.0);
    }
    const double h = 1e-4;
    std::vector<double> up(u);
    std::vector<double> um(u);
    for (std::size_t i = 0; i < u.size(); ++i) {
      up[i] += h * v[i];
      um[i] -= h * v[i];
    }
    const double fd = (F.value(up) - F.value(um)) / (2.0 * h);
    quad::CompensatedSum an;
    for (std::size_t i = 0; i < u.size(); ++i) an.add(g[i] * v[i]);
    const double err = std::fabs(fd - an.value()) / std::max(std::fabs(an.value()), 1e-300);
    out.rel_errors.push_back(err);
    out.max_rel_error = std::max(out.max_rel_error, err);
  }
  return out;
}

/// min over eps of the discrete J_q of the sampled bubble u_eps; the
/// minimum over the test family as seen by the solver's grid.
[[nodiscard]] inline double bubble_family_minimum(const SubcriticalProblem& problem,
                                                  std::span<const double> eps_list) {
  problem.validate();
  const DiscreteFunctional F(problem.grid, problem.a, problem.s, problem.q);
  double best = std::numeric_limits<double>::infinity();
  for (double eps : eps_list) {
    if (!(eps > 0.0)) throw DomainError("bubble_family_minimum: eps must be positive");
    best = std::min(best, F.value(bubble_initial_guess(problem, eps).values));
  }
  return best;
}

}  // namespace hslab
