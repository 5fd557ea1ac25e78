#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace hslab {

/// Precondition or domain violation (bad argument, non-coercive operator, ...).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// A requested integral diverges for the given parameters.
class DivergenceError : public DomainError {
 public:
  DivergenceError(std::string field, const std::string& what)
      : DomainError(what), field_(std::move(field)) {}
  [[nodiscard]] const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

/// Grid or quadrature too coarse for the requested accuracy.
class ResolutionError : public DomainError {
 public:
  using DomainError::DomainError;
};

class CoercivityError : public DomainError {
 public:
  CoercivityError(double margin, const std::string& what)
      : DomainError(what), margin_(margin) {}
  [[nodiscard]] double margin() const noexcept { return margin_; }

 private:
  double margin_;
};

/// A checked mathematical property failed (ordering, sign, ...).
class PropertyViolation : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Iterative solver or asymptotic fit did not reach its target.
class ConvergenceError : public std::runtime_error {
 public:
  ConvergenceError(const std::string& what, std::vector<double> trace = {})
      : std::runtime_error(what), trace_(std::move(trace)) {}
  [[nodiscard]] const std::vector<double>& trace() const noexcept { return trace_; }

 private:
  std::vector<double> trace_;
};

class FitError : public ConvergenceError {
 public:
  using ConvergenceError::ConvergenceError;
};

}  // namespace hslab
