#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace eec {

/// Bad input: out-of-range order, unknown fixture, malformed file, etc.
class ArgumentError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class UnsupportedDimensionError : public ArgumentError {
 public:
  using ArgumentError::ArgumentError;
};

/// Base for every failure caused by the numbers rather than the caller.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A covariance block that should be invertible is not.
class DegeneracyError : public NumericalError {
 public:
  DegeneracyError(const std::string& what, std::size_t pivot_index, double pivot)
      : NumericalError(what), pivot_index_(pivot_index), pivot_(pivot) {}

  std::size_t pivot_index() const noexcept { return pivot_index_; }
  double pivot() const noexcept { return pivot_; }

 private:
  std::size_t pivot_index_;
  double pivot_;
};

/// Quadrature or lattice integration did not reach its tolerance.
class AccuracyError : public NumericalError {
 public:
  AccuracyError(const std::string& what, double best_value, double achieved_error)
      : NumericalError(what), best_value_(best_value), achieved_error_(achieved_error) {}

  double best_value() const noexcept { return best_value_; }
  double achieved_error() const noexcept { return achieved_error_; }

 private:
  double best_value_;
  double achieved_error_;
};

/// An asymptotic formula was asked for outside the regime where it holds.
class RegimeError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

/// Two independent evaluation routes disagree.
class ConsistencyError : public NumericalError {
 public:
  ConsistencyError(const std::string& what, double first, double second)
      : NumericalError(what), first_(first), second_(second) {}

  double first() const noexcept { return first_; }
  double second() const noexcept { return second_; }

 private:
  double first_;
  double second_;
};

}  // namespace eec
