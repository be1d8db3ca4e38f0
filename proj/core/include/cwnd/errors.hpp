#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace cwnd {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An argument outside the mathematical domain of the operation.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// A model or configuration that violates its invariants.
class ValidationError : public Error {
 public:
  ValidationError(std::string what, std::vector<std::string> violations);
  const std::vector<std::string>& violations() const noexcept { return violations_; }

 private:
  std::vector<std::string> violations_;
};

/// Malformed input file. Carries the offending key or position in the message.
class ParseError : public Error {
 public:
  using Error::Error;
};

/// An iterative method that failed to meet its tolerance.
class NonConvergenceError : public Error {
 public:
  using Error::Error;
};

/// Truncated enumeration whose omitted mass is above tolerance.
class TruncationError : public Error {
 public:
  TruncationError(std::string what, int suggested_n_max);
  int suggested_n_max() const noexcept { return suggested_n_max_; }

 private:
  int suggested_n_max_;
};

/// Enumeration would exceed the configured state budget.
class StateBudgetError : public Error {
 public:
  using Error::Error;
};

/// Operation not available for this model (e.g. the count-level oracle on a non-PS queue).
class UnsupportedError : public Error {
 public:
  using Error::Error;
};

}  // namespace cwnd
