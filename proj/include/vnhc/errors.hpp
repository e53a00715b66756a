#pragma once

#include <stdexcept>
#include <string>

namespace vnhc {

/// Error categories. The numeric values double as CLI exit codes and are
/// documented in the README; keep them stable.
enum class ErrorKind : int {
  other = 1,
  parse = 2,
  validation = 3,
  transversality = 4,
  blowup = 5,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& msg)
      : std::runtime_error(msg), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

/// Mass metric failed the positive-definiteness check at an evaluated
/// configuration.
struct MetricError : Error {
  explicit MetricError(const std::string& msg) : Error(ErrorKind::other, msg) {}
};

/// A vector/matrix argument has the wrong size for the system it is used with.
struct DimensionError : Error {
  explicit DimensionError(const std::string& msg)
      : Error(ErrorKind::validation, msg) {}
};

/// The control co-vectors are linearly dependent at an evaluated
/// configuration.
struct DependentInputsError : Error {
  explicit DependentInputsError(const std::string& msg)
      : Error(ErrorKind::other, msg) {}
};

/// The input-constraint coupling matrix is singular or numerically unusable.
struct TransversalityError : Error {
  TransversalityError(const std::string& msg, double condition)
      : Error(ErrorKind::transversality, msg), condition_(condition) {}
  double condition() const noexcept { return condition_; }

 private:
  double condition_;
};

/// A constraint Jacobian (or holonomic level-function gradient) is rank
/// deficient where full rank is required.
struct RegularityError : Error {
  explicit RegularityError(const std::string& msg)
      : Error(ErrorKind::other, msg) {}
};

/// A state handed to an on-manifold operation is too far from the manifold.
struct PreconditionError : Error {
  explicit PreconditionError(const std::string& msg)
      : Error(ErrorKind::other, msg) {}
};

/// Integration produced a non-finite derivative, exceeded the blow-up guard,
/// or (for constrained runs) drifted off the manifold.
struct IntegrationError : Error {
  IntegrationError(const std::string& msg, double time)
      : Error(ErrorKind::blowup, msg), time_(time) {}
  double time() const noexcept { return time_; }

 private:
  double time_;
};

/// Reduced multiplier system of the constrained-dynamics solver is singular.
struct ChetaevError : Error {
  explicit ChetaevError(const std::string& msg) : Error(ErrorKind::other, msg) {}
};

/// Decay-rate fit window contains a sign change or samples below the noise
/// floor.
struct FitWindowError : Error {
  explicit FitWindowError(const std::string& msg)
      : Error(ErrorKind::other, msg) {}
};

/// Iterative projection onto the constraint manifold failed to converge.
struct ConvergenceError : Error {
  explicit ConvergenceError(const std::string& msg)
      : Error(ErrorKind::other, msg) {}
};

/// Config text could not be parsed; carries a line/column position.
struct ParseError : Error {
  ParseError(const std::string& msg, int line, int column)
      : Error(ErrorKind::parse, msg), line_(line), column_(column) {}
  int line() const noexcept { return line_; }
  int column() const noexcept { return column_; }

 private:
  int line_;
  int column_;
};

/// Config or parameter values are syntactically fine but invalid.
struct ValidationError : Error {
  explicit ValidationError(const std::string& msg)
      : Error(ErrorKind::validation, msg) {}
};

}  // namespace vnhc
