#pragma once

#include <stdexcept>
#include <string>

namespace phiac {

/// Base class for every error raised by the toolkit.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A caller broke an operation's contract (wrong dimensions, negative time, ...).
class ContractViolation : public Error {
 public:
  using Error::Error;
};

/// A system, gain set or scenario is inconsistent with its declared structure.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A documented precondition of an analysis step does not hold (e.g. R_c2 != 0
/// where the unmatched analysis requires it).
class PreconditionError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

class NumericError : public Error {
 public:
  using Error::Error;
};

class SingularityError : public NumericError {
 public:
  using NumericError::NumericError;
};

/// A claimed equilibrium failed its drift certificate, or an assumption check
/// that an analysis depends on did not pass.
class InconsistencyError : public NumericError {
 public:
  using NumericError::NumericError;
};

class DivergenceError : public NumericError {
 public:
  DivergenceError(const std::string& what, double time) : NumericError(what), time_(time) {}
  [[nodiscard]] double time() const noexcept { return time_; }

 private:
  double time_;
};

}  // namespace phiac
