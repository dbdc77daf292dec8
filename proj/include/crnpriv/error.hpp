#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace crnpriv {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or inconsistent input (model files, compositions, arguments).
class InputError : public Error {
 public:
  using Error::Error;
};

class SyntaxError : public InputError {
 public:
  SyntaxError(std::size_t line, const std::string& message)
      : InputError("line " + std::to_string(line) + ": " + message), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class ValidationError : public InputError {
 public:
  using InputError::InputError;
};

class DimensionMismatch : public InputError {
 public:
  using InputError::InputError;
};

class MissingInitialState : public InputError {
 public:
  using InputError::InputError;
};

class InsufficientReactants : public InputError {
 public:
  using InputError::InputError;
};

class RangeError : public InputError {
 public:
  using InputError::InputError;
};

class DegenerateInput : public InputError {
 public:
  using InputError::InputError;
};

/// Numerical failures: the input is well formed but the requested quantity
/// could not be computed.
class NumericalError : public Error {
 public:
  using Error::Error;
};

class NotComplexBalanced : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class NonConvergence : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class Reducible : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

/// The reachable state space grew past the configured cap.
class ExplosionGuard : public Error {
 public:
  ExplosionGuard(std::size_t cap)
      : Error("reachable state space exceeds cap of " + std::to_string(cap) + " states"), cap_(cap) {}
  std::size_t cap() const noexcept { return cap_; }

 private:
  std::size_t cap_;
};

}  // namespace crnpriv
