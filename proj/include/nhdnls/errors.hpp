#pragma once

#include <stdexcept>
#include <string>

namespace nhdnls {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An argument violates an operation's precondition (grid mismatch, S^2 != I, ...).
class InvalidInput : public Error {
 public:
  using Error::Error;
};

/// A run configuration is rejected before any computation (stability bound, unknown key).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A non-finite value appeared during a computation.
class NumericalBlowup : public Error {
 public:
  using Error::Error;
};

/// A filament crossed itself during time stepping.
class SelfIntersection : public Error {
 public:
  using Error::Error;
};

}  // namespace nhdnls
