#pragma once

#include <stdexcept>
#include <string>

namespace meanfield {

// Base of every error thrown by the library. The C API maps each subclass to
// a distinct status code.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// An argument lies outside the mathematical domain of an operation.
class DomainError : public Error {
 public:
  using Error::Error;
};

// A configuration value is missing, malformed, or out of range.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// A numerical routine failed (singular solve, non-finite result).
class NumericalError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace meanfield
