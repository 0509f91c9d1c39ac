#pragma once

#include <stdexcept>
#include <string>

namespace nfsr {

// Base of all library errors. The category decides the CLI exit code.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid configuration, precondition or argument combination (exit 2).
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Filesystem or format problems while reading/writing artifacts (exit 3).
class IoError : public Error {
 public:
  using Error::Error;
};

// Non-finite values, divergence, singular systems (exit 4).
class NumericError : public Error {
 public:
  using Error::Error;
};

// Argument outside the mathematical domain of an operation.
class DomainError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

}  // namespace nfsr
