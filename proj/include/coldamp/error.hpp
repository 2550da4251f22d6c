#pragma once

#include <stdexcept>
#include <string>

namespace coldamp {

/// Base class for all library errors. `exit_code()` maps onto the CLI contract.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual int exit_code() const noexcept { return 1; }
};

/// Precondition violation on a physical argument (non-positive frequency, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
  int exit_code() const noexcept override { return 2; }
};

class SchemaError : public Error {
 public:
  using Error::Error;
  int exit_code() const noexcept override { return 3; }
};

class FitError : public Error {
 public:
  using Error::Error;
  int exit_code() const noexcept override { return 4; }
};

class IoError : public Error {
 public:
  using Error::Error;
  int exit_code() const noexcept override { return 5; }
};

/// Closed-loop response is numerically singular at the requested frequency.
class SingularResponse : public DomainError {
 public:
  using DomainError::DomainError;
};

class GridError : public DomainError {
 public:
  using DomainError::DomainError;
};

/// Integrated occupancy came out negative: the input spectrum or band is wrong.
class UnphysicalOccupancy : public DomainError {
 public:
  using DomainError::DomainError;
};

}  // namespace coldamp
