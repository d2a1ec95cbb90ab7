#pragma once

#include <stdexcept>
#include <string>

namespace posevae {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Input for which an operation is mathematically undefined (e.g. a 6-D
/// rotation whose columns are parallel).
class DegenerateInputError : public Error {
 public:
  using Error::Error;
};

/// Rotation too close to pi for a unique logarithm.
class SingularityError : public Error {
 public:
  using Error::Error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Non-finite value encountered where a finite one is required.
class NumericError : public Error {
 public:
  using Error::Error;
};

class UnsupportedError : public Error {
 public:
  using Error::Error;
};

/// An importance weight evaluated to a non-finite value.
class FlaggedSampleError : public NumericError {
 public:
  using NumericError::NumericError;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Malformed or inconsistent data file. `line()` is 1-based, 0 when the error
/// is not tied to a specific line.
class DataError : public Error {
 public:
  DataError(const std::string& what, std::size_t line = 0)
      : Error(line == 0 ? what : "line " + std::to_string(line) + ": " + what),
        line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

}  // namespace posevae
