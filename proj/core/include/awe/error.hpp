#pragma once

#include <stdexcept>
#include <string>

namespace awe {

// Base of every error the workbench throws. The CLI maps the subclasses to
// exit codes (config 2, data 3, numeric 4).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

// Non-finite values, non-scalar losses, detached graphs, degenerate inputs.
class NumericError : public Error {
 public:
  using Error::Error;
};

class DegenerateInputError : public NumericError {
 public:
  using NumericError::NumericError;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

// Missing, malformed or inconsistent data files.
class DataError : public Error {
 public:
  using Error::Error;
};

class FormatError : public DataError {
 public:
  using DataError::DataError;
};

class NotFoundError : public DataError {
 public:
  using DataError::DataError;
};

}  // namespace awe
