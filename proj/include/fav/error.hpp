#pragma once

#include <stdexcept>
#include <string>

namespace fav {

/// Root of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand shapes do not conform.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Image extents incompatible with the requested patch geometry.
class GeometryError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Malformed or truncated input data (dataset files, checkpoints, reports).
class DataError : public Error {
 public:
  using Error::Error;
};

/// NaN/Inf produced or observed; the message names the stage.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Analytic and instrumented cost counts disagree.
class AccountingError : public Error {
 public:
  using Error::Error;
};

}  // namespace fav
