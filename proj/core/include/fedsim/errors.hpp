#pragma once

#include <stdexcept>
#include <string>

namespace fedsim {

// Base class for all simulator errors. The CLI maps ConfigError (and
// PartitionError raised from bad experiment settings) to exit code 1,
// everything else to exit code 2.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid configuration: bad architecture, out-of-range hyperparameter,
// unknown config key, missing input file.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Dimension or layout mismatch between values that must align.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// Malformed external data: IDX magic/dim mismatch, corrupt payload index,
// unparseable plan document.
class FormatError : public Error {
 public:
  using Error::Error;
};

// Non-finite values where finite arithmetic is required.
class NumericError : public Error {
 public:
  using Error::Error;
};

// Impossible partition request (fewer samples than clients, pool too small).
class PartitionError : public Error {
 public:
  using Error::Error;
};

}  // namespace fedsim
