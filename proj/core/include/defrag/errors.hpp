#pragma once

#include <stdexcept>
#include <string>

namespace defrag {

/// Base class for all library errors.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Incompatible tensor or matrix shapes.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Invalid argument values (out-of-range labels, non-finite input, ...).
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// API misuse (backward called twice, missing gradients, ...).
class UsageError : public Error {
 public:
  using Error::Error;
};

/// Malformed file contents (IDX headers, checkpoint containers, ...).
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Numerically degenerate input where no sensible result exists.
class DegeneracyError : public Error {
 public:
  using Error::Error;
};

/// Invalid run configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Filesystem failures.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace defrag
