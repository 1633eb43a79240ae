// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace mssf {

/// Base of every error raised by the library. The CLI maps subclasses onto
/// exit codes, so pick the narrowest one that fits.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Tensor extents do not line up with what an operation expects.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Invalid hyperparameters or structural configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// API misuse, e.g. calling backward on a tensor that is not on a graph.
class UsageError : public Error {
 public:
  using Error::Error;
};

/// Bad user data: unreadable files, mismatched image pairs, out-of-range values.
class InputError : public Error {
 public:
  using Error::Error;
};

/// Corrupt or incompatible serialized data.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// A NaN or Inf appeared in a tensor.
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace mssf
