#pragma once

#include <stdexcept>
#include <string>

namespace catq {

/// Root of every error raised by the library. The CLI maps subclasses onto
/// process exit codes (config 2, numerical 3, I/O 4).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid arguments, dimension mismatches, broken preconditions.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

class DimensionError : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

/// Input for which the requested object does not exist (odd cat at alpha = 0).
class DegenerateInput : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

/// Integrator failures, non-convergence, broken numerical invariants.
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// Fock truncation too small for the states involved.
class TruncationError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace catq
