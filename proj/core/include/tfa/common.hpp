#pragma once

#include <stdexcept>
#include <string>

namespace tfa {

/// Base class for all library errors.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Invalid user-supplied configuration (CLI exit code 1).
struct ConfigError : Error {
  using Error::Error;
};

/// Non-finite values or other numerical breakdown (CLI exit code 2).
struct NumericalError : Error {
  using Error::Error;
};

/// Array dimensions disagree with what a contract requires.
struct ShapeError : Error {
  using Error::Error;
};

/// Serialized data carries a format version this build cannot read.
struct VersionError : Error {
  using Error::Error;
};

/// A query timestamp lies outside the sampled support of a signal.
struct ExtrapolationError : Error {
  using Error::Error;
};

/// An operation that needs at least one element received none.
struct EmptyInputError : Error {
  using Error::Error;
};

}  // namespace tfa
