#pragma once

#include <stdexcept>
#include <string>

namespace kgqa {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand shapes do not conform to what an operation requires.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// An operation produced NaN or Inf.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Malformed or inconsistent input files (KG, labels, datasets, checkpoints).
class LoadError : public Error {
 public:
  using Error::Error;
};

/// A lookup referenced an id that does not exist.
class UnknownIdError : public Error {
 public:
  using Error::Error;
};

/// A caller violated a documented precondition (empty input, bad config).
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

}  // namespace kgqa
