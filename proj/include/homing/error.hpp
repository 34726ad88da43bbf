#pragma once

#include <stdexcept>
#include <string>

namespace homing {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// A label was requested at (or numerically at) the nest location.
class DegenerateLabel : public Error {
 public:
  using Error::Error;
};

/// Direction of a zero (or non-finite) vector was requested.
class UndefinedDirection : public Error {
 public:
  using Error::Error;
};

/// Tensor or image dimensions do not match what an operation expects.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Malformed file content: bad magic, version, truncation, parse failure.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Training or inference produced a non-finite value.
class NumericError : public Error {
 public:
  NumericError(const std::string& what, long step) : Error(what), step_(step) {}
  long step() const { return step_; }

 private:
  long step_;
};

}  // namespace homing
