#pragma once

#include <stdexcept>
#include <string>

namespace pasa {

// Base class for every error raised by the library. Subclasses let callers
// (and the CLI exit-code mapping) tell configuration problems from numeric
// failures without parsing messages.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Tensor or graph shapes that do not line up.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// NaN/Inf produced by an operation, or a divergent optimisation.
class NumericError : public Error {
 public:
  using Error::Error;
};

// Caller passed an argument outside the operation's domain.
class ArgumentError : public Error {
 public:
  using Error::Error;
};

// Malformed, truncated or unsupported file/stream contents.
class FormatError : public Error {
 public:
  using Error::Error;
};

// Not enough samples to reach the requested statistical resolution.
class InsufficientSamplesError : public Error {
 public:
  using Error::Error;
};

// The closed-form attribution denominator <x-u, w> vanished.
class SingularityError : public Error {
 public:
  using Error::Error;
};

}  // namespace pasa
