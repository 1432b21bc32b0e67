#pragma once

#include <stdexcept>
#include <string>

namespace shadowcomp {

/// Base of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad argument value (zero size, empty list, out-of-range index).
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// Two rasters or tensors that must agree in shape do not.
class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

/// File missing, unreadable, undecodable or unwritable.
class IoError : public Error {
 public:
  using Error::Error;
};

/// Data loaded fine but violates a documented invariant.
class ValidationError : public Error {
 public:
  using Error::Error;
};

class NonInvertible : public Error {
 public:
  using Error::Error;
};

/// Derivative requested where clamping makes the map non-smooth.
class NonDifferentiable : public Error {
 public:
  using Error::Error;
};

}  // namespace shadowcomp
