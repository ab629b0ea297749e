#pragma once

#include <stdexcept>
#include <string>

namespace qdos {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Arguments violate an operation's preconditions.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// Two objects that must share a grid do not.
class GridMismatch : public Error {
 public:
  using Error::Error;
};

/// The guidance or osmotic field was requested where |psi|^2 is below the
/// node floor.
class NodeProximity : public Error {
 public:
  NodeProximity(double x, double density, double floor)
      : Error("node proximity at x=" + std::to_string(x) + " (|psi|^2=" + std::to_string(density) +
              " <= floor " + std::to_string(floor) + ")"),
        position(x) {}
  double position;
};

/// A transition kernel has no closed-form q-space density.
class DegenerateDensity : public Error {
 public:
  using Error::Error;
};

/// Moment constraints could not be met by any exponential-family density.
class NonRealizable : public Error {
 public:
  using Error::Error;
};

}  // namespace qdos
