#pragma once

#include <stdexcept>
#include <string>

namespace kdvlab {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Two grid functions / symbols built on different GridSpecs were combined.
struct GridMismatchError : Error {
  using Error::Error;
};

// A multiplier or weight left the representable floating-point range;
// usually means rho/theta are too aggressive for the current grid.
struct OverflowError : Error {
  using Error::Error;
};

// Dense-matrix ceiling (N <= 1024) or a derivative-depth cap was exceeded.
struct SizeGuardError : Error {
  using Error::Error;
};

// Neumann series does not contract: the bracket parameter h is below the
// invertibility threshold for the current weights.
struct DivergenceError : Error {
  using Error::Error;
};

struct QuadratureError : Error {
  using Error::Error;
};

struct InstabilityError : Error {
  using Error::Error;
};

struct ConfigError : Error {
  using Error::Error;
};

}  // namespace kdvlab
