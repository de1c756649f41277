#pragma once

#include <stdexcept>
#include <string>

namespace sgfem {

/// Base class for all errors raised by the library.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// A zeta-weight moment integral does not exist for the requested exponent.
class DivergentMoment : public Error {
 public:
  using Error::Error;
};

/// Look-ahead depth outside the admissible range [1, dhat_m - 1].
class InvalidLookahead : public Error {
 public:
  using Error::Error;
};

/// A Gram matrix expected to be positive definite failed the check.
class NumericalBreakdown : public Error {
 public:
  using Error::Error;
};

/// Jump frame requested on a boundary edge.
class BoundaryEdge : public Error {
 public:
  using Error::Error;
};

class IndexOutOfRange : public Error {
 public:
  using Error::Error;
};

/// A marked index subset is not contained in the index-set boundary.
class IndexNotInBoundary : public Error {
 public:
  using Error::Error;
};

/// Iterative solver failed to reach the requested tolerance.
class NoConvergence : public Error {
 public:
  NoConvergence(int iterations, double residual)
      : Error("solver did not converge after " + std::to_string(iterations) +
              " iterations, relative residual " + std::to_string(residual)),
        iterations(iterations),
        residual(residual) {}
  int iterations;
  double residual;
};

/// Doerfler marking called with an empty indicator map.
class EmptyIndicators : public Error {
 public:
  using Error::Error;
};

/// The slab values cannot reach the requested fraction of the total.
class UnreachableThreshold : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  ParseError(int line, const std::string& what)
      : Error("parse error at line " + std::to_string(line) + ": " + what), line(line) {}
  int line;
};

class ValidationError : public Error {
 public:
  ValidationError(const std::string& key, const std::string& reason)
      : Error("invalid value for '" + key + "': " + reason), key(key) {}
  std::string key;
};

}  // namespace sgfem
