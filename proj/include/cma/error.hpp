#pragma once

#include <stdexcept>
#include <string>

namespace cma {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class PreconditionError : public Error {
 public:
  using Error::Error;
};

class ValidationError : public Error {
 public:
  using Error::Error;
};

class ResourceError : public Error {
 public:
  using Error::Error;
};

/// A finite-difference stencil reached a node outside the domain.
class StencilError : public Error {
 public:
  using Error::Error;
};

class DegenerateHessianError : public Error {
 public:
  DegenerateHessianError(const std::string& what, double smallest)
      : Error(what), smallest_eigenvalue(smallest) {}
  double smallest_eigenvalue;
};

class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, double residual, int iterations)
      : Error(what), last_residual(residual), iterations(iterations) {}
  double last_residual;
  int iterations;
};

/// Loss of plurisubharmonicity that step damping could not repair.
class DegeneracyError : public Error {
 public:
  DegeneracyError(const std::string& what, double smallest)
      : Error(what), smallest_eigenvalue(smallest) {}
  double smallest_eigenvalue;
};

/// A sublevel set reached the boundary of the grid function's domain.
class SectionEscapeError : public Error {
 public:
  using Error::Error;
};

/// A point or a dilated set left the region where data is available.
class DomainEscapeError : public Error {
 public:
  using Error::Error;
};

class ChainBrokenError : public Error {
 public:
  ChainBrokenError(const std::string& what, int level) : Error(what), level(level) {}
  int level;
};

class CoverageError : public Error {
 public:
  using Error::Error;
};

class FormatError : public Error {
 public:
  using Error::Error;
};

}  // namespace cma
