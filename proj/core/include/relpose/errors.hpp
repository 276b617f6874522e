#pragma once

#include <stdexcept>
#include <string>

namespace relpose {

/// Rotation too close to pi for a unique logarithm.
class SingularRotationError : public std::domain_error
{
public:
  using std::domain_error::domain_error;
};

/// Geometry makes a Jacobian, normal system or range direction degenerate.
class DegenerateGeometryError : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

/// No admissible ambiguity or mixture component exists.
class NoSolutionError : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

/// Factorization failed (non-invertible innovation or NEES covariance).
class NumericalFailureError : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

}  // namespace relpose
