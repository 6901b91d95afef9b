#pragma once

#include <stdexcept>
#include <string>

namespace shapeflow {

// Input violates a documented precondition (bad sizes, out-of-range options, ...).
struct InvalidArgument : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Geometry too degenerate to process (self-intersection, collapsed edges, ...).
struct DegenerateGeometry : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Mesh generator could not reach its quality targets within budget.
struct MeshQualityFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Data fed to a solver is mutually inconsistent (e.g. incompatible Neumann data).
struct IncompatibleData : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Linear solver failed to factorize or produced an unacceptable residual.
struct SolverFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A query point left the computational domain.
struct OutOfDomain : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace shapeflow
