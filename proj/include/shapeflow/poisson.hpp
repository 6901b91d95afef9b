#pragma once

#include <memory>
#include <vector>

#include "shapeflow/contour.hpp"
#include "shapeflow/mesh.hpp"

namespace shapeflow {

// Piecewise-linear nodal potential on a triangulation. The mesh must outlive
// the field.
struct ScalarField {
  const TriMesh* mesh = nullptr;
  std::vector<double> values;  // one per vertex
};

// Piecewise-constant planar field, one vector per triangle (the gradient
// representation of a P1 potential).
struct VectorField {
  const TriMesh* mesh = nullptr;
  std::vector<Vec2> gradients;  // one per triangle
};

// Vertex-recovered divergence. Boundary rows lack the flux contribution and
// are flagged unreliable.
struct DivergenceField {
  const TriMesh* mesh = nullptr;
  std::vector<double> values;          // one per vertex
  std::vector<char> boundary_vertex;   // 1 where the value is unreliable
};

struct DivergenceStats {
  double mean = 0.0;    // over interior vertices
  double stddev = 0.0;  // over interior vertices
};

// Linear-element workhorse for one fixed mesh: assembles the stiffness matrix
// and vertex weights once, factorizes lazily, and serves every boundary-value
// problem the library needs. Methods are not safe to call concurrently on one
// instance; distinct instances are independent.
class PoissonSolver {
 public:
  explicit PoissonSolver(const TriMesh& m);
  ~PoissonSolver();
  PoissonSolver(PoissonSolver&&) noexcept;
  PoissonSolver& operator=(PoissonSolver&&) noexcept;
  PoissonSolver(const PoissonSolver&) = delete;
  PoissonSolver& operator=(const PoissonSolver&) = delete;

  const TriMesh& mesh() const;
  double area() const;

  // Solution of div grad u = S inside, normal derivative g on the boundary,
  // normalized to weighted mean zero. S must match the compatibility value
  // boundary_integral(g) / area.
  ScalarField solve_neumann(const BoundaryScalarField& g, double S) const;

  // Solution of div grad u = rhs inside, u = 0 on the boundary.
  ScalarField solve_dirichlet(double rhs) const;

  // Zero-boundary potential whose weak Laplacian matches that of the input:
  // the load is the stiffness action of the input, so no second derivatives
  // are ever formed.
  ScalarField solve_dirichlet_field(const ScalarField& u) const;

  VectorField gradient(const ScalarField& u) const;

  // Transport inner product: area-weighted gradient dot products divided by
  // the domain area, so the uniform unit field has norm one.
  double inner_product(const VectorField& a, const VectorField& b) const;

  DivergenceField divergence(const VectorField& a) const;

  // Hooks used by the tangent-space layer.
  std::vector<double> stiffness_action(const std::vector<double>& u) const;
  const std::vector<double>& vertex_weights() const;  // exact hat-function integrals
  double stiffness_row_sum_max() const;               // diagnostic

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// One-shot wrappers over a freshly assembled solver.
ScalarField solve_neumann(const TriMesh& m, const BoundaryScalarField& g, double S);
ScalarField solve_dirichlet(const TriMesh& m, double rhs);
ScalarField solve_dirichlet_field(const TriMesh& m, const ScalarField& u);
VectorField gradient(const ScalarField& u);
double inner_product(const TriMesh& m, const VectorField& a, const VectorField& b);
DivergenceField divergence(const VectorField& a);

// Mean and standard deviation of the recovered divergence over interior
// vertices (the reliable rows).
DivergenceStats interior_divergence_stats(const DivergenceField& d);

}  // namespace shapeflow
