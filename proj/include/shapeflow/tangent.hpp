#pragma once

#include <memory>
#include <vector>

#include "shapeflow/contour.hpp"
#include "shapeflow/mesh.hpp"
#include "shapeflow/poisson.hpp"

namespace shapeflow {

// A contour with its triangulation and assembled solver: the discrete carrier
// of the uniform measure the shape represents. Movable, not copyable.
class ShapeDomain {
 public:
  ShapeDomain(Contour c, double h, const TriangulateOptions& options = {});

  const Contour& contour() const { return contour_; }
  const TriMesh& mesh() const { return *mesh_; }
  std::shared_ptr<const TriMesh> mesh_ptr() const { return mesh_; }
  const PoissonSolver& solver() const { return *solver_; }
  double mesh_size() const { return h_; }

 private:
  Contour contour_;
  double h_;
  std::shared_ptr<const TriMesh> mesh_;
  std::unique_ptr<PoissonSolver> solver_;
};

// An element of the shape tangent space: gradient field of a potential whose
// interior divergence is the constant div_constant. The shared mesh handle
// keeps the triangulation alive for vectors that own their discretization;
// potential/grad reference that mesh.
struct TangentVector {
  std::shared_ptr<const TriMesh> mesh;
  ScalarField potential;
  VectorField grad;
  double div_constant = 0.0;
};

// Unique split of a tangent vector into a rigid translation, a multiple of
// the scale field, and a mean-free deformation remainder.
struct TangentDecomposition {
  Vec2 v_trans{0.0, 0.0};
  double lambda_scale = 0.0;
  std::shared_ptr<const TriMesh> mesh;
  VectorField alpha_def;
  double norm_trans = 0.0;  // transport norms of the three components
  double norm_scale = 0.0;
  double norm_def = 0.0;
};

// Lift a normal-speed boundary field to the interior flow with constant
// divergence boundary_integral(a) / area.
TangentVector lift(const ShapeDomain& d, const BoundaryScalarField& a);
TangentVector lift(const Contour& c, const BoundaryScalarField& a, double h);

// Inverse of the lift: normal component of the field along the contour, with
// boundary vectors recovered by area-weighted averaging of incident triangles.
BoundaryScalarField delift(const Contour& c, const TangentVector& alpha);

// Flux-consistent boundary data of a nodal potential: the normal-speed field
// whose lift reproduces the potential's gradient. Recovered weakly (boundary
// mass matrix against the stiffness action), making it the exact adjoint of
// the lifting solve: lift -> boundary_trace -> lift round-trips to roundoff,
// unlike pointwise normal components of recovered boundary gradients.
struct BoundaryTrace {
  BoundaryScalarField trace;
  double div_constant = 0.0;  // flux balance: total boundary flux over area
};

BoundaryTrace boundary_trace(const ShapeDomain& d, const std::vector<double>& potential);

// Unit-divergence field vanishing on the boundary; the pure resizing
// direction at this shape.
TangentVector scale_component(const ShapeDomain& d);
TangentVector scale_component(const Contour& c, double h);

// Translation / scale / deformation split.
TangentDecomposition decompose(const ShapeDomain& d, const TangentVector& alpha);
TangentDecomposition decompose(const Contour& c, const TangentVector& alpha);

// Orthogonal projection of an arbitrary potential's gradient onto the shape
// tangent space: u_hat = u - u_perp + lambda * u_scale.
TangentVector project_to_stan(const ShapeDomain& d, const ScalarField& u);
TangentVector project_to_stan(const Contour& c, const ScalarField& u);

// Mean of a piecewise-constant field against the uniform measure.
Vec2 mu_mean(const PoissonSolver& s, const VectorField& a);

// Norm induced by the transport inner product.
double ot_norm(const PoissonSolver& s, const VectorField& a);

// Area-weighted recovery of per-triangle data at the vertices.
std::vector<Vec2> recover_vertex_vectors(const TriMesh& m, const VectorField& a);
std::vector<double> recover_vertex_scalars(const TriMesh& m, const std::vector<double>& per_tri);

}  // namespace shapeflow
