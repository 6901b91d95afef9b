#include "shapeflow/tangent.hpp"

#include <cmath>
#include <cstdint>
#include <utility>

#include "shapeflow/errors.hpp"

namespace shapeflow {

namespace {

// The mesh must carry exactly the contour's samples as its boundary ring;
// meshes are built by copying those samples verbatim, so exact comparison is
// the right check.
void require_built_on(const Contour& c, const TriMesh& m) {
  if (m.boundary_count != c.size())
    throw InvalidArgument("field mesh was not built on this contour (size mismatch)");
  for (std::size_t i = 0; i < c.size(); ++i) {
    if (m.vertices[i].x != c[i].x || m.vertices[i].y != c[i].y)
      throw InvalidArgument("field mesh was not built on this contour (vertex mismatch)");
  }
}

std::vector<double> triangle_areas(const TriMesh& m) {
  std::vector<double> a(m.triangle_count());
  for (std::size_t t = 0; t < m.triangle_count(); ++t) a[t] = triangle_area(m, t);
  return a;
}

}  // namespace

ShapeDomain::ShapeDomain(Contour c, double h, const TriangulateOptions& options)
    : contour_(std::move(c)), h_(h) {
  mesh_ = std::make_shared<const TriMesh>(triangulate(contour_, h_, options));
  solver_ = std::make_unique<PoissonSolver>(*mesh_);
}

TangentVector lift(const ShapeDomain& d, const BoundaryScalarField& a) {
  if (a.size() != d.contour().size())
    throw InvalidArgument("boundary data length does not match the contour");
  const double S = boundary_integral(d.contour(), a) / area(d.contour());
  TangentVector v;
  v.mesh = d.mesh_ptr();
  v.potential = d.solver().solve_neumann(a, S);
  v.grad = d.solver().gradient(v.potential);
  v.div_constant = S;
  return v;
}

TangentVector lift(const Contour& c, const BoundaryScalarField& a, double h) {
  const ShapeDomain d(c, h);
  return lift(d, a);
}

BoundaryScalarField delift(const Contour& c, const TangentVector& alpha) {
  if (alpha.grad.mesh == nullptr) throw InvalidArgument("tangent vector has no mesh");
  const TriMesh& m = *alpha.grad.mesh;
  require_built_on(c, m);

  const std::size_t nb = m.boundary_count;
  std::vector<Vec2> acc(nb, Vec2{0.0, 0.0});
  std::vector<double> wsum(nb, 0.0);
  for (std::size_t t = 0; t < m.triangle_count(); ++t) {
    const double A = triangle_area(m, t);
    for (int k = 0; k < 3; ++k) {
      const std::uint32_t vtx = m.triangles[t][k];
      if (vtx < nb) {
        acc[vtx] += alpha.grad.gradients[t] * A;
        wsum[vtx] += A;
      }
    }
  }
  const BoundaryVectorField normals = normal_field(c);
  BoundaryScalarField out;
  out.values.resize(nb);
  for (std::size_t i = 0; i < nb; ++i) {
    if (!(wsum[i] > 0.0))
      throw DegenerateGeometry("boundary vertex with no incident triangle");
    out.values[i] = dot(acc[i] / wsum[i], normals[i]);
  }
  return out;
}

TangentVector scale_component(const ShapeDomain& d) {
  TangentVector v;
  v.mesh = d.mesh_ptr();
  v.potential = d.solver().solve_dirichlet(1.0);
  v.grad = d.solver().gradient(v.potential);
  v.div_constant = 1.0;
  return v;
}

TangentVector scale_component(const Contour& c, double h) {
  const ShapeDomain d(c, h);
  return scale_component(d);
}

namespace {

TangentDecomposition decompose_impl(const PoissonSolver& solver,
                                    std::shared_ptr<const TriMesh> mesh,
                                    const TangentVector& alpha) {
  const TriMesh& m = solver.mesh();
  if (alpha.grad.mesh != &m)
    throw InvalidArgument("tangent vector lives on a different mesh");

  const ScalarField u_scale = solver.solve_dirichlet(1.0);
  const VectorField a_scale = solver.gradient(u_scale);

  const double lambda = alpha.div_constant;
  const Vec2 v = mu_mean(solver, alpha.grad) - lambda * mu_mean(solver, a_scale);

  TangentDecomposition out;
  out.mesh = std::move(mesh);
  out.v_trans = v;
  out.lambda_scale = lambda;
  out.alpha_def.mesh = &m;
  out.alpha_def.gradients.resize(m.triangle_count());
  for (std::size_t t = 0; t < m.triangle_count(); ++t)
    out.alpha_def.gradients[t] = alpha.grad.gradients[t] - v - a_scale.gradients[t] * lambda;

  out.norm_trans = std::sqrt(std::max(0.0, dot(v, v)));
  out.norm_scale = std::fabs(lambda) * ot_norm(solver, a_scale);
  out.norm_def = ot_norm(solver, out.alpha_def);
  return out;
}

}  // namespace

TangentDecomposition decompose(const ShapeDomain& d, const TangentVector& alpha) {
  return decompose_impl(d.solver(), d.mesh_ptr(), alpha);
}

TangentDecomposition decompose(const Contour& c, const TangentVector& alpha) {
  if (alpha.grad.mesh == nullptr) throw InvalidArgument("tangent vector has no mesh");
  require_built_on(c, *alpha.grad.mesh);
  const PoissonSolver solver(*alpha.grad.mesh);
  return decompose_impl(solver, alpha.mesh, alpha);
}

namespace {

TangentVector project_impl(const PoissonSolver& solver, std::shared_ptr<const TriMesh> mesh,
                           const ScalarField& u) {
  const TriMesh& m = solver.mesh();
  const ScalarField u_perp = solver.solve_dirichlet_field(u);
  const ScalarField u_scale = solver.solve_dirichlet(1.0);
  const VectorField g_perp = solver.gradient(u_perp);
  const VectorField g_scale = solver.gradient(u_scale);
  const double denom = solver.inner_product(g_scale, g_scale);
  if (!(denom > 0.0))
    throw SolverFailure("scale direction has zero norm; mesh is degenerate");
  const double lambda = solver.inner_product(g_perp, g_scale) / denom;

  TangentVector out;
  out.mesh = std::move(mesh);
  out.potential.mesh = &m;
  out.potential.values.resize(m.vertex_count());
  for (std::size_t i = 0; i < m.vertex_count(); ++i)
    out.potential.values[i] = u.values[i] - u_perp.values[i] + lambda * u_scale.values[i];
  // Re-fix the additive constant so projected potentials share the lift
  // normalization.
  const std::vector<double>& w = solver.vertex_weights();
  double mean = 0.0;
  for (std::size_t i = 0; i < m.vertex_count(); ++i) mean += w[i] * out.potential.values[i];
  mean /= solver.area();
  for (double& val : out.potential.values) val -= mean;

  out.grad = solver.gradient(out.potential);
  out.div_constant = lambda;
  return out;
}

}  // namespace

TangentVector project_to_stan(const ShapeDomain& d, const ScalarField& u) {
  if (u.mesh != &d.mesh() || u.values.size() != d.mesh().vertex_count())
    throw InvalidArgument("potential lives on a different mesh");
  return project_impl(d.solver(), d.mesh_ptr(), u);
}

TangentVector project_to_stan(const Contour& c, const ScalarField& u) {
  if (u.mesh == nullptr) throw InvalidArgument("potential has no mesh");
  require_built_on(c, *u.mesh);
  const PoissonSolver solver(*u.mesh);
  return project_impl(solver, nullptr, u);
}

Vec2 mu_mean(const PoissonSolver& s, const VectorField& a) {
  const TriMesh& m = s.mesh();
  if (a.mesh != &m || a.gradients.size() != m.triangle_count())
    throw InvalidArgument("field lives on a different mesh");
  Vec2 acc{0.0, 0.0};
  for (std::size_t t = 0; t < m.triangle_count(); ++t)
    acc += a.gradients[t] * triangle_area(m, t);
  return acc / s.area();
}

double ot_norm(const PoissonSolver& s, const VectorField& a) {
  return std::sqrt(std::max(0.0, s.inner_product(a, a)));
}

std::vector<Vec2> recover_vertex_vectors(const TriMesh& m, const VectorField& a) {
  if (a.mesh != &m || a.gradients.size() != m.triangle_count())
    throw InvalidArgument("field lives on a different mesh");
  std::vector<Vec2> acc(m.vertex_count(), Vec2{0.0, 0.0});
  std::vector<double> wsum(m.vertex_count(), 0.0);
  const std::vector<double> areas = triangle_areas(m);
  for (std::size_t t = 0; t < m.triangle_count(); ++t) {
    for (int k = 0; k < 3; ++k) {
      const std::uint32_t v = m.triangles[t][k];
      acc[v] += a.gradients[t] * areas[t];
      wsum[v] += areas[t];
    }
  }
  for (std::size_t v = 0; v < acc.size(); ++v) {
    if (!(wsum[v] > 0.0)) throw DegenerateGeometry("vertex with no incident triangle");
    acc[v] = acc[v] / wsum[v];
  }
  return acc;
}

std::vector<double> recover_vertex_scalars(const TriMesh& m, const std::vector<double>& per_tri) {
  if (per_tri.size() != m.triangle_count())
    throw InvalidArgument("per-triangle data length does not match the mesh");
  std::vector<double> acc(m.vertex_count(), 0.0);
  std::vector<double> wsum(m.vertex_count(), 0.0);
  const std::vector<double> areas = triangle_areas(m);
  for (std::size_t t = 0; t < m.triangle_count(); ++t) {
    for (int k = 0; k < 3; ++k) {
      const std::uint32_t v = m.triangles[t][k];
      acc[v] += per_tri[t] * areas[t];
      wsum[v] += areas[t];
    }
  }
  for (std::size_t v = 0; v < acc.size(); ++v) acc[v] /= wsum[v];
  return acc;
}

// Testing grad(u) against the boundary hat functions gives the weak flux
//   (M_b a)_i = (K u)_i + S m_i,
// with M_b the boundary mass matrix, K the stiffness matrix, m the exact hat
// integrals, and S pinned by the flux identity (total flux = S times area).
// Inverting M_b makes this the exact adjoint of the lifting load assembly.
// One-sided gradient averaging, by contrast, undershoots the boundary ring at
// O(h), which matters wherever the trace feeds back into evolving data.
BoundaryTrace boundary_trace(const ShapeDomain& domain, const std::vector<double>& potential) {
  const TriMesh& m = domain.mesh();
  const PoissonSolver& solver = domain.solver();
  const std::size_t nb = m.boundary_count;
  if (potential.size() != m.vertex_count())
    throw InvalidArgument("potential length does not match the domain mesh");

  const std::vector<double> ku = solver.stiffness_action(potential);
  const std::vector<double>& w = solver.vertex_weights();

  double boundary_flux = 0.0;
  double interior_weight = solver.area();
  for (std::size_t i = 0; i < nb; ++i) {
    boundary_flux += ku[i];
    interior_weight -= w[i];
  }
  if (!(interior_weight > 1e-12 * solver.area()))
    throw SolverFailure("boundary trace recovery needs interior vertices");
  const double S = boundary_flux / interior_weight;

  std::vector<double> edge(nb);  // edge i joins boundary vertices i and i+1
  for (std::size_t i = 0; i < nb; ++i)
    edge[i] = dist(m.vertices[i], m.vertices[(i + 1) % nb]);

  std::vector<double> b(nb), diag(nb);
  for (std::size_t i = 0; i < nb; ++i) {
    b[i] = ku[i] + S * w[i];
    diag[i] = (edge[(i + nb - 1) % nb] + edge[i]) / 3.0;
  }

  // The boundary mass matrix is cyclic tridiagonal with off-diagonal row sum
  // exactly half the diagonal, so Jacobi from the lumped quotient converges
  // geometrically at ratio 1/2.
  std::vector<double> a(nb), next(nb);
  for (std::size_t i = 0; i < nb; ++i) a[i] = b[i] / diag[i];
  for (int it = 0; it < 80; ++it) {
    double change = 0.0;
    double scale = 0.0;
    for (std::size_t i = 0; i < nb; ++i) {
      const std::size_t prev = (i + nb - 1) % nb;
      const std::size_t nxt = (i + 1) % nb;
      next[i] = (b[i] - edge[prev] / 6.0 * a[prev] - edge[i] / 6.0 * a[nxt]) / diag[i];
      change = std::max(change, std::fabs(next[i] - a[i]));
      scale = std::max(scale, std::fabs(next[i]));
    }
    a.swap(next);
    if (change <= 1e-15 * std::max(scale, 1e-30)) break;
  }

  BoundaryTrace out;
  out.div_constant = S;
  out.trace.values = std::move(a);
  return out;
}

}  // namespace shapeflow
