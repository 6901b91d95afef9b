#include "shapeflow/poisson.hpp"

#include <cmath>
#include <cstdint>
#include <functional>
#include <vector>

#include "doctest.h"
#include "shapeflow/contour.hpp"
#include "shapeflow/errors.hpp"
#include "shapeflow/mesh.hpp"
#include "shapeflow/shapes.hpp"

using namespace shapeflow;

namespace {

constexpr double kPi = 3.14159265358979323846;

BoundaryScalarField boundary_cos(std::size_t n, int k) {
  BoundaryScalarField g;
  g.values.resize(n);
  for (std::size_t i = 0; i < n; ++i)
    g.values[i] = std::cos(k * 2.0 * kPi * static_cast<double>(i) / static_cast<double>(n));
  return g;
}

BoundaryScalarField boundary_const(std::size_t n, double v) {
  BoundaryScalarField g;
  g.values.assign(n, v);
  return g;
}

double compatible_divergence(const Contour& c, const BoundaryScalarField& g) {
  return boundary_integral(c, g) / area(c);
}

double max_abs_error(const ScalarField& u, const std::function<double(Vec2)>& exact) {
  double e = 0.0;
  for (std::size_t i = 0; i < u.values.size(); ++i)
    e = std::max(e, std::fabs(u.values[i] - exact(u.mesh->vertices[i])));
  return e;
}

// Deterministic pseudo-random doubles in [-1, 1] for algebraic identity tests.
double hashed_unit(std::uint64_t k) {
  std::uint64_t x = k + 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  x ^= x >> 31;
  return 2.0 * (static_cast<double>(x >> 11) * (1.0 / 9007199254740992.0)) - 1.0;
}

}  // namespace

TEST_CASE("flux-balanced solve matches the radial quadratic on the disk") {
  const Contour c = make_circle(1.0, 126);
  const TriMesh m = triangulate(c, 0.05);
  const PoissonSolver solver(m);
  const BoundaryScalarField g = boundary_const(m.boundary_count, 1.0);
  const double S = compatible_divergence(c, g);
  CHECK(S == doctest::Approx(2.0).epsilon(1e-3));

  const ScalarField u = solver.solve_neumann(g, S);
  const double err =
      max_abs_error(u, [](Vec2 p) { return 0.5 * (p.x * p.x + p.y * p.y) - 0.25; });
  CHECK(err <= 0.02 * 0.25);

  // The constant shift is fixed by the weighted mean.
  const std::vector<double>& w = solver.vertex_weights();
  double mean = 0.0;
  for (std::size_t i = 0; i < u.values.size(); ++i) mean += w[i] * u.values[i];
  mean /= solver.area();
  CHECK(std::fabs(mean) <= 1e-10);
}

TEST_CASE("harmonic flux data reproduces the linear potential") {
  const Contour c = make_circle(1.0, 126);
  const TriMesh m = triangulate(c, 0.05);
  const PoissonSolver solver(m);
  const BoundaryScalarField g = boundary_cos(m.boundary_count, 1);
  const double S = compatible_divergence(c, g);
  CHECK(std::fabs(S) <= 1e-12);
  const ScalarField u = solver.solve_neumann(g, 0.0);
  CHECK(max_abs_error(u, [](Vec2 p) { return p.x; }) <= 0.02);
}

TEST_CASE("zero flux data yields the zero potential") {
  const Contour c = make_circle(1.0, 64);
  const TriMesh m = triangulate(c, 0.1);
  const ScalarField u = solve_neumann(m, boundary_const(m.boundary_count, 0.0), 0.0);
  for (double v : u.values) CHECK(std::fabs(v) <= 1e-12);
}

TEST_CASE("zero-boundary solves match the radial oracle") {
  SUBCASE("unit disk") {
    const Contour c = make_circle(1.0, 126);
    const TriMesh m = triangulate(c, 0.05);
    const ScalarField u = solve_dirichlet(m, 1.0);
    const double err =
        max_abs_error(u, [](Vec2 p) { return 0.25 * (p.x * p.x + p.y * p.y - 1.0); });
    CHECK(err <= 0.02 * 0.25);
  }
  SUBCASE("zero load is exactly zero") {
    const Contour c = make_circle(1.0, 64);
    const TriMesh m = triangulate(c, 0.1);
    const ScalarField u = solve_dirichlet(m, 0.0);
    for (double v : u.values) CHECK(v == 0.0);
  }
  SUBCASE("radius-two disk") {
    const Contour c = make_circle(2.0, 126);
    const TriMesh m = triangulate(c, 0.1);
    const ScalarField u = solve_dirichlet(m, 1.0);
    const double err =
        max_abs_error(u, [](Vec2 p) { return 0.25 * (p.x * p.x + p.y * p.y - 4.0); });
    CHECK(err <= 0.02 * 1.0);
  }
}

TEST_CASE("weak re-solve preserves zero-trace potentials and kills harmonic ones") {
  const Contour c = make_circle(1.0, 126);
  const TriMesh m = triangulate(c, 0.05);
  const PoissonSolver solver(m);

  SUBCASE("zero-trace input round-trips") {
    const ScalarField u = solver.solve_dirichlet(1.0);
    const ScalarField v = solver.solve_dirichlet_field(u);
    for (std::size_t i = 0; i < u.values.size(); ++i)
      CHECK(std::fabs(v.values[i] - u.values[i]) <= 1e-8);
  }
  SUBCASE("harmonic input maps to zero") {
    ScalarField u;
    u.mesh = &m;
    u.values.resize(m.vertex_count());
    for (std::size_t i = 0; i < m.vertex_count(); ++i) u.values[i] = m.vertices[i].x;
    const ScalarField v = solver.solve_dirichlet_field(u);
    for (double val : v.values) CHECK(std::fabs(val) <= 1e-10);
  }
  SUBCASE("radial quadratic maps to its zero-trace representative") {
    ScalarField u;
    u.mesh = &m;
    u.values.resize(m.vertex_count());
    for (std::size_t i = 0; i < m.vertex_count(); ++i) {
      const Vec2 p = m.vertices[i];
      u.values[i] = 0.5 * (p.x * p.x + p.y * p.y);
    }
    const ScalarField v = solver.solve_dirichlet_field(u);
    const double err =
        max_abs_error(v, [](Vec2 p) { return 0.5 * (p.x * p.x + p.y * p.y - 1.0); });
    CHECK(err <= 0.02 * 0.5);
  }
}

TEST_CASE("per-triangle gradients are exact on affine data") {
  std::vector<Vec2> shifted = make_circle(1.0, 64).points();
  for (Vec2& p : shifted) p += Vec2{0.25, -0.5};
  const Contour c{shifted};
  const TriMesh m = triangulate(c, 0.1);
  const PoissonSolver solver(m);
  ScalarField u;
  u.mesh = &m;
  u.values.resize(m.vertex_count());

  SUBCASE("affine potential") {
    for (std::size_t i = 0; i < m.vertex_count(); ++i)
      u.values[i] = 3.0 * m.vertices[i].x - 2.0 * m.vertices[i].y + 7.0;
    const VectorField g = solver.gradient(u);
    for (const Vec2& v : g.gradients) {
      CHECK(std::fabs(v.x - 3.0) <= 1e-12);
      CHECK(std::fabs(v.y + 2.0) <= 1e-12);
    }
  }
  SUBCASE("constant potential") {
    for (auto& v : u.values) v = 42.0;
    const VectorField g = solver.gradient(u);
    for (const Vec2& v : g.gradients) {
      CHECK(std::fabs(v.x) <= 1e-10);
      CHECK(std::fabs(v.y) <= 1e-10);
    }
  }
  SUBCASE("radial quadratic tracks centroids at first order") {
    for (std::size_t i = 0; i < m.vertex_count(); ++i) {
      const Vec2 p = m.vertices[i];
      u.values[i] = 0.5 * (p.x * p.x + p.y * p.y);
    }
    const VectorField g = solver.gradient(u);
    for (std::size_t t = 0; t < m.triangle_count(); ++t) {
      const auto& tri = m.triangles[t];
      const Vec2 cen = (m.vertices[tri[0]] + m.vertices[tri[1]] + m.vertices[tri[2]]) * (1.0 / 3.0);
      CHECK(dist(g.gradients[t], cen) <= 0.1);  // mesh size bound
    }
  }
}

TEST_CASE("transport inner product normalizes, separates, and is bilinear") {
  const Contour c = make_circle(1.0, 126);
  const TriMesh m = triangulate(c, 0.05);
  const PoissonSolver solver(m);
  const std::size_t nt = m.triangle_count();

  VectorField ex{&m, std::vector<Vec2>(nt, Vec2{1.0, 0.0})};
  VectorField ey{&m, std::vector<Vec2>(nt, Vec2{0.0, 1.0})};
  CHECK(solver.inner_product(ex, ex) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(solver.inner_product(ex, ey) == 0.0);

  const ScalarField us = solver.solve_dirichlet(1.0);
  const VectorField as = solver.gradient(us);
  CHECK(solver.inner_product(as, as) == doctest::Approx(0.125).epsilon(0.02));

  VectorField a{&m, std::vector<Vec2>(nt)};
  VectorField b{&m, std::vector<Vec2>(nt)};
  VectorField g{&m, std::vector<Vec2>(nt)};
  for (std::size_t t = 0; t < nt; ++t) {
    a.gradients[t] = {hashed_unit(4 * t), hashed_unit(4 * t + 1)};
    b.gradients[t] = {hashed_unit(4 * t + 2), hashed_unit(4 * t + 3)};
    g.gradients[t] = {hashed_unit(7 * t + 5), hashed_unit(7 * t + 6)};
  }
  VectorField lin{&m, std::vector<Vec2>(nt)};
  for (std::size_t t = 0; t < nt; ++t)
    lin.gradients[t] = a.gradients[t] * 2.0 + b.gradients[t];
  CHECK(solver.inner_product(lin, g) ==
        doctest::Approx(2.0 * solver.inner_product(a, g) + solver.inner_product(b, g))
            .epsilon(1e-12));
  CHECK(solver.inner_product(a, b) == solver.inner_product(b, a));
  CHECK(solver.inner_product(a, a) >= 0.0);
}

TEST_CASE("vertex divergence recovery") {
  const Contour c = make_circle(1.0, 126);
  const TriMesh m = triangulate(c, 0.05);
  const PoissonSolver solver(m);

  SUBCASE("identity field has divergence two") {
    // Triangle averages of alpha(x) = x are the centroids; for fields that are
    // linear in position this sampling makes the weak recovery exact.
    VectorField a{&m, std::vector<Vec2>(m.triangle_count())};
    for (std::size_t t = 0; t < m.triangle_count(); ++t) {
      const auto& tri = m.triangles[t];
      a.gradients[t] =
          (m.vertices[tri[0]] + m.vertices[tri[1]] + m.vertices[tri[2]]) * (1.0 / 3.0);
    }
    const DivergenceField d = solver.divergence(a);
    for (std::size_t v = 0; v < d.values.size(); ++v)
      if (!d.boundary_vertex[v]) CHECK(std::fabs(d.values[v] - 2.0) <= 0.10);
  }
  SUBCASE("constant field has zero divergence at interior vertices") {
    VectorField a{&m, std::vector<Vec2>(m.triangle_count(), Vec2{0.7, -0.3})};
    const DivergenceField d = solver.divergence(a);
    for (std::size_t v = 0; v < d.values.size(); ++v)
      if (!d.boundary_vertex[v]) CHECK(std::fabs(d.values[v]) <= 1e-10);
  }
  SUBCASE("boundary flags match the mesh") {
    VectorField a{&m, std::vector<Vec2>(m.triangle_count(), Vec2{1.0, 0.0})};
    const DivergenceField d = solver.divergence(a);
    for (std::uint32_t v = 0; v < m.vertex_count(); ++v)
      CHECK(static_cast<bool>(d.boundary_vertex[v]) == m.is_boundary_vertex(v));
  }
  SUBCASE("flux solutions have spatially constant divergence") {
    BoundaryScalarField g = boundary_const(m.boundary_count, 1.0);
    for (std::size_t i = 0; i < g.size(); ++i)
      g.values[i] += 0.5 * std::cos(2.0 * 2.0 * kPi * static_cast<double>(i) /
                                    static_cast<double>(m.boundary_count));
    const double S = compatible_divergence(c, g);
    const ScalarField u = solver.solve_neumann(g, S);
    const DivergenceStats st = interior_divergence_stats(solver.divergence(solver.gradient(u)));
    CHECK(std::fabs(st.mean - S) <= 1e-9);
    CHECK(st.stddev <= 1e-9);
  }
}

TEST_CASE("assembly identities") {
  const Contour c = make_star(1.0, 0.35, 5, 96);
  const TriMesh m = triangulate(c, 0.1);
  const PoissonSolver solver(m);

  SUBCASE("stiffness annihilates constants") { CHECK(solver.stiffness_row_sum_max() <= 1e-12); }

  SUBCASE("stiffness action equals the gradient pairing") {
    std::vector<double> uv(m.vertex_count()), vv(m.vertex_count());
    for (std::size_t i = 0; i < m.vertex_count(); ++i) {
      uv[i] = hashed_unit(3 * i + 11);
      vv[i] = hashed_unit(3 * i + 12);
    }
    const std::vector<double> ku = solver.stiffness_action(uv);
    double lhs = 0.0;
    for (std::size_t i = 0; i < m.vertex_count(); ++i) lhs += vv[i] * ku[i];

    ScalarField u{&m, uv}, v{&m, vv};
    const VectorField gu = solver.gradient(u);
    const VectorField gv = solver.gradient(v);
    const double rhs = solver.inner_product(gu, gv) * solver.area();
    CHECK(std::fabs(lhs - rhs) <= 1e-10 * std::max(1.0, std::fabs(rhs)));
  }
}

TEST_CASE("refinement drives the disk oracles down at better than linear order") {
  const double hs[3] = {0.2, 0.1, 0.05};
  double e_const[3], e_cos[3], e_dir[3];
  for (int k = 0; k < 3; ++k) {
    const std::size_t n = static_cast<std::size_t>(std::lround(2.0 * kPi / hs[k]));
    const Contour c = make_circle(1.0, n);
    const TriMesh m = triangulate(c, hs[k]);
    const PoissonSolver solver(m);

    const BoundaryScalarField g1 = boundary_const(m.boundary_count, 1.0);
    const ScalarField u1 = solver.solve_neumann(g1, compatible_divergence(c, g1));
    e_const[k] =
        max_abs_error(u1, [](Vec2 p) { return 0.5 * (p.x * p.x + p.y * p.y) - 0.25; });

    const BoundaryScalarField gc = boundary_cos(m.boundary_count, 1);
    const ScalarField uc = solver.solve_neumann(gc, compatible_divergence(c, gc));
    e_cos[k] = max_abs_error(uc, [](Vec2 p) { return p.x; });

    const ScalarField ud = solver.solve_dirichlet(1.0);
    e_dir[k] =
        max_abs_error(ud, [](Vec2 p) { return 0.25 * (p.x * p.x + p.y * p.y - 1.0); });
  }
  for (const double* e : {e_const, e_cos, e_dir}) {
    CHECK(e[1] < e[0]);
    CHECK(e[2] < e[1]);
    const double order = std::log(e[0] / e[2]) / std::log(hs[0] / hs[2]);
    CHECK(order >= 1.5);
  }
}

TEST_CASE("solver input validation") {
  const Contour c = make_circle(1.0, 64);
  const TriMesh m = triangulate(c, 0.1);
  const PoissonSolver solver(m);

  BoundaryScalarField wrong;
  wrong.values.assign(m.boundary_count + 1, 1.0);
  CHECK_THROWS_AS(solver.solve_neumann(wrong, 2.0), InvalidArgument);

  const BoundaryScalarField ones = boundary_const(m.boundary_count, 1.0);
  CHECK_THROWS_AS(solver.solve_neumann(ones, 0.0), IncompatibleData);

  const Contour c2 = make_circle(2.0, 64);
  const TriMesh m2 = triangulate(c2, 0.2);
  VectorField on_other{&m2, std::vector<Vec2>(m2.triangle_count(), Vec2{1.0, 0.0})};
  VectorField on_this{&m, std::vector<Vec2>(m.triangle_count(), Vec2{1.0, 0.0})};
  CHECK_THROWS_AS(solver.inner_product(on_this, on_other), InvalidArgument);

  ScalarField bad{&m2, std::vector<double>(m2.vertex_count(), 0.0)};
  CHECK_THROWS_AS(solver.gradient(bad), InvalidArgument);
  CHECK_THROWS_AS(solver.solve_dirichlet_field(bad), InvalidArgument);
}
