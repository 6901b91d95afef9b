#include "shapeflow/contour.hpp"

#include <cmath>
#include <vector>

#include "doctest.h"
#include "shapeflow/errors.hpp"
#include "shapeflow/shapes.hpp"

using namespace shapeflow;

namespace {

constexpr double kPi = 3.14159265358979323846;

// Closed-form values for the regular N-gon inscribed in a radius-R circle;
// these are the exact quantities the polyline operations should reproduce.
double ngon_area(std::size_t n, double r) {
  return 0.5 * static_cast<double>(n) * r * r * std::sin(2.0 * kPi / static_cast<double>(n));
}

double ngon_perimeter(std::size_t n, double r) {
  return 2.0 * static_cast<double>(n) * r * std::sin(kPi / static_cast<double>(n));
}

Contour unit_square_16() {
  std::vector<Vec2> pts;
  for (int i = 0; i < 4; ++i) pts.push_back({0.25 * i, 0.0});
  for (int i = 0; i < 4; ++i) pts.push_back({1.0, 0.25 * i});
  for (int i = 0; i < 4; ++i) pts.push_back({1.0 - 0.25 * i, 1.0});
  for (int i = 0; i < 4; ++i) pts.push_back({0.0, 1.0 - 0.25 * i});
  return Contour(std::move(pts));
}

}  // namespace

TEST_CASE("contour validation rejects bad input") {
  std::vector<Vec2> few(8);
  for (int i = 0; i < 8; ++i)
    few[i] = {std::cos(2.0 * kPi * i / 8), std::sin(2.0 * kPi * i / 8)};
  CHECK_THROWS_AS(Contour{few}, InvalidArgument);

  // Clockwise circle.
  std::vector<Vec2> cw(32);
  for (int i = 0; i < 32; ++i)
    cw[i] = {std::cos(-2.0 * kPi * i / 32), std::sin(-2.0 * kPi * i / 32)};
  CHECK_THROWS_AS(Contour{cw}, DegenerateGeometry);

  // Repeated consecutive point.
  std::vector<Vec2> rep(32);
  for (int i = 0; i < 32; ++i)
    rep[i] = {std::cos(2.0 * kPi * i / 32), std::sin(2.0 * kPi * i / 32)};
  rep[5] = rep[4];
  CHECK_THROWS_AS(Contour{rep}, DegenerateGeometry);

  // Figure-eight: a bowtie densified to 16 samples self-intersects.
  std::vector<Vec2> bow;
  const Vec2 corners[4] = {{0, 0}, {1, 1}, {1, 0}, {0, 1}};
  for (int e = 0; e < 4; ++e)
    for (int i = 0; i < 4; ++i) {
      const double t = i / 4.0;
      bow.push_back(corners[e] + t * (corners[(e + 1) % 4] - corners[e]));
    }
  CHECK_THROWS_AS(Contour{bow}, DegenerateGeometry);
}

TEST_CASE("area and perimeter match closed forms") {
  const std::size_t n = 256;
  const Contour c1 = make_circle(1.0, n);
  CHECK(area(c1) == doctest::Approx(ngon_area(n, 1.0)).epsilon(1e-12));
  CHECK(perimeter(c1) == doctest::Approx(ngon_perimeter(n, 1.0)).epsilon(1e-12));
  CHECK(area(c1) == doctest::Approx(kPi).epsilon(1e-3));

  // Quadratic scaling in the radius, same sample count.
  const Contour c2 = make_circle(2.0, n);
  CHECK(area(c2) == doctest::Approx(4.0 * area(c1)).epsilon(1e-12));

  CHECK(area(unit_square_16()) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(perimeter(unit_square_16()) == doctest::Approx(4.0).epsilon(1e-12));
}

TEST_CASE("arclength resampling") {
  const Contour c = make_circle(1.0, 64);

  SUBCASE("identity when spacing already uniform") {
    const Contour r = resample_arclength(c, 64);
    for (std::size_t i = 0; i < 64; ++i) {
      CHECK(r[i].x == doctest::Approx(c[i].x).epsilon(1e-12));
      CHECK(r[i].y == doctest::Approx(c[i].y).epsilon(1e-12));
    }
  }

  SUBCASE("upsampling stays on the polygon") {
    const Contour r = resample_arclength(c, 128);
    CHECK(r.size() == 128);
    // Points interpolate chords of the 64-gon, so radii lie in [cos(pi/64), 1].
    for (std::size_t i = 0; i < r.size(); ++i) {
      const double rad = norm(r[i]);
      CHECK(rad <= 1.0 + 1e-12);
      CHECK(rad >= std::cos(kPi / 64.0) - 1e-12);
    }
    CHECK(perimeter(r) == doctest::Approx(perimeter(c)).epsilon(1e-3));
  }

  SUBCASE("square corners preserved under resampling") {
    const Contour sq = unit_square_16();
    const Contour r = resample_arclength(sq, 32);
    CHECK(perimeter(r) == doctest::Approx(4.0).epsilon(1e-12));
    // Total length 4 over 32 samples: every corner sits at a multiple of the
    // 0.125 spacing, so corners are reproduced exactly.
    bool found_corner = false;
    for (std::size_t i = 0; i < r.size(); ++i)
      if (std::fabs(r[i].x - 1.0) < 1e-12 && std::fabs(r[i].y - 1.0) < 1e-12)
        found_corner = true;
    CHECK(found_corner);
  }

  SUBCASE("area drift under modest resampling stays below one percent") {
    for (const Contour& shape :
         {make_circle(1.0, 64), make_ellipse(2.0, 1.0, 64),
          make_star(1.0, 0.3, 5, 64), make_bump(1.0, 0.4, 0.5, 0.0, 64)}) {
      const Contour r = resample_arclength(shape, 128);
      CHECK(std::fabs(area(r) - area(shape)) / area(shape) < 0.01);
    }
  }

  CHECK_THROWS_AS(resample_arclength(c, 8), InvalidArgument);
}

TEST_CASE("normal field") {
  SUBCASE("circle normals are exactly radial") {
    // Centered differences of symmetric chords are parallel to the true
    // tangent, so the normalized normal equals the radial direction.
    const Contour c = make_circle(1.0, 128);
    const BoundaryVectorField nf = normal_field(c);
    for (std::size_t i = 0; i < c.size(); ++i) {
      const Vec2 radial = c[i] / norm(c[i]);
      CHECK(nf[i].x == doctest::Approx(radial.x).epsilon(1e-12));
      CHECK(nf[i].y == doctest::Approx(radial.y).epsilon(1e-12));
      CHECK(norm(nf[i]) == doctest::Approx(1.0).epsilon(1e-12));
    }
  }

  SUBCASE("ellipse normals converge to the analytic direction") {
    const std::size_t n = 256;
    std::vector<Vec2> pts(n);
    for (std::size_t i = 0; i < n; ++i) {
      const double t = 2.0 * kPi * static_cast<double>(i) / static_cast<double>(n);
      pts[i] = {2.0 * std::cos(t), std::sin(t)};
    }
    const Contour c{std::move(pts)};
    const BoundaryVectorField nf = normal_field(c);
    for (std::size_t i = 0; i < n; ++i) {
      const double t = 2.0 * kPi * static_cast<double>(i) / static_cast<double>(n);
      Vec2 exact{std::cos(t), 2.0 * std::sin(t)};
      exact = exact / norm(exact);
      CHECK(std::fabs(nf[i].x - exact.x) < 1e-3);
      CHECK(std::fabs(nf[i].y - exact.y) < 1e-3);
    }
  }

  SUBCASE("degenerate tangent detected") {
    // A polyline where p[i+1] == p[i-1] (a zero-width spike) breaks the
    // centered difference; such shapes already fail simplicity validation.
    std::vector<Vec2> pts(32);
    for (int i = 0; i < 32; ++i)
      pts[i] = {std::cos(2.0 * kPi * i / 32), std::sin(2.0 * kPi * i / 32)};
    pts[6] = pts[4];
    CHECK_THROWS_AS(Contour{pts}, DegenerateGeometry);
  }
}

TEST_CASE("boundary integral") {
  const std::size_t n = 256;
  const Contour c = make_circle(1.0, n);

  BoundaryScalarField ones{std::vector<double>(n, 1.0)};
  CHECK(boundary_integral(c, ones) == doctest::Approx(ngon_perimeter(n, 1.0)).epsilon(1e-12));
  CHECK(boundary_integral(c, ones) == doctest::Approx(2.0 * kPi).epsilon(1e-3));

  BoundaryScalarField zeros{std::vector<double>(n, 0.0)};
  CHECK(boundary_integral(c, zeros) == 0.0);

  BoundaryScalarField cosines{std::vector<double>(n)};
  for (std::size_t i = 0; i < n; ++i)
    cosines.values[i] = std::cos(2.0 * kPi * static_cast<double>(i) / static_cast<double>(n));
  CHECK(std::fabs(boundary_integral(c, cosines)) < 1e-8);

  BoundaryScalarField wrong{std::vector<double>(n / 2, 1.0)};
  CHECK_THROWS_AS(boundary_integral(c, wrong), InvalidArgument);
}

TEST_CASE("shape derivative") {
  const std::size_t n = 256;
  const Contour c = make_circle(1.0, n);
  BoundaryScalarField ones{std::vector<double>(n, 1.0)};

  // phi == 1 reduces to the plain boundary integral.
  const double d1 = shape_derivative(c, ones, [](Vec2) { return 1.0; });
  CHECK(d1 == doctest::Approx(boundary_integral(c, ones)).epsilon(1e-14));

  // Odd integrand over a symmetric contour cancels.
  const double dx = shape_derivative(c, ones, [](Vec2 p) { return p.x; });
  CHECK(std::fabs(dx) < 1e-8);

  BoundaryScalarField zeros{std::vector<double>(n, 0.0)};
  CHECK(shape_derivative(c, zeros, [](Vec2 p) { return p.x * p.y; }) == 0.0);
}

TEST_CASE("horizontal projection") {
  const std::size_t n = 128;
  const Contour c = make_circle(1.0, n);
  const BoundaryVectorField nf = normal_field(c);

  SUBCASE("normals project to ones, tangents to zero") {
    const BoundaryScalarField pn = horizontal_project(c, nf);
    BoundaryVectorField tf;
    tf.values.resize(n);
    for (std::size_t i = 0; i < n; ++i) tf.values[i] = {-nf[i].y, nf[i].x};
    const BoundaryScalarField pt = horizontal_project(c, tf);
    for (std::size_t i = 0; i < n; ++i) {
      CHECK(pn[i] == doctest::Approx(1.0).epsilon(1e-12));
      CHECK(std::fabs(pt[i]) < 1e-12);
    }
  }

  SUBCASE("constant field projects to the normal x-component") {
    BoundaryVectorField ex;
    ex.values.assign(n, Vec2{1.0, 0.0});
    const BoundaryScalarField p = horizontal_project(c, ex);
    for (std::size_t i = 0; i < n; ++i)
      CHECK(p[i] == doctest::Approx(nf[i].x).epsilon(1e-12));
  }

  SUBCASE("reconstruction through normals is exact") {
    BoundaryScalarField a{std::vector<double>(n)};
    for (std::size_t i = 0; i < n; ++i)
      a.values[i] = std::sin(3.0 * 2.0 * kPi * static_cast<double>(i) / static_cast<double>(n));
    BoundaryVectorField v;
    v.values.resize(n);
    for (std::size_t i = 0; i < n; ++i) v.values[i] = a[i] * nf[i];
    const BoundaryScalarField back = horizontal_project(c, v);
    for (std::size_t i = 0; i < n; ++i)
      CHECK(back[i] == doctest::Approx(a[i]).epsilon(1e-12));
  }
}
