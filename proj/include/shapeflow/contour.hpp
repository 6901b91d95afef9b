#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "shapeflow/geometry.hpp"

namespace shapeflow {

// Per-sample scalar data attached to a contour (e.g. normal speeds).
struct BoundaryScalarField {
  std::vector<double> values;

  std::size_t size() const { return values.size(); }
  double operator[](std::size_t i) const { return values[i]; }
  double& operator[](std::size_t i) { return values[i]; }
};

// Per-sample vector data attached to a contour (e.g. outward normals).
struct BoundaryVectorField {
  std::vector<Vec2> values;

  std::size_t size() const { return values.size(); }
  const Vec2& operator[](std::size_t i) const { return values[i]; }
  Vec2& operator[](std::size_t i) { return values[i]; }
};

// Closed simple polyline, oriented counter-clockwise, with at least 16
// samples and no repeated consecutive points. Validation happens on
// construction; a Contour in hand is always usable.
class Contour {
 public:
  explicit Contour(std::vector<Vec2> points);

  const std::vector<Vec2>& points() const { return points_; }
  std::size_t size() const { return points_.size(); }
  const Vec2& operator[](std::size_t i) const { return points_[i]; }

 private:
  std::vector<Vec2> points_;
};

// Polygon area by the shoelace formula (positive for valid contours).
double area(const Contour& c);

// Total polyline length.
double perimeter(const Contour& c);

// Redistribute m samples at equal arclength along the polyline, anchored at
// the first sample. Requires m >= 16.
Contour resample_arclength(const Contour& c, std::size_t m);

// Unit outward normals from centered differences of neighboring samples.
BoundaryVectorField normal_field(const Contour& c);

// Trapezoidal quadrature of a against arclength: sum of segment averages.
double boundary_integral(const Contour& c, const BoundaryScalarField& a);

// Trapezoidal quadrature of phi * a against arclength, phi evaluated at the
// samples. First variation of integrals of phi under normal speed a.
double shape_derivative(const Contour& c, const BoundaryScalarField& a,
                        const std::function<double(Vec2)>& phi);

// Normal component of a per-sample vector field: <v_i, n_i>.
BoundaryScalarField horizontal_project(const Contour& c, const BoundaryVectorField& v);

}  // namespace shapeflow
