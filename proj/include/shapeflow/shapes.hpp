#pragma once

#include <cstddef>

#include "shapeflow/contour.hpp"

namespace shapeflow {

// Canonical test shapes. All are emitted as equispaced-arclength sample sets
// starting at angle zero and oriented counter-clockwise.

Contour make_circle(double radius, std::size_t n);

Contour make_ellipse(double a, double b, std::size_t n);

// Star-like perturbation of a circle: r(t) = radius * (1 + (lambda/k) sin(k t)).
// The amplitude shrinks with the lobe count k so the family stays simple.
Contour make_star(double radius, double lambda, unsigned k, std::size_t n);

// Circle with one Gaussian radial bump of the given amplitude and angular
// width, centered at angle `center`.
Contour make_bump(double radius, double amplitude, double width, double center,
                  std::size_t n);

}  // namespace shapeflow
