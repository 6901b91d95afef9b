#include "shapeflow/shapes.hpp"

#include <cmath>
#include <vector>

#include "shapeflow/errors.hpp"

namespace shapeflow {

namespace {

constexpr double kPi = 3.14159265358979323846;

// Sample a polar radius function densely, then resample to n equispaced
// arclength positions so downstream consumers see uniform spacing.
Contour polar_shape(const std::function<double(double)>& radius, std::size_t n) {
  const std::size_t fine = 8 * n;
  std::vector<Vec2> pts(fine);
  for (std::size_t i = 0; i < fine; ++i) {
    const double t = 2.0 * kPi * static_cast<double>(i) / static_cast<double>(fine);
    const double r = radius(t);
    if (!(r > 0.0)) throw InvalidArgument("shape radius must stay positive");
    pts[i] = {r * std::cos(t), r * std::sin(t)};
  }
  return resample_arclength(Contour(std::move(pts)), n);
}

}  // namespace

Contour make_circle(double radius, std::size_t n) {
  if (!(radius > 0.0)) throw InvalidArgument("circle radius must be positive");
  std::vector<Vec2> pts(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double t = 2.0 * kPi * static_cast<double>(i) / static_cast<double>(n);
    pts[i] = {radius * std::cos(t), radius * std::sin(t)};
  }
  return Contour(std::move(pts));
}

Contour make_ellipse(double a, double b, std::size_t n) {
  if (!(a > 0.0) || !(b > 0.0)) throw InvalidArgument("ellipse axes must be positive");
  const std::size_t fine = 8 * n;
  std::vector<Vec2> pts(fine);
  for (std::size_t i = 0; i < fine; ++i) {
    const double t = 2.0 * kPi * static_cast<double>(i) / static_cast<double>(fine);
    pts[i] = {a * std::cos(t), b * std::sin(t)};
  }
  return resample_arclength(Contour(std::move(pts)), n);
}

Contour make_star(double radius, double lambda, unsigned k, std::size_t n) {
  if (!(radius > 0.0)) throw InvalidArgument("star radius must be positive");
  if (k == 0) throw InvalidArgument("star lobe count must be positive");
  const double amp = lambda / static_cast<double>(k);
  return polar_shape(
      [&](double t) { return radius * (1.0 + amp * std::sin(k * t)); }, n);
}

Contour make_bump(double radius, double amplitude, double width, double center,
                  std::size_t n) {
  if (!(radius > 0.0)) throw InvalidArgument("bump radius must be positive");
  if (!(width > 0.0)) throw InvalidArgument("bump width must be positive");
  return polar_shape(
      [&](double t) {
        double d = std::fmod(t - center + 3.0 * kPi, 2.0 * kPi) - kPi;
        return radius * (1.0 + amplitude * std::exp(-0.5 * d * d / (width * width)));
      },
      n);
}

}  // namespace shapeflow
