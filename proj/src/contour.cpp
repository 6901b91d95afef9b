#include "shapeflow/contour.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "shapeflow/errors.hpp"

namespace shapeflow {

namespace {

constexpr double kMinGap = 1e-12;
constexpr std::size_t kMinSamples = 16;

double signed_area(const std::vector<Vec2>& p) {
  double twice = 0.0;
  const std::size_t n = p.size();
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2& a = p[i];
    const Vec2& b = p[(i + 1) % n];
    twice += cross(a, b);
  }
  return 0.5 * twice;
}

// Simplicity check by sweep-and-prune over segment x-intervals. Adjacent
// segments share an endpoint and are exempt; everything else must be disjoint.
void check_simple(const std::vector<Vec2>& p) {
  const std::size_t n = p.size();
  struct Seg {
    double xmin, xmax;
    std::size_t i;  // segment from p[i] to p[(i+1)%n]
  };
  std::vector<Seg> segs(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2& a = p[i];
    const Vec2& b = p[(i + 1) % n];
    segs[i] = {std::min(a.x, b.x), std::max(a.x, b.x), i};
  }
  std::sort(segs.begin(), segs.end(), [](const Seg& s, const Seg& t) {
    if (s.xmin != t.xmin) return s.xmin < t.xmin;
    return s.i < t.i;
  });
  for (std::size_t si = 0; si < n; ++si) {
    for (std::size_t sj = si + 1; sj < n; ++sj) {
      if (segs[sj].xmin > segs[si].xmax) break;
      const std::size_t i = segs[si].i;
      const std::size_t j = segs[sj].i;
      const std::size_t lo = std::min(i, j);
      const std::size_t hi = std::max(i, j);
      if (hi - lo == 1 || (lo == 0 && hi == n - 1)) continue;  // neighbors
      if (segments_intersect(p[i], p[(i + 1) % n], p[j], p[(j + 1) % n]))
        throw DegenerateGeometry("contour is self-intersecting");
    }
  }
}

}  // namespace

Contour::Contour(std::vector<Vec2> points) : points_(std::move(points)) {
  if (points_.size() < kMinSamples)
    throw InvalidArgument("contour needs at least 16 samples, got " +
                          std::to_string(points_.size()));
  const std::size_t n = points_.size();
  for (std::size_t i = 0; i < n; ++i) {
    const double gap = dist(points_[i], points_[(i + 1) % n]);
    if (!(gap > kMinGap))
      throw DegenerateGeometry("consecutive contour samples coincide at index " +
                               std::to_string(i));
  }
  check_simple(points_);
  if (!(signed_area(points_) > 0.0))
    throw DegenerateGeometry("contour must be oriented counter-clockwise");
}

double area(const Contour& c) { return signed_area(c.points()); }

double perimeter(const Contour& c) {
  const auto& p = c.points();
  const std::size_t n = p.size();
  double len = 0.0;
  for (std::size_t i = 0; i < n; ++i) len += dist(p[i], p[(i + 1) % n]);
  return len;
}

Contour resample_arclength(const Contour& c, std::size_t m) {
  if (m < kMinSamples)
    throw InvalidArgument("resample target must be at least 16 samples");
  const auto& p = c.points();
  const std::size_t n = p.size();

  std::vector<double> cum(n + 1, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    cum[i + 1] = cum[i] + dist(p[i], p[(i + 1) % n]);
  const double total = cum[n];

  std::vector<Vec2> out(m);
  std::size_t seg = 0;
  for (std::size_t j = 0; j < m; ++j) {
    const double target = total * static_cast<double>(j) / static_cast<double>(m);
    while (seg + 1 < n && cum[seg + 1] <= target) ++seg;
    const double span = cum[seg + 1] - cum[seg];
    const double t = span > 0.0 ? (target - cum[seg]) / span : 0.0;
    out[j] = p[seg] + t * (p[(seg + 1) % n] - p[seg]);
  }
  return Contour(std::move(out));
}

BoundaryVectorField normal_field(const Contour& c) {
  const auto& p = c.points();
  const std::size_t n = p.size();
  BoundaryVectorField nf;
  nf.values.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2 tangent = p[(i + 1) % n] - p[(i + n - 1) % n];
    const double len = norm(tangent);
    if (!(len > kMinGap))
      throw DegenerateGeometry("degenerate tangent at contour sample " +
                               std::to_string(i));
    nf.values[i] = rotate_cw(tangent) / len;
  }
  return nf;
}

double boundary_integral(const Contour& c, const BoundaryScalarField& a) {
  const auto& p = c.points();
  const std::size_t n = p.size();
  if (a.size() != n)
    throw InvalidArgument("boundary field length does not match contour");
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t j = (i + 1) % n;
    sum += 0.5 * (a[i] + a[j]) * dist(p[i], p[j]);
  }
  return sum;
}

double shape_derivative(const Contour& c, const BoundaryScalarField& a,
                        const std::function<double(Vec2)>& phi) {
  const auto& p = c.points();
  const std::size_t n = p.size();
  if (a.size() != n)
    throw InvalidArgument("boundary field length does not match contour");
  BoundaryScalarField weighted;
  weighted.values.resize(n);
  for (std::size_t i = 0; i < n; ++i) weighted.values[i] = phi(p[i]) * a[i];
  return boundary_integral(c, weighted);
}

BoundaryScalarField horizontal_project(const Contour& c, const BoundaryVectorField& v) {
  if (v.size() != c.size())
    throw InvalidArgument("boundary field length does not match contour");
  const BoundaryVectorField nf = normal_field(c);
  BoundaryScalarField out;
  out.values.resize(c.size());
  for (std::size_t i = 0; i < c.size(); ++i) out.values[i] = dot(v[i], nf[i]);
  return out;
}

}  // namespace shapeflow
