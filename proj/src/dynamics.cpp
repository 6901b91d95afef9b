#include "shapeflow/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <utility>

#include "shapeflow/errors.hpp"
#include "shapeflow/poisson.hpp"

namespace shapeflow {

namespace {

constexpr double kInsideTol = 1e-12;     // relative barycentric slack
constexpr double kBlendCutoff = 1e-12;   // time-interpolation weight below which
                                         // the other slice is not evaluated

std::vector<std::vector<std::uint32_t>> vertex_fans(const TriMesh& m) {
  std::vector<std::vector<std::uint32_t>> fans(m.vertex_count());
  for (std::uint32_t t = 0; t < m.triangle_count(); ++t)
    for (std::uint32_t v : m.triangles[t]) fans[v].push_back(t);
  return fans;
}

// Hat-function gradients of a CCW triangle: grad of the basis at vertex k.
std::array<Vec2, 3> hat_gradients(const Vec2& a, const Vec2& b, const Vec2& c) {
  const double twice_area = cross(b - a, c - a);
  return {rotate_cw(b - c) / twice_area, rotate_cw(c - a) / twice_area,
          rotate_cw(a - b) / twice_area};
}

double point_segment_distance(const Vec2& x, const Vec2& p, const Vec2& q, double& s_out) {
  const Vec2 d = q - p;
  const double len2 = norm2(d);
  double s = len2 > 0.0 ? dot(x - p, d) / len2 : 0.0;
  s = std::clamp(s, 0.0, 1.0);
  s_out = s;
  return dist(x, p + s * d);
}

}  // namespace

// ---------------------------------------------------------------------------
// ParticleSet / flow providers
// ---------------------------------------------------------------------------

ParticleSet ParticleSet::seed(std::vector<Vec2> points, bool record_history) {
  ParticleSet p;
  p.positions = std::move(points);
  p.log_detJ.assign(p.positions.size(), 0.0);
  p.record_history = record_history;
  return p;
}

FlowProvider::~FlowProvider() = default;

AnalyticFlow::AnalyticFlow(VelocityFn velocity, DivergenceFn divergence)
    : velocity_(std::move(velocity)), divergence_(std::move(divergence)) {
  if (!velocity_ || !divergence_)
    throw InvalidArgument("analytic flow needs both velocity and divergence callables");
}

Vec2 AnalyticFlow::velocity(double t, const Vec2& x) const { return velocity_(t, x); }
double AnalyticFlow::divergence(double t, const Vec2& x) const { return divergence_(t, x); }

// ---------------------------------------------------------------------------
// TriLocator
// ---------------------------------------------------------------------------

TriLocator::TriLocator(const TriMesh& mesh) : mesh_(&mesh) {
  if (mesh.vertex_count() == 0 || mesh.triangle_count() == 0)
    throw InvalidArgument("cannot build a locator over an empty mesh");

  Vec2 lo = mesh.vertices[0];
  Vec2 hi = mesh.vertices[0];
  for (const Vec2& v : mesh.vertices) {
    lo.x = std::min(lo.x, v.x);
    lo.y = std::min(lo.y, v.y);
    hi.x = std::max(hi.x, v.x);
    hi.y = std::max(hi.y, v.y);
  }
  const double width = std::max(hi.x - lo.x, 1e-12);
  const double height = std::max(hi.y - lo.y, 1e-12);
  cell_ = std::max(mesh.h, 1e-9 * std::max(width, height));
  // Keep the grid bounded even for tiny h relative to the extent.
  const int kMaxPerAxis = 2048;
  nx_ = std::clamp(static_cast<int>(std::ceil(width / cell_)), 1, kMaxPerAxis);
  ny_ = std::clamp(static_cast<int>(std::ceil(height / cell_)), 1, kMaxPerAxis);
  cell_ = std::max(width / nx_, height / ny_);
  x0_ = lo.x;
  y0_ = lo.y;

  cells_.assign(static_cast<std::size_t>(nx_) * ny_, {});
  for (std::uint32_t t = 0; t < mesh.triangle_count(); ++t) {
    const auto& tri = mesh.triangles[t];
    Vec2 tlo = mesh.vertices[tri[0]];
    Vec2 thi = tlo;
    for (int k = 1; k < 3; ++k) {
      const Vec2& v = mesh.vertices[tri[k]];
      tlo.x = std::min(tlo.x, v.x);
      tlo.y = std::min(tlo.y, v.y);
      thi.x = std::max(thi.x, v.x);
      thi.y = std::max(thi.y, v.y);
    }
    const int cx0 = std::clamp(static_cast<int>((tlo.x - x0_) / cell_), 0, nx_ - 1);
    const int cx1 = std::clamp(static_cast<int>((thi.x - x0_) / cell_), 0, nx_ - 1);
    const int cy0 = std::clamp(static_cast<int>((tlo.y - y0_) / cell_), 0, ny_ - 1);
    const int cy1 = std::clamp(static_cast<int>((thi.y - y0_) / cell_), 0, ny_ - 1);
    for (int cy = cy0; cy <= cy1; ++cy)
      for (int cx = cx0; cx <= cx1; ++cx)
        cells_[static_cast<std::size_t>(cell_index(cx, cy))].push_back(t);
  }
}

TriLocator::Hit TriLocator::locate(const Vec2& x) const {
  const auto& verts = mesh_->vertices;

  const auto try_inside = [&](std::uint32_t t, Hit& hit) {
    const auto& tri = mesh_->triangles[t];
    const Vec2& a = verts[tri[0]];
    const Vec2& b = verts[tri[1]];
    const Vec2& c = verts[tri[2]];
    const double twice_area = cross(b - a, c - a);
    if (!(twice_area > 0.0)) return false;
    const double s0 = cross(b - x, c - x);
    const double s1 = cross(c - x, a - x);
    const double s2 = cross(a - x, b - x);
    const double slack = -kInsideTol * twice_area;
    if (s0 < slack || s1 < slack || s2 < slack) return false;
    const double p0 = std::max(s0, 0.0);
    const double p1 = std::max(s1, 0.0);
    const double p2 = std::max(s2, 0.0);
    const double sum = p0 + p1 + p2;
    hit.triangle = t;
    hit.b0 = p0 / sum;
    hit.b1 = p1 / sum;
    hit.b2 = p2 / sum;
    hit.distance = 0.0;
    return true;
  };

  const int cx = std::clamp(static_cast<int>((x.x - x0_) / cell_), 0, nx_ - 1);
  const int cy = std::clamp(static_cast<int>((x.y - y0_) / cell_), 0, ny_ - 1);

  Hit inside_hit;
  for (std::uint32_t t : cells_[static_cast<std::size_t>(cell_index(cx, cy))])
    if (try_inside(t, inside_hit)) return inside_hit;

  // Nearest-triangle fallback: expanding Chebyshev rings of cells. Cells in
  // ring r+1 cannot hold anything closer than r * cell, so stop as soon as
  // the best distance found beats that bound.
  Hit best;
  double best_dist = std::numeric_limits<double>::infinity();
  const int max_ring = std::max(nx_, ny_);
  for (int r = 0; r <= max_ring; ++r) {
    if (best_dist <= (r > 0 ? (r - 1) * cell_ : -1.0)) break;
    bool ring_has_cells = false;
    for (int dy = -r; dy <= r; ++dy) {
      const int yy = cy + dy;
      if (yy < 0 || yy >= ny_) continue;
      const bool edge_row = std::abs(dy) == r;
      const int step = edge_row ? 1 : 2 * r;
      for (int dx = -r; dx <= r; dx += std::max(step, 1)) {
        const int xx = cx + dx;
        if (xx < 0 || xx >= nx_) continue;
        ring_has_cells = true;
        for (std::uint32_t t : cells_[static_cast<std::size_t>(cell_index(xx, yy))]) {
          Hit h;
          if (try_inside(t, h)) return h;
          const auto& tri = mesh_->triangles[t];
          for (int e = 0; e < 3; ++e) {
            double s = 0.0;
            const double d =
                point_segment_distance(x, verts[tri[e]], verts[tri[(e + 1) % 3]], s);
            if (d < best_dist) {
              best_dist = d;
              best.triangle = t;
              best.distance = d;
              double bary[3] = {0.0, 0.0, 0.0};
              bary[e] = 1.0 - s;
              bary[(e + 1) % 3] = s;
              best.b0 = bary[0];
              best.b1 = bary[1];
              best.b2 = bary[2];
            }
          }
        }
      }
    }
    if (!ring_has_cells && r > 0 && best_dist < std::numeric_limits<double>::infinity() &&
        r * cell_ > best_dist)
      break;
  }
  if (!std::isfinite(best_dist)) throw SolverFailure("point location found no triangles");
  return best;
}

// ---------------------------------------------------------------------------
// Affine vertex recovery and field sampling
// ---------------------------------------------------------------------------

std::vector<Vec2> recover_vertex_vectors_affine(const TriMesh& m, const VectorField& a) {
  if (a.gradients.size() != m.triangle_count())
    throw InvalidArgument("per-triangle field length does not match the mesh");

  const auto fans = vertex_fans(m);
  std::vector<Vec2> out(m.vertex_count(), Vec2{0.0, 0.0});

  for (std::uint32_t v = 0; v < m.vertex_count(); ++v) {
    const auto& fan = fans[v];
    if (fan.empty()) continue;

    const Vec2 xv = m.vertices[v];
    double area_sum = 0.0;
    Vec2 mean{0.0, 0.0};
    double scale = 0.0;
    for (std::uint32_t t : fan) {
      const double w = triangle_area(m, t);
      const Vec2 d = triangle_centroid(m, t) - xv;
      area_sum += w;
      mean += w * a.gradients[t];
      scale = std::max(scale, norm(d));
    }
    mean = mean / area_sum;

    if (fan.size() < 3 || scale <= 0.0) {
      out[v] = mean;
      continue;
    }

    // Weighted least squares of an affine model over the fan centroids, in
    // the centered and scaled basis (1, dx/scale, dy/scale).
    double M00 = 0, M01 = 0, M02 = 0, M11 = 0, M12 = 0, M22 = 0;
    Vec2 r0{0, 0}, r1{0, 0}, r2{0, 0};
    for (std::uint32_t t : fan) {
      const double w = triangle_area(m, t);
      const Vec2 d = (triangle_centroid(m, t) - xv) / scale;
      const Vec2 g = a.gradients[t];
      M00 += w;
      M01 += w * d.x;
      M02 += w * d.y;
      M11 += w * d.x * d.x;
      M12 += w * d.x * d.y;
      M22 += w * d.y * d.y;
      r0 += w * g;
      r1 += (w * d.x) * g;
      r2 += (w * d.y) * g;
    }
    const double det = M00 * (M11 * M22 - M12 * M12) - M01 * (M01 * M22 - M12 * M02) +
                       M02 * (M01 * M12 - M11 * M02);
    if (!(std::fabs(det) > 1e-10 * M00 * M00 * M00)) {
      out[v] = mean;  // flat or tiny fan: affine fit is ill-posed
      continue;
    }
    // The fitted value at the vertex is the constant coefficient: replace
    // column 0 of the normal matrix by the right-hand side (Cramer).
    const auto constant_coeff = [&](double b0, double b1, double b2) {
      const double num = b0 * (M11 * M22 - M12 * M12) - M01 * (b1 * M22 - M12 * b2) +
                         M02 * (b1 * M12 - M11 * b2);
      return num / det;
    };
    out[v] = Vec2{constant_coeff(r0.x, r1.x, r2.x), constant_coeff(r0.y, r1.y, r2.y)};
  }
  return out;
}

FieldSampler::FieldSampler(std::shared_ptr<const TriMesh> mesh, const VectorField& field,
                           double div_constant)
    : mesh_(std::move(mesh)),
      locator_(*mesh_),
      vertex_velocity_(recover_vertex_vectors_affine(*mesh_, field)),
      div_constant_(div_constant) {
  if (field.mesh != mesh_.get())
    throw InvalidArgument("field sampler: field was built on a different mesh");
}

Vec2 FieldSampler::velocity(const Vec2& x) const {
  const TriLocator::Hit hit = locator_.locate(x);
  if (hit.distance > mesh_->h)
    throw OutOfDomain("query point left the evaluation domain by more than the mesh size");
  const auto& tri = mesh_->triangles[hit.triangle];
  return hit.b0 * vertex_velocity_[tri[0]] + hit.b1 * vertex_velocity_[tri[1]] +
         hit.b2 * vertex_velocity_[tri[2]];
}

double FieldSampler::divergence(const Vec2&) const {
  // Tangent fields carry spatially constant divergence by construction.
  return div_constant_;
}

double FieldSampler::escape_distance(const Vec2& x) const { return locator_.locate(x).distance; }

// ---------------------------------------------------------------------------
// Geodesic shooting
// ---------------------------------------------------------------------------

namespace {

void record_sample(GeodesicPath& path, const ShapeDomain& domain, const TangentVector& alpha,
                   double t) {
  GeodesicStep step;
  step.time = t;
  step.kinetic_norm = ot_norm(domain.solver(), alpha.grad);
  step.area = area(domain.contour());
  step.density = 1.0 / step.area;
  step.mass_identity_error = std::fabs(step.area * step.density - 1.0);
  step.mass_quadrature_error =
      std::fabs(mesh_area(domain.mesh()) * step.density - 1.0);
  step.divergence_constant = alpha.div_constant;

  path.times.push_back(t);
  path.contours.push_back(domain.contour());
  path.meshes.push_back(domain.mesh_ptr());
  path.potentials.push_back(alpha);
  path.boundary_speeds.push_back(boundary_trace(domain, alpha.potential.values).trace);
  path.step_diagnostics.push_back(step);
}

}  // namespace

GeodesicPath shoot_geodesic(const Contour& c0, const BoundaryScalarField& a0, double T,
                            int steps, double h, const ShootOptions& options) {
  if (steps < 8) throw InvalidArgument("geodesic shooting needs at least 8 steps");
  if (!(T > 0.0)) throw InvalidArgument("shooting horizon must be positive");
  if (a0.size() != c0.size())
    throw InvalidArgument("boundary speed length does not match the contour");
  if (options.relift_period < 1) throw InvalidArgument("re-lift period must be at least 1");

  const double dt = T / steps;
  GeodesicPath path;

  auto domain = std::make_unique<ShapeDomain>(c0, h);
  TangentVector alpha = lift(*domain, a0);

  for (int m = 0;; ++m) {
    record_sample(path, *domain, alpha, m * dt);
    if (m == steps) break;

    const TriMesh& mesh = domain->mesh();
    const std::size_t nv = mesh.vertex_count();
    const std::size_t nb = mesh.boundary_count;

    // Velocity at every vertex and the kinetic-energy correction fields. The
    // nodal kinetic energy is the squared recovered gradient, not the
    // recovered squared gradient: one-sided averaging of |grad|^2 over
    // boundary fans is biased inward by O(h), and that ring bias bleeds into
    // the update, while the affine-recovered gradient is first-order exact.
    std::vector<Vec2> vel = recover_vertex_vectors_affine(mesh, alpha.grad);

    // The affine fit undershoots the normal derivative on the boundary ring
    // (the fan is one-sided), which would make the contour lag the flow.
    // Correct only the MEAN normal speed against the consistent-flux trace:
    // the mean is the superconvergent area-rate balance, and a uniform shift
    // cannot feed back into local interface noise. (Replacing the normal
    // component per vertex is tempting but unstable: it couples each ring
    // vertex to its own flux reading and grid-scale dents then grow
    // exponentially, Laplacian-growth style.)
    {
      const BoundaryTrace bt = boundary_trace(*domain, alpha.potential.values);
      const BoundaryVectorField normals = normal_field(domain->contour());
      const Contour& cc = domain->contour();
      double flux_target = 0.0, flux_actual = 0.0, peri = 0.0;
      for (std::size_t i = 0; i < nb; ++i) {
        const std::size_t j = (i + 1) % nb;
        const double L = dist(cc[i], cc[j]);
        flux_target += 0.5 * L * (bt.trace.values[i] + bt.trace.values[j]);
        flux_actual += 0.5 * L * (dot(vel[i], normals[i]) + dot(vel[j], normals[j]));
        peri += L;
      }
      const double shift = (flux_target - flux_actual) / peri;
      for (std::size_t i = 0; i < nb; ++i) vel[i] = vel[i] + shift * normals[i];
    }

    std::vector<double> w_nodal(nv);
    for (std::size_t i = 0; i < nv; ++i) w_nodal[i] = 0.5 * norm2(vel[i]);
    const ScalarField w_field{&mesh, w_nodal};
    const TangentVector w_hat = project_to_stan(*domain, w_field);

    // Material update: move vertices with the flow, advance the potential by
    // its material rate |grad u|^2 - w_hat.
    std::vector<Vec2> moved(nv);
    std::vector<double> u_plus(nv);
    for (std::size_t i = 0; i < nv; ++i) {
      moved[i] = mesh.vertices[i] + dt * vel[i];
      u_plus[i] = alpha.potential.values[i] +
                  dt * (2.0 * w_nodal[i] - w_hat.potential.values[i]);
    }

    // Rebuild the boundary: moved ring, resampled to equal arclength. A
    // tangled ring means the geodesic left the space of simple contours.
    std::optional<Contour> next_contour;
    try {
      std::vector<Vec2> ring(moved.begin(), moved.begin() + static_cast<std::ptrdiff_t>(nb));
      next_contour.emplace(resample_arclength(Contour(std::move(ring)), nb));
    } catch (const DegenerateGeometry& e) {
      path.status = GeodesicStatus::breakdown;
      path.breakdown_reason = e.what();
      break;
    }

    auto next_domain = std::make_unique<ShapeDomain>(std::move(*next_contour), h);
    const TriMesh& next_mesh = next_domain->mesh();

    // Transfer the updated potential through the deformed copy of the old
    // mesh (barycentric interpolation at the new vertex positions).
    TriMesh carrier;
    carrier.vertices = std::move(moved);
    carrier.triangles = mesh.triangles;
    carrier.boundary_map = mesh.boundary_map;
    carrier.boundary_count = mesh.boundary_count;
    carrier.h = mesh.h;
    const TriLocator carrier_locator(carrier);

    // Plain barycentric transfer clips the potential's curvature, and the
    // clip is weaker at the boundary (new ring vertices sample carrier edges
    // — a one-directional clip) than inside (full two-directional clip). The
    // resulting inward-decaying error layer reads as a spurious negative
    // boundary flux and leaks magnitude every step. The half-weighted Taylor
    // form below is exact for quadratic potentials — the plain average
    // overshoots by the same curvature term that the full one-point Taylor
    // undershoots — which removes the layer.
    VectorField carrier_grad;
    carrier_grad.mesh = &carrier;
    carrier_grad.gradients.resize(carrier.triangle_count());
    for (std::size_t t = 0; t < carrier.triangle_count(); ++t) {
      const auto& tri = carrier.triangles[t];
      const Vec2& p0 = carrier.vertices[tri[0]];
      const Vec2& p1 = carrier.vertices[tri[1]];
      const Vec2& p2 = carrier.vertices[tri[2]];
      const double twice = cross(p1 - p0, p2 - p0);
      if (twice > 1e-14 * carrier.h * carrier.h) {
        carrier_grad.gradients[t] = (u_plus[tri[0]] * rotate_cw(p1 - p2) +
                                     u_plus[tri[1]] * rotate_cw(p2 - p0) +
                                     u_plus[tri[2]] * rotate_cw(p0 - p1)) /
                                    twice;
      } else {
        carrier_grad.gradients[t] = Vec2{0.0, 0.0};  // collapsed by the flow
      }
    }
    const std::vector<Vec2> g_plus = recover_vertex_vectors_affine(carrier, carrier_grad);

    std::vector<double> u_next(next_mesh.vertex_count());
    for (std::size_t j = 0; j < next_mesh.vertex_count(); ++j) {
      const TriLocator::Hit hit = carrier_locator.locate(next_mesh.vertices[j]);
      const auto& tri = carrier.triangles[hit.triangle];
      const Vec2& z = next_mesh.vertices[j];
      const double bary[3] = {hit.b0, hit.b1, hit.b2};
      double value = 0.0;
      for (int k = 0; k < 3; ++k)
        value += bary[k] *
                 (u_plus[tri[k]] + 0.5 * dot(g_plus[tri[k]], z - carrier.vertices[tri[k]]));
      u_next[j] = value;
    }

    // Back to the tangent space. Re-lifting every k-th step re-imposes the
    // constant-divergence constraint from the boundary trace of the
    // transferred potential; between re-lifts the potential is carried
    // as-is, with the flux-balance divergence constant. Projecting the
    // transferred potential each step would instead bleed kinetic energy at
    // O(h^2) per remesh: the projection strips the interpolation noise along
    // with the energy the noise displaced from the signal.
    const BoundaryTrace bt = boundary_trace(*next_domain, u_next);
    if ((m + 1) % options.relift_period == 0) {
      alpha = lift(*next_domain, bt.trace);
    } else {
      TangentVector beta;
      beta.mesh = next_domain->mesh_ptr();
      beta.potential = ScalarField{&next_mesh, std::move(u_next)};
      beta.grad = next_domain->solver().gradient(beta.potential);
      beta.div_constant = bt.div_constant;
      alpha = std::move(beta);
    }
    domain = std::move(next_domain);
  }

  for (std::size_t i = 1; i < path.sample_count(); ++i) {
    const double inc = 0.5 *
                       (path.step_diagnostics[i - 1].kinetic_norm +
                        path.step_diagnostics[i].kinetic_norm) *
                       (path.times[i] - path.times[i - 1]);
    path.step_diagnostics[i].length_increment = inc;
    path.length += inc;
  }
  return path;
}

double path_length(const GeodesicPath& p) {
  double length = 0.0;
  for (std::size_t i = 1; i < p.sample_count(); ++i)
    length += 0.5 *
              (p.step_diagnostics[i - 1].kinetic_norm + p.step_diagnostics[i].kinetic_norm) *
              (p.times[i] - p.times[i - 1]);
  return length;
}

// ---------------------------------------------------------------------------
// PathFlow / integrate_flow
// ---------------------------------------------------------------------------

PathFlow::PathFlow(const GeodesicPath& p) : times_(p.times) {
  if (p.sample_count() == 0) throw InvalidArgument("cannot build a flow over an empty path");
  if (p.meshes.size() != p.sample_count() || p.potentials.size() != p.sample_count())
    throw InvalidArgument("path samples are inconsistent");
  samplers_.reserve(p.sample_count());
  for (std::size_t i = 0; i < p.sample_count(); ++i)
    samplers_.emplace_back(p.meshes[i], p.potentials[i].grad,
                           p.potentials[i].div_constant);
}

std::pair<std::size_t, double> PathFlow::bracket(double t) const {
  if (samplers_.size() == 1 || t <= times_.front()) return {0, 0.0};
  if (t >= times_.back()) return {samplers_.size() - 2, 1.0};
  const auto it = std::upper_bound(times_.begin(), times_.end(), t);
  const std::size_t i = static_cast<std::size_t>(it - times_.begin()) - 1;
  return {i, (t - times_[i]) / (times_[i + 1] - times_[i])};
}

Vec2 PathFlow::velocity(double t, const Vec2& x) const {
  const auto [i, w] = bracket(t);
  if (w <= kBlendCutoff) return samplers_[i].velocity(x);
  if (w >= 1.0 - kBlendCutoff) return samplers_[i + 1].velocity(x);
  return (1.0 - w) * samplers_[i].velocity(x) + w * samplers_[i + 1].velocity(x);
}

double PathFlow::divergence(double t, const Vec2& x) const {
  const auto [i, w] = bracket(t);
  if (w <= kBlendCutoff) return samplers_[i].divergence(x);
  if (w >= 1.0 - kBlendCutoff) return samplers_[i + 1].divergence(x);
  return (1.0 - w) * samplers_[i].divergence(x) + w * samplers_[i + 1].divergence(x);
}

ParticleSet integrate_flow(const FlowProvider& field, ParticleSet particles, double t0,
                           double t1, double dt) {
  if (!(dt > 0.0)) throw InvalidArgument("advection step must be positive");
  if (!(t1 >= t0)) throw InvalidArgument("advection horizon precedes its start");
  if (particles.positions.size() != particles.log_detJ.size())
    throw InvalidArgument("particle set has inconsistent field lengths");

  if (particles.record_history && particles.history.empty())
    particles.history.push_back(particles.positions);
  if (t1 == t0) return particles;

  const auto n = std::max<long long>(1, std::llround((t1 - t0) / dt));
  const double step = (t1 - t0) / static_cast<double>(n);

  for (long long k = 0; k < n; ++k) {
    const double t = t0 + static_cast<double>(k) * step;
    const double th = t + 0.5 * step;
    const double tn = t0 + static_cast<double>(k + 1) * step;
    for (std::size_t p = 0; p < particles.positions.size(); ++p) {
      const Vec2 x = particles.positions[p];
      const Vec2 k1 = field.velocity(t, x);
      const double d1 = field.divergence(t, x);
      const Vec2 x2 = x + (0.5 * step) * k1;
      const Vec2 k2 = field.velocity(th, x2);
      const double d2 = field.divergence(th, x2);
      const Vec2 x3 = x + (0.5 * step) * k2;
      const Vec2 k3 = field.velocity(th, x3);
      const double d3 = field.divergence(th, x3);
      const Vec2 x4 = x + step * k3;
      const Vec2 k4 = field.velocity(tn, x4);
      const double d4 = field.divergence(tn, x4);
      particles.positions[p] = x + (step / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
      particles.log_detJ[p] += (step / 6.0) * (d1 + 2.0 * d2 + 2.0 * d3 + d4);
    }
    if (particles.record_history) particles.history.push_back(particles.positions);
  }
  return particles;
}

// ---------------------------------------------------------------------------
// Polynomials and continuity verification
// ---------------------------------------------------------------------------

double poly_eval(const Polynomial2& p, const Vec2& x) {
  double sum = 0.0;
  for (const PolyTerm& t : p)
    sum += t.coeff * std::pow(x.x, t.px) * std::pow(x.y, t.py);
  return sum;
}

Vec2 poly_grad(const Polynomial2& p, const Vec2& x) {
  Vec2 g{0.0, 0.0};
  for (const PolyTerm& t : p) {
    if (t.px > 0)
      g.x += t.coeff * t.px * std::pow(x.x, t.px - 1) * std::pow(x.y, t.py);
    if (t.py > 0)
      g.y += t.coeff * t.py * std::pow(x.x, t.px) * std::pow(x.y, t.py - 1);
  }
  return g;
}

std::vector<NamedPolynomial> monomial_basis(int max_degree) {
  if (max_degree < 0) throw InvalidArgument("polynomial degree must be non-negative");
  std::vector<NamedPolynomial> out;
  for (int deg = 0; deg <= max_degree; ++deg) {
    for (int px = deg; px >= 0; --px) {
      const int py = deg - px;
      std::string name;
      if (deg == 0) {
        name = "1";
      } else {
        if (px == 1) name += "x";
        if (px > 1) name += "x^" + std::to_string(px);
        if (px > 0 && py > 0) name += "*";
        if (py == 1) name += "y";
        if (py > 1) name += "y^" + std::to_string(py);
      }
      out.push_back({std::move(name), {PolyTerm{1.0, px, py}}});
    }
  }
  return out;
}

ContinuityReport verify_continuity(const GeodesicPath& p,
                                   const std::vector<NamedPolynomial>& test_functions) {
  if (p.sample_count() < 3)
    throw InvalidArgument("continuity verification needs at least 3 path samples");
  if (test_functions.empty()) throw InvalidArgument("no test functions given");

  const std::size_t n = p.sample_count();
  const std::size_t nf = test_functions.size();

  // Measure integrals of every test function at every time.
  std::vector<std::vector<double>> moment(nf, std::vector<double>(n));
  std::vector<double> areas(n);
  for (std::size_t i = 0; i < n; ++i) {
    areas[i] = area(p.contours[i]);
    for (std::size_t f = 0; f < nf; ++f) {
      const Polynomial2& poly = test_functions[f].poly;
      moment[f][i] =
          integrate(*p.meshes[i], [&](Vec2 x) { return poly_eval(poly, x); }) / areas[i];
    }
  }

  ContinuityReport report;
  report.names.reserve(nf);
  for (const auto& f : test_functions) report.names.push_back(f.name);
  report.interior_times.assign(p.times.begin() + 1, p.times.end() - 1);
  report.lhs.assign(nf, {});
  report.rhs.assign(nf, {});
  report.residual.assign(nf, {});
  report.signal.assign(nf, 0.0);

  for (std::size_t f = 0; f < nf; ++f) {
    const Polynomial2& poly = test_functions[f].poly;
    for (std::size_t i = 1; i + 1 < n; ++i) {
      const double lhs =
          (moment[f][i + 1] - moment[f][i - 1]) / (p.times[i + 1] - p.times[i - 1]);

      // grad(phi) . alpha integrated against the measure; the edge-midpoint
      // rule is exact for the quadratic gradients of cubic test functions.
      const TriMesh& m = *p.meshes[i];
      const VectorField& alpha = p.potentials[i].grad;
      double rhs = 0.0;
      for (std::size_t t = 0; t < m.triangle_count(); ++t) {
        const auto& tri = m.triangles[t];
        const Vec2& a = m.vertices[tri[0]];
        const Vec2& b = m.vertices[tri[1]];
        const Vec2& c = m.vertices[tri[2]];
        const Vec2 g = alpha.gradients[t];
        const double contrib = dot(poly_grad(poly, 0.5 * (a + b)), g) +
                               dot(poly_grad(poly, 0.5 * (b + c)), g) +
                               dot(poly_grad(poly, 0.5 * (c + a)), g);
        rhs += triangle_area(m, t) / 3.0 * contrib;
      }
      rhs /= areas[i];

      report.lhs[f].push_back(lhs);
      report.rhs[f].push_back(rhs);
      report.residual[f].push_back(std::fabs(lhs - rhs));
      report.signal[f] = std::max(report.signal[f], std::fabs(lhs));
    }
  }
  return report;
}

ContinuityReport verify_continuity(const GeodesicPath& p) {
  return verify_continuity(p, monomial_basis(3));
}

double ContinuityReport::max_relative_residual(double signal_floor) const {
  double worst = 0.0;
  for (std::size_t f = 0; f < residual.size(); ++f) {
    const double denom = std::max(signal[f], signal_floor);
    for (const double r : residual[f]) worst = std::max(worst, r / denom);
  }
  return worst;
}

// ---------------------------------------------------------------------------
// Density uniformity
// ---------------------------------------------------------------------------

UniformityReport density_uniformity(const GeodesicPath& p, std::size_t target_particles) {
  if (p.sample_count() < 2)
    throw InvalidArgument("density audit needs a path with at least 2 samples");
  if (target_particles == 0) throw InvalidArgument("density audit needs at least 1 particle");

  const TriMesh& m0 = *p.meshes.front();
  std::vector<Vec2> seeds;
  const std::size_t interior = m0.vertex_count() - m0.boundary_count;
  if (interior == 0) throw InvalidArgument("initial mesh has no interior vertices to seed");
  const std::size_t count = std::min(target_particles, interior);
  const double stride = static_cast<double>(interior) / static_cast<double>(count);
  seeds.reserve(count);
  for (std::size_t k = 0; k < count; ++k) {
    const std::size_t pick = std::min(
        interior - 1, static_cast<std::size_t>(static_cast<double>(k) * stride));
    seeds.push_back(m0.vertices[m0.boundary_count + pick]);
  }

  ParticleSet particles = ParticleSet::seed(std::move(seeds), /*record_history=*/true);
  const PathFlow flow(p);

  UniformityReport report;
  report.particle_count = particles.size();
  report.times = p.times;

  const auto push_stats = [&](const ParticleSet& ps) {
    double mean = 0.0;
    for (const double v : ps.log_detJ) mean += v;
    mean /= static_cast<double>(ps.size());
    double var = 0.0;
    for (const double v : ps.log_detJ) var += (v - mean) * (v - mean);
    var /= static_cast<double>(ps.size());
    report.mean_log_detJ.push_back(mean);
    report.std_log_detJ.push_back(std::sqrt(var));
  };

  push_stats(particles);
  for (std::size_t i = 1; i < p.sample_count(); ++i) {
    const double seg = p.times[i] - p.times[i - 1];
    particles = integrate_flow(flow, std::move(particles), p.times[i - 1], p.times[i], seg);
    push_stats(particles);
  }

  report.trajectories = particles.history;

  for (std::size_t q = 0; q < report.particle_count; ++q) {
    const Vec2 a = report.trajectories.front()[q];
    const Vec2 b = report.trajectories.back()[q];
    for (const auto& snapshot : report.trajectories) {
      double s = 0.0;
      report.max_chord_deviation =
          std::max(report.max_chord_deviation, point_segment_distance(snapshot[q], a, b, s));
    }
  }
  return report;
}

void annotate_diagnostics(GeodesicPath& p, const ContinuityReport* continuity,
                          const UniformityReport* uniformity) {
  if (continuity != nullptr) {
    for (std::size_t row = 0; row < continuity->interior_times.size(); ++row) {
      double worst = 0.0;
      for (std::size_t f = 0; f < continuity->residual.size(); ++f)
        worst = std::max(worst, continuity->residual[f][row] /
                                    std::max(continuity->signal[f], 1e-3));
      if (row + 1 < p.step_diagnostics.size())
        p.step_diagnostics[row + 1].continuity_residual = worst;
    }
  }
  if (uniformity != nullptr) {
    const std::size_t n = std::min(uniformity->std_log_detJ.size(), p.step_diagnostics.size());
    for (std::size_t i = 0; i < n; ++i)
      p.step_diagnostics[i].uniformity_std = uniformity->std_log_detJ[i];
  }
}

// ---------------------------------------------------------------------------
// Hessian diagnostics
// ---------------------------------------------------------------------------

HessianStats hessian_stats(const TangentVector& alpha) {
  if (alpha.grad.mesh == nullptr)
    throw InvalidArgument("tangent field carries no mesh");
  const TriMesh& m = *alpha.grad.mesh;
  if (alpha.grad.gradients.size() != m.triangle_count())
    throw InvalidArgument("tangent field length does not match its mesh");

  const std::vector<Vec2> vertex_velocity = recover_vertex_vectors_affine(m, alpha.grad);

  // Per-triangle velocity gradient of the recovered piecewise-linear field.
  std::vector<std::array<double, 4>> grad_tri(m.triangle_count());
  for (std::size_t t = 0; t < m.triangle_count(); ++t) {
    const auto& tri = m.triangles[t];
    const auto hats =
        hat_gradients(m.vertices[tri[0]], m.vertices[tri[1]], m.vertices[tri[2]]);
    std::array<double, 4> g{0.0, 0.0, 0.0, 0.0};  // row-major 2x2
    for (int k = 0; k < 3; ++k) {
      const Vec2 v = vertex_velocity[tri[k]];
      g[0] += v.x * hats[k].x;
      g[1] += v.x * hats[k].y;
      g[2] += v.y * hats[k].x;
      g[3] += v.y * hats[k].y;
    }
    grad_tri[t] = g;
  }

  const auto fans = vertex_fans(m);
  const auto fan_touches_boundary = [&](std::uint32_t v) {
    for (std::uint32_t t : fans[v])
      for (std::uint32_t w : m.triangles[t])
        if (m.is_boundary_vertex(w)) return true;
    return false;
  };

  // Frobenius norm of the fan-averaged Hessian, over vertices whose stencil
  // is fully interior; fall back to all interior vertices on tiny meshes.
  const auto collect = [&](bool deep_only) {
    std::vector<double> values;
    for (std::uint32_t v = 0; v < m.vertex_count(); ++v) {
      if (m.is_boundary_vertex(v) || fans[v].empty()) continue;
      if (deep_only && fan_touches_boundary(v)) continue;
      std::array<double, 4> h{0.0, 0.0, 0.0, 0.0};
      double area_sum = 0.0;
      for (std::uint32_t t : fans[v]) {
        const double w = triangle_area(m, t);
        for (int k = 0; k < 4; ++k) h[k] += w * grad_tri[t][k];
        area_sum += w;
      }
      double frob = 0.0;
      for (int k = 0; k < 4; ++k) {
        const double e = h[k] / area_sum;
        frob += e * e;
      }
      values.push_back(std::sqrt(frob));
    }
    return values;
  };

  std::vector<double> values = collect(/*deep_only=*/true);
  if (values.empty()) values = collect(/*deep_only=*/false);

  HessianStats stats;
  stats.vertex_count = values.size();
  if (values.empty()) return stats;
  for (const double v : values) stats.mean += v;
  stats.mean /= static_cast<double>(values.size());
  double var = 0.0;
  for (const double v : values) var += (v - stats.mean) * (v - stats.mean);
  stats.deviation = std::sqrt(var / static_cast<double>(values.size()));
  return stats;
}

double hessian_departure(const TangentVector& alpha) { return hessian_stats(alpha).deviation; }

}  // namespace shapeflow
