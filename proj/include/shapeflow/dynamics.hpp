#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include "shapeflow/contour.hpp"
#include "shapeflow/mesh.hpp"
#include "shapeflow/tangent.hpp"

namespace shapeflow {

// ---------------------------------------------------------------------------
// Particles
// ---------------------------------------------------------------------------

// A cloud of tracer particles advected through a flow. log_detJ accumulates
// the log Jacobian determinant along each trajectory (zero at seeding), so
// exp(log_detJ) measures local expansion of the flow around the particle.
struct ParticleSet {
  std::vector<Vec2> positions;
  std::vector<double> log_detJ;
  bool record_history = false;
  // Snapshots of positions (first entry = seeding) when record_history is on.
  std::vector<std::vector<Vec2>> history;

  static ParticleSet seed(std::vector<Vec2> points, bool record_history = false);
  std::size_t size() const { return positions.size(); }
};

// ---------------------------------------------------------------------------
// Flow providers: time-dependent velocity fields with divergence
// ---------------------------------------------------------------------------

class FlowProvider {
 public:
  virtual ~FlowProvider();
  virtual Vec2 velocity(double t, const Vec2& x) const = 0;
  virtual double divergence(double t, const Vec2& x) const = 0;
};

// Closed-form field, for tests and calibration.
class AnalyticFlow final : public FlowProvider {
 public:
  using VelocityFn = std::function<Vec2(double, const Vec2&)>;
  using DivergenceFn = std::function<double(double, const Vec2&)>;
  AnalyticFlow(VelocityFn velocity, DivergenceFn divergence);

  Vec2 velocity(double t, const Vec2& x) const override;
  double divergence(double t, const Vec2& x) const override;

 private:
  VelocityFn velocity_;
  DivergenceFn divergence_;
};

// ---------------------------------------------------------------------------
// Spatial lookup and field evaluation on one mesh
// ---------------------------------------------------------------------------

// Uniform-grid point location over a triangulation. Queries inside the mesh
// return the containing triangle with barycentric coordinates; queries
// outside return the nearest triangle, the barycentric coordinates of the
// closest point on it, and the distance to it.
class TriLocator {
 public:
  explicit TriLocator(const TriMesh& mesh);

  struct Hit {
    std::uint32_t triangle = 0;
    double b0 = 0.0, b1 = 0.0, b2 = 0.0;  // barycentric, clamped to the triangle
    double distance = 0.0;                // 0 inside; distance to the mesh outside
  };
  Hit locate(const Vec2& x) const;

 private:
  const TriMesh* mesh_;
  double x0_ = 0.0, y0_ = 0.0;  // grid origin
  double cell_ = 1.0;
  int nx_ = 1, ny_ = 1;
  std::vector<std::vector<std::uint32_t>> cells_;

  int cell_index(int cx, int cy) const { return cy * nx_ + cx; }
};

// Vertex values of a piecewise-constant triangle field by weighted affine
// least squares over each vertex fan (exact for affine fields, unlike plain
// area-weighted averaging). Falls back to the area-weighted mean on fans too
// small or too flat to determine an affine fit.
std::vector<Vec2> recover_vertex_vectors_affine(const TriMesh& m, const VectorField& a);

// Point evaluation of one flow-field time slice: continuous piecewise-linear
// interpolation of affine-recovered vertex velocities, plus the slice's
// constant divergence. Evaluation is tolerant up to distance h outside the
// mesh (nearest-triangle extrapolation); beyond that it throws OutOfDomain.
class FieldSampler {
 public:
  FieldSampler(std::shared_ptr<const TriMesh> mesh, const VectorField& field,
               double div_constant);

  Vec2 velocity(const Vec2& x) const;
  double divergence(const Vec2& x) const;
  // Distance from x to the mesh (0 inside); the escape guard uses this.
  double escape_distance(const Vec2& x) const;
  const TriMesh& mesh() const { return *mesh_; }

 private:
  std::shared_ptr<const TriMesh> mesh_;
  TriLocator locator_;
  std::vector<Vec2> vertex_velocity_;
  double div_constant_;
};

// ---------------------------------------------------------------------------
// Geodesic paths
// ---------------------------------------------------------------------------

enum class GeodesicStatus {
  complete,
  breakdown,  // contour became non-simple; the path holds the progress so far
};

// Diagnostics recorded at each stored time sample.
struct GeodesicStep {
  double time = 0.0;
  double kinetic_norm = 0.0;  // transport norm of the driving field
  double length_increment = 0.0;  // trapezoid contribution since previous sample
  double area = 0.0;
  double density = 0.0;               // uniform density 1/area
  double mass_identity_error = 0.0;   // |area * density - 1|
  double mass_quadrature_error = 0.0; // |mesh quadrature of the density - 1|
  double divergence_constant = 0.0;
  // Filled by annotate_diagnostics once the checks below have run.
  double continuity_residual = std::numeric_limits<double>::quiet_NaN();
  double uniformity_std = std::numeric_limits<double>::quiet_NaN();
};

struct GeodesicPath {
  std::vector<double> times;  // strictly increasing, starts at 0
  std::vector<Contour> contours;
  std::vector<std::shared_ptr<const TriMesh>> meshes;
  std::vector<TangentVector> potentials;  // driving field at each time, on meshes[i]
  // Flux-consistent boundary trace of the driving field per sample; lifting
  // boundary_speeds[i] on contours[i] reproduces potentials[i] to roundoff.
  std::vector<BoundaryScalarField> boundary_speeds;
  std::vector<GeodesicStep> step_diagnostics;
  double length = 0.0;
  GeodesicStatus status = GeodesicStatus::complete;
  std::string breakdown_reason;  // empty when complete

  std::size_t sample_count() const { return times.size(); }
};

struct ShootOptions {
  // Refresh the potential from its own boundary trace every k-th step,
  // re-imposing the constant-divergence constraint exactly. The trace
  // recovery is the exact adjoint of the lifting solve, so re-anchoring a
  // clean field is drift-free; a small period still re-anchors often enough
  // to pin the constraint without baking the per-step transfer noise into
  // the boundary data.
  int relift_period = 5;
};

// Forward integration of the projected geodesic equation from an initial
// contour and boundary speed field. Per step: lift/project the current
// potential, move every mesh vertex by dt times the recovered velocity,
// resample + re-triangulate the moved boundary, and transfer the materially
// updated potential to the new mesh. A self-intersecting contour ends the
// path early with GeodesicStatus::breakdown; mesh quality failures propagate.
GeodesicPath shoot_geodesic(const Contour& c0, const BoundaryScalarField& a0,
                            double T, int steps, double h,
                            const ShootOptions& options = {});

// Kinetic path length: trapezoidal integral of the per-sample transport norms.
double path_length(const GeodesicPath& p);

// Time interpolation of a path's flow fields: velocities and divergence are
// interpolated linearly between the two bracketing time slices.
class PathFlow final : public FlowProvider {
 public:
  explicit PathFlow(const GeodesicPath& p);

  Vec2 velocity(double t, const Vec2& x) const override;
  double divergence(double t, const Vec2& x) const override;

 private:
  std::vector<double> times_;
  std::vector<FieldSampler> samplers_;

  // Bracket t: slice index i and weight w of slice i+1.
  std::pair<std::size_t, double> bracket(double t) const;
};

// Classical RK4 advection of particles through the flow, integrating the log
// Jacobian determinant alongside (d/dt log detJ = divergence along the
// trajectory). dt is adjusted to divide t1 - t0 into whole steps. Throws
// OutOfDomain if a particle leaves the evaluation domain beyond tolerance.
ParticleSet integrate_flow(const FlowProvider& field, ParticleSet particles,
                           double t0, double t1, double dt);

// ---------------------------------------------------------------------------
// Path verification
// ---------------------------------------------------------------------------

// Sparse bivariate polynomial: sum of coeff * x^px * y^py.
struct PolyTerm {
  double coeff = 0.0;
  int px = 0;
  int py = 0;
};
using Polynomial2 = std::vector<PolyTerm>;

double poly_eval(const Polynomial2& p, const Vec2& x);
Vec2 poly_grad(const Polynomial2& p, const Vec2& x);

struct NamedPolynomial {
  std::string name;
  Polynomial2 poly;
};

// All monomials x^i y^j with 0 <= i + j <= max_degree, graded order.
std::vector<NamedPolynomial> monomial_basis(int max_degree);

// Per test function and interior time: the two sides of the weak continuity
// equation along the path. The left side is the centered time difference of
// the mesh quadrature of the function against the measure; the right side is
// the quadrature of grad(phi) . alpha against the measure.
struct ContinuityReport {
  std::vector<std::string> names;
  std::vector<double> interior_times;            // path times 1 .. n-2
  std::vector<std::vector<double>> lhs;          // [function][interior time]
  std::vector<std::vector<double>> rhs;
  std::vector<std::vector<double>> residual;     // |lhs - rhs|
  std::vector<double> signal;                    // per function: max |lhs|

  // Largest residual relative to each function's signal amplitude, with the
  // amplitude floored to keep identically-zero signals meaningful.
  double max_relative_residual(double signal_floor) const;
};

ContinuityReport verify_continuity(const GeodesicPath& p,
                                   const std::vector<NamedPolynomial>& test_functions);
// Default battery: monomials up to degree 3.
ContinuityReport verify_continuity(const GeodesicPath& p);

// Density-uniformity audit: seed particles at the interior vertices of the
// initial mesh (deterministically subsampled to at most target_particles),
// advect them through the path's flow, and report the spread of log detJ
// across particles at every stored time. Zero spread means the flow kept the
// density perfectly uniform.
struct UniformityReport {
  std::vector<double> times;
  std::vector<double> mean_log_detJ;
  std::vector<double> std_log_detJ;
  std::vector<std::vector<Vec2>> trajectories;  // [time][particle]
  double max_chord_deviation = 0.0;  // max distance from straight start-to-end chords
  std::size_t particle_count = 0;
};

UniformityReport density_uniformity(const GeodesicPath& p, std::size_t target_particles);

// Copy continuity / uniformity results into the per-step diagnostic slots.
// Either pointer may be null to leave its slots untouched. The stored
// continuity number is the max over test functions of the residual relative
// to that function's signal amplitude (floored at 1e-3).
void annotate_diagnostics(GeodesicPath& p, const ContinuityReport* continuity,
                          const UniformityReport* uniformity);

// ---------------------------------------------------------------------------
// Curvature diagnostics
// ---------------------------------------------------------------------------

// Recovered-Hessian statistics of a tangent field over deep-interior vertices
// (vertices whose whole fan stays away from the boundary). The deviation is
// the spatial standard deviation of the Hessian Frobenius norm: zero means
// particles under this field travel on straight lines.
struct HessianStats {
  double mean = 0.0;
  double deviation = 0.0;
  std::size_t vertex_count = 0;
};

HessianStats hessian_stats(const TangentVector& alpha);
double hessian_departure(const TangentVector& alpha);

}  // namespace shapeflow
