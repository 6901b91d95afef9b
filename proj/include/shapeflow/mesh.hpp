#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "shapeflow/contour.hpp"
#include "shapeflow/geometry.hpp"

namespace shapeflow {

// Triangulation of a contour's interior. Vertices 0..boundary_count-1 are the
// contour samples, bit-exact and in contour order; interior vertices follow in
// deterministic insertion order. Triangles are CCW index triples.
struct TriMesh {
  std::vector<Vec2> vertices;
  std::vector<std::array<std::uint32_t, 3>> triangles;
  // boundary_map[i] = {mesh vertex index, contour sample index}; the identity
  // pairing by construction, kept explicit for consumers.
  std::vector<std::array<std::uint32_t, 2>> boundary_map;
  std::size_t boundary_count = 0;
  double h = 0.0;  // interior size target used to build the mesh

  std::size_t vertex_count() const { return vertices.size(); }
  std::size_t triangle_count() const { return triangles.size(); }
  bool is_boundary_vertex(std::uint32_t v) const { return v < boundary_count; }
};

struct TriangulateOptions {
  // Hard cap on inserted interior points (seed + refinement); quality not
  // reached within budget raises MeshQualityFailure.
  std::size_t max_insertions = 200000;
};

// Constrained Delaunay triangulation of the contour interior with
// deterministic hex seeding and circumcenter refinement to a 20-degree
// minimum angle. Boundary samples are never moved, split, or dropped.
// h is the interior vertex spacing target, at most perimeter/16.
TriMesh triangulate(const Contour& c, double h,
                    const TriangulateOptions& options = {});

struct MeshStatistics {
  std::size_t vertex_count = 0;
  std::size_t triangle_count = 0;
  std::size_t boundary_vertex_count = 0;
  double min_angle_deg = 0.0;
  double max_angle_deg = 0.0;
  double min_edge = 0.0;
  double max_edge = 0.0;
  double mean_edge = 0.0;
  double total_area = 0.0;
  std::vector<std::size_t> edge_histogram;  // 10 bins between min and max edge
};

MeshStatistics mesh_statistics(const TriMesh& m);

// Structural audit: conforming connected triangulation, positive CCW areas,
// intact boundary. Throws DegenerateGeometry on violation.
void validate_mesh(const TriMesh& m);

double triangle_area(const TriMesh& m, std::size_t t);

Vec2 triangle_centroid(const TriMesh& m, std::size_t t);

// Sum of triangle areas; equals the contour's shoelace area by construction.
double mesh_area(const TriMesh& m);

// Quadrature of f over the mesh with a 6-point degree-4 rule per triangle.
double integrate(const TriMesh& m, const std::function<double(Vec2)>& f);

// OFF-format text serialization.
std::string to_off(const TriMesh& m);

}  // namespace shapeflow
