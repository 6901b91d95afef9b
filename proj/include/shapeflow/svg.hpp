#pragma once

#include <string>
#include <vector>

#include "shapeflow/contour.hpp"
#include "shapeflow/geometry.hpp"
#include "shapeflow/mesh.hpp"

namespace shapeflow {

// Shared knobs for the SVG emitters. Every emitter is a pure function of its
// inputs: same data and style, same bytes out. Output documents are
// self-contained (inline styles only, no external references) and use a
// y-up world mapped onto the y-down screen.
struct RenderStyle {
  int width_px = 640;         // total document width; height follows the data
  double stroke_width = 1.5;  // contour stroke, in pixels
  double arrow_scale = 1.0;   // multiplies the automatic arrow length
};

// Closed contour outline.
std::string render_contour_svg(const Contour& c, const RenderStyle& style = {});

// Triangulation wireframe with the boundary ring emphasized.
std::string render_mesh_svg(const TriMesh& m, const RenderStyle& style = {});

// Field figure: triangles shaded by the potential (diverging blue-white-red
// over its range), one arrow per sampled triangle for the gradient, and the
// boundary ring outlined. `potential` is per-vertex, `gradients` per-triangle.
std::string render_field_svg(const TriMesh& m, const std::vector<double>& potential,
                             const std::vector<Vec2>& gradients,
                             const RenderStyle& style = {});

// Overlaid snapshots of a moving contour, shaded light (early) to dark
// (late). Draws every given contour; subsample before calling for sparser
// strips.
std::string render_filmstrip_svg(const std::vector<Contour>& snapshots,
                                 const RenderStyle& style = {});

// Particle trajectories (one polyline per particle, indexed
// positions[time][particle]) over the first and last contour.
std::string render_trajectories_svg(const Contour& first, const Contour& last,
                                    const std::vector<std::vector<Vec2>>& positions,
                                    const RenderStyle& style = {});

}  // namespace shapeflow
