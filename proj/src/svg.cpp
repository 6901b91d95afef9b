#include "shapeflow/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include "shapeflow/errors.hpp"

namespace shapeflow {

namespace {

// Two decimals is sub-pixel on any sane canvas and keeps files small and
// byte-stable.
std::string px(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

std::string rgb(int r, int g, int b) {
  char buf[8];
  std::snprintf(buf, sizeof(buf), "#%02x%02x%02x", r, g, b);
  return buf;
}

int lerp_channel(int a, int b, double t) {
  return static_cast<int>(std::lround(a + (b - a) * t));
}

// Diverging map for t in [-1, 1]: cool blue through near-white to warm red.
std::string diverging_color(double t) {
  t = std::clamp(t, -1.0, 1.0);
  const int mid[3] = {221, 221, 221};
  if (t < 0.0) {
    const int cold[3] = {59, 76, 192};
    const double s = -t;
    return rgb(lerp_channel(mid[0], cold[0], s), lerp_channel(mid[1], cold[1], s),
               lerp_channel(mid[2], cold[2], s));
  }
  const int warm[3] = {180, 4, 38};
  return rgb(lerp_channel(mid[0], warm[0], t), lerp_channel(mid[1], warm[1], t),
             lerp_channel(mid[2], warm[2], t));
}

// Grey ramp for snapshot age in [0, 1]: light to near-black.
std::string age_color(double t) {
  t = std::clamp(t, 0.0, 1.0);
  const int v = lerp_channel(200, 17, t);
  return rgb(v, v, v);
}

struct Box {
  double xmin = std::numeric_limits<double>::infinity();
  double ymin = std::numeric_limits<double>::infinity();
  double xmax = -std::numeric_limits<double>::infinity();
  double ymax = -std::numeric_limits<double>::infinity();

  void add(const Vec2& p) {
    xmin = std::min(xmin, p.x);
    ymin = std::min(ymin, p.y);
    xmax = std::max(xmax, p.x);
    ymax = std::max(ymax, p.y);
  }
  void add(const Contour& c) {
    for (std::size_t i = 0; i < c.size(); ++i) add(c[i]);
  }
};

class Canvas {
 public:
  Canvas(const Box& box, const RenderStyle& style) {
    if (!(box.xmax >= box.xmin)) throw InvalidArgument("nothing to render");
    const int margin = 20;
    const double dx = std::max(box.xmax - box.xmin, 1e-9);
    const double dy = std::max(box.ymax - box.ymin, 1e-9);
    width_ = std::max(style.width_px, 2 * margin + 1);
    scale_ = (width_ - 2.0 * margin) / dx;
    height_ = static_cast<int>(std::lround(dy * scale_)) + 2 * margin;
    ox_ = margin - box.xmin * scale_;
    oy_ = (height_ - margin) + box.ymin * scale_;  // y flips: world up, screen down
  }

  Vec2 map(const Vec2& w) const { return {ox_ + w.x * scale_, oy_ - w.y * scale_}; }
  double scale() const { return scale_; }

  void polyline(const std::vector<Vec2>& world, const std::string& stroke, double width,
                bool closed, const std::string& fill = "none") {
    body_ += closed ? "<polygon points=\"" : "<polyline points=\"";
    for (std::size_t i = 0; i < world.size(); ++i) {
      const Vec2 s = map(world[i]);
      if (i) body_ += ' ';
      body_ += px(s.x);
      body_ += ',';
      body_ += px(s.y);
    }
    body_ += "\" fill=\"" + fill + "\" stroke=\"" + stroke + "\" stroke-width=\"" +
             px(width) + "\"/>\n";
  }

  void filled_triangle(const Vec2& a, const Vec2& b, const Vec2& c,
                       const std::string& fill) {
    const Vec2 sa = map(a), sb = map(b), sc = map(c);
    // Stroking each cell in its own fill closes the hairline seams between
    // adjacent polygons without adding visible lines.
    body_ += "<polygon points=\"" + px(sa.x) + ',' + px(sa.y) + ' ' + px(sb.x) + ',' +
             px(sb.y) + ' ' + px(sc.x) + ',' + px(sc.y) + "\" fill=\"" + fill +
             "\" stroke=\"" + fill + "\" stroke-width=\"0.5\"/>\n";
  }

  void segment(const Vec2& a, const Vec2& b, const std::string& stroke, double width) {
    const Vec2 sa = map(a), sb = map(b);
    body_ += "<line x1=\"" + px(sa.x) + "\" y1=\"" + px(sa.y) + "\" x2=\"" + px(sb.x) +
             "\" y2=\"" + px(sb.y) + "\" stroke=\"" + stroke + "\" stroke-width=\"" +
             px(width) + "\"/>\n";
  }

  // Shaft plus a V head sized from the shaft length, all in world coordinates.
  void arrow(const Vec2& from, const Vec2& to, const std::string& stroke, double width) {
    segment(from, to, stroke, width);
    const Vec2 d = to - from;
    const double len = norm(d);
    if (len <= 0.0) return;
    const Vec2 u = d / len;
    const Vec2 n = rotate_cw(u);
    const double head = 0.3 * len;
    segment(to, to - head * u + 0.5 * head * n, stroke, width);
    segment(to, to - head * u - 0.5 * head * n, stroke, width);
  }

  void dot(const Vec2& center, double radius_px, const std::string& fill) {
    const Vec2 s = map(center);
    body_ += "<circle cx=\"" + px(s.x) + "\" cy=\"" + px(s.y) + "\" r=\"" +
             px(radius_px) + "\" fill=\"" + fill + "\"/>\n";
  }

  std::string finish() const {
    std::string out = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" +
                      std::to_string(width_) + "\" height=\"" + std::to_string(height_) +
                      "\" viewBox=\"0 0 " + std::to_string(width_) + ' ' +
                      std::to_string(height_) + "\">\n";
    out += "<rect width=\"100%\" height=\"100%\" fill=\"#ffffff\"/>\n";
    out += body_;
    out += "</svg>\n";
    return out;
  }

 private:
  int width_ = 0, height_ = 0;
  double scale_ = 1.0, ox_ = 0.0, oy_ = 0.0;
  std::string body_;
};

std::vector<Vec2> contour_points(const Contour& c) { return c.points(); }

}  // namespace

std::string render_contour_svg(const Contour& c, const RenderStyle& style) {
  Box box;
  box.add(c);
  Canvas canvas(box, style);
  canvas.polyline(contour_points(c), "#1f3a5f", style.stroke_width, /*closed=*/true);
  return canvas.finish();
}

std::string render_mesh_svg(const TriMesh& m, const RenderStyle& style) {
  Box box;
  for (const Vec2& v : m.vertices) box.add(v);
  Canvas canvas(box, style);
  for (const auto& tri : m.triangles) {
    for (int k = 0; k < 3; ++k) {
      const std::uint32_t a = tri[k], b = tri[(k + 1) % 3];
      if (a < b)  // each undirected edge once
        canvas.segment(m.vertices[a], m.vertices[b], "#9aa7b5", 0.6);
    }
  }
  std::vector<Vec2> ring(m.vertices.begin(), m.vertices.begin() + m.boundary_count);
  canvas.polyline(ring, "#1f3a5f", style.stroke_width, /*closed=*/true);
  return canvas.finish();
}

std::string render_field_svg(const TriMesh& m, const std::vector<double>& potential,
                             const std::vector<Vec2>& gradients,
                             const RenderStyle& style) {
  if (potential.size() != m.vertex_count())
    throw InvalidArgument("potential length does not match the mesh");
  if (gradients.size() != m.triangle_count())
    throw InvalidArgument("gradient length does not match the mesh");

  Box box;
  for (const Vec2& v : m.vertices) box.add(v);
  Canvas canvas(box, style);

  double umin = std::numeric_limits<double>::infinity();
  double umax = -std::numeric_limits<double>::infinity();
  for (double u : potential) {
    umin = std::min(umin, u);
    umax = std::max(umax, u);
  }
  const double span = std::max(umax - umin, 1e-30);

  for (std::size_t t = 0; t < m.triangle_count(); ++t) {
    const auto& tri = m.triangles[t];
    const double u =
        (potential[tri[0]] + potential[tri[1]] + potential[tri[2]]) / 3.0;
    canvas.filled_triangle(m.vertices[tri[0]], m.vertices[tri[1]], m.vertices[tri[2]],
                           diverging_color(2.0 * (u - umin) / span - 1.0));
  }

  // One arrow per sampled triangle, longest arrow about one mean spacing.
  double total_area = 0.0;
  double gmax = 0.0;
  for (std::size_t t = 0; t < m.triangle_count(); ++t) {
    total_area += triangle_area(m, t);
    gmax = std::max(gmax, norm(gradients[t]));
  }
  const double spacing =
      std::sqrt(2.0 * total_area / static_cast<double>(m.triangle_count()));
  const std::size_t stride = std::max<std::size_t>(1, m.triangle_count() / 400);
  if (gmax > 0.0) {
    for (std::size_t t = 0; t < m.triangle_count(); t += stride) {
      const Vec2 g = gradients[t];
      const double len = norm(g) / gmax * 1.4 * spacing * style.arrow_scale;
      if (len * canvas.scale() < 1.0) continue;  // sub-pixel arrows are noise
      const Vec2 c = triangle_centroid(m, t);
      canvas.arrow(c, c + g * (len / std::max(norm(g), 1e-30)), "#13304f", 0.9);
    }
  }

  std::vector<Vec2> ring(m.vertices.begin(), m.vertices.begin() + m.boundary_count);
  canvas.polyline(ring, "#1f3a5f", style.stroke_width, /*closed=*/true);
  return canvas.finish();
}

std::string render_filmstrip_svg(const std::vector<Contour>& snapshots,
                                 const RenderStyle& style) {
  if (snapshots.empty()) throw InvalidArgument("filmstrip needs at least one contour");
  Box box;
  for (const Contour& c : snapshots) box.add(c);
  Canvas canvas(box, style);
  for (std::size_t i = 0; i < snapshots.size(); ++i) {
    const double age = snapshots.size() > 1
                           ? static_cast<double>(i) / (snapshots.size() - 1.0)
                           : 1.0;
    canvas.polyline(contour_points(snapshots[i]), age_color(age),
                    style.stroke_width * (0.6 + 0.4 * age), /*closed=*/true);
  }
  return canvas.finish();
}

std::string render_trajectories_svg(const Contour& first, const Contour& last,
                                    const std::vector<std::vector<Vec2>>& positions,
                                    const RenderStyle& style) {
  Box box;
  box.add(first);
  box.add(last);
  for (const auto& slice : positions)
    for (const Vec2& p : slice) box.add(p);
  Canvas canvas(box, style);
  canvas.polyline(contour_points(first), "#b9c4d0", style.stroke_width, /*closed=*/true);
  canvas.polyline(contour_points(last), "#1f3a5f", style.stroke_width, /*closed=*/true);

  const std::size_t particles = positions.empty() ? 0 : positions.front().size();
  const std::size_t stride = std::max<std::size_t>(1, particles / 60);
  for (std::size_t j = 0; j < particles; j += stride) {
    std::vector<Vec2> line;
    line.reserve(positions.size());
    for (const auto& slice : positions) {
      if (slice.size() != particles)
        throw InvalidArgument("trajectory slices disagree on particle count");
      line.push_back(slice[j]);
    }
    canvas.polyline(line, "#c0392b", 0.8, /*closed=*/false);
    if (!line.empty()) canvas.dot(line.back(), 1.6, "#c0392b");
  }
  return canvas.finish();
}

}  // namespace shapeflow
