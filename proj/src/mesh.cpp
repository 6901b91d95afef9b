#include "shapeflow/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <deque>
#include <limits>
#include <map>
#include <sstream>
#include <vector>

#include "shapeflow/errors.hpp"

namespace shapeflow {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kMinAngleDeg = 20.0;

double rad_to_deg(double r) { return r * 180.0 / kPi; }

double corner_angle(const Vec2& apex, const Vec2& p, const Vec2& q) {
  const Vec2 u = p - apex;
  const Vec2 v = q - apex;
  return std::atan2(std::fabs(cross(u, v)), dot(u, v));
}

double min_angle_deg(const Vec2& a, const Vec2& b, const Vec2& c) {
  const double aa = corner_angle(a, b, c);
  const double ab = corner_angle(b, c, a);
  const double ac = corner_angle(c, a, b);
  return rad_to_deg(std::min({aa, ab, ac}));
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

double hash01(std::uint64_t k) {
  return static_cast<double>(splitmix64(k) >> 11) * (1.0 / 9007199254740992.0);
}

// Incremental constrained Delaunay triangulation with deterministic hex
// seeding and circumcenter refinement. Vertex layout during construction:
// [0, n) contour samples, [n, n+4) super-rectangle corners, interior after.
class Builder {
 public:
  Builder(const Contour& c, double h, const TriangulateOptions& opt)
      : contour_(c), h_(h), opt_(opt), n_(c.size()) {
    pts_.assign(c.points().begin(), c.points().end());
    vert2tri_.assign(n_, -1);
    boundary_lengths_.resize(n_);
    double perim = 0.0;
    for (std::size_t i = 0; i < n_; ++i) {
      boundary_lengths_[i] = dist(pts_[i], pts_[(i + 1) % n_]);
      perim += boundary_lengths_[i];
    }
    hb_mean_ = perim / static_cast<double>(n_);
  }

  TriMesh run() {
    init_super_rect();
    for (std::uint32_t i = 0; i < n_; ++i) bw_insert(i);
    for (std::uint32_t i = 0; i < n_; ++i)
      recover_edge(i, static_cast<std::uint32_t>((i + 1) % n_));
    constraints_active_ = true;
    classify_interior();
    seed_interior();
    refine();
    return extract();
  }

 private:
  struct Tri {
    std::uint32_t v[3];
    std::int32_t nbr[3];  // neighbor across edge opposite v[k], -1 on hull
    bool alive = true;
    bool inside = false;
  };

  // ---- basic predicates -------------------------------------------------

  bool is_constrained(std::uint32_t a, std::uint32_t b) const {
    if (a >= n_ || b >= n_) return false;
    return (a + 1) % n_ == b || (b + 1) % n_ == a;
  }

  bool is_super(std::uint32_t v) const { return v >= n_ && v < n_ + 4; }

  double incircle_p(int t, const Vec2& p) const {
    const Tri& tr = tris_[t];
    return incircle(pts_[tr.v[0]], pts_[tr.v[1]], pts_[tr.v[2]], p);
  }

  int vertex_index_in(int t, std::uint32_t v) const {
    for (int k = 0; k < 3; ++k)
      if (tris_[t].v[k] == v) return k;
    return -1;
  }

  int neighbor_index_in(int t, int other) const {
    for (int k = 0; k < 3; ++k)
      if (tris_[t].nbr[k] == other) return k;
    return -1;
  }

  // ---- construction -----------------------------------------------------

  void init_super_rect() {
    double xmin = pts_[0].x, xmax = pts_[0].x, ymin = pts_[0].y, ymax = pts_[0].y;
    for (const Vec2& p : pts_) {
      xmin = std::min(xmin, p.x);
      xmax = std::max(xmax, p.x);
      ymin = std::min(ymin, p.y);
      ymax = std::max(ymax, p.y);
    }
    const double cx = 0.5 * (xmin + xmax);
    const double cy = 0.5 * (ymin + ymax);
    const double r = 10.0 * std::max({xmax - xmin, ymax - ymin, 1e-12});
    const std::uint32_t s0 = add_point({cx - r, cy - r});
    const std::uint32_t s1 = add_point({cx + r, cy - r});
    const std::uint32_t s2 = add_point({cx + r, cy + r});
    const std::uint32_t s3 = add_point({cx - r, cy + r});
    const int t0 = add_tri(s0, s1, s2);
    const int t1 = add_tri(s0, s2, s3);
    tris_[t0].nbr[1] = t1;  // edge (s2, s0)
    tris_[t1].nbr[2] = t0;  // edge (s0, s2)
    last_ = t0;
  }

  std::uint32_t add_point(const Vec2& p) {
    pts_.push_back(p);
    vert2tri_.push_back(-1);
    return static_cast<std::uint32_t>(pts_.size() - 1);
  }

  int add_tri(std::uint32_t a, std::uint32_t b, std::uint32_t c) {
    Tri t;
    t.v[0] = a;
    t.v[1] = b;
    t.v[2] = c;
    t.nbr[0] = t.nbr[1] = t.nbr[2] = -1;
    t.alive = true;
    t.inside = interior_default_;
    tris_.push_back(t);
    mark_.push_back(0);
    const int id = static_cast<int>(tris_.size() - 1);
    vert2tri_[a] = vert2tri_[b] = vert2tri_[c] = id;
    return id;
  }

  void kill_tri(int t) { tris_[t].alive = false; }

  // Straight walk toward p. Returns containing triangle, or -1 when
  // stop_at_constraints is set and the walk would cross the boundary.
  int locate(const Vec2& p, int hint, bool stop_at_constraints) const {
    int t = (hint >= 0 && tris_[t_clamp(hint)].alive) ? t_clamp(hint) : first_alive();
    const std::size_t guard = 8 * tris_.size() + 64;
    for (std::size_t step = 0; step < guard; ++step) {
      const Tri& tr = tris_[t];
      int exit_k = -1;
      for (int k = 0; k < 3; ++k) {
        const Vec2& a = pts_[tr.v[(k + 1) % 3]];
        const Vec2& b = pts_[tr.v[(k + 2) % 3]];
        if (orient2d(a, b, p) < 0.0) {
          exit_k = k;
          break;
        }
      }
      if (exit_k < 0) return t;
      if (stop_at_constraints &&
          is_constrained(tr.v[(exit_k + 1) % 3], tr.v[(exit_k + 2) % 3]))
        return -1;
      const int next = tr.nbr[exit_k];
      if (next < 0)
        throw DegenerateGeometry("point location left the triangulation hull");
      t = next;
    }
    throw DegenerateGeometry("point location failed to converge");
  }

  int t_clamp(int t) const {
    return (t >= 0 && t < static_cast<int>(tris_.size())) ? t : first_alive();
  }

  int first_alive() const {
    for (int i = static_cast<int>(tris_.size()) - 1; i >= 0; --i)
      if (tris_[i].alive) return i;
    throw DegenerateGeometry("triangulation is empty");
  }

  // Bowyer-Watson insertion of pts_[pid]. Cavity growth never crosses
  // constrained edges once constraints are active.
  void bw_insert(std::uint32_t pid) {
    const Vec2 p = pts_[pid];
    const int t0 = locate(p, last_, false);

    ++epoch_;
    cavity_.clear();
    ring_.clear();
    std::vector<int> stack{t0};
    mark_[t0] = epoch_;
    while (!stack.empty()) {
      const int t = stack.back();
      stack.pop_back();
      cavity_.push_back(t);
      for (int k = 0; k < 3; ++k) {
        const Tri& tr = tris_[t];
        const std::uint32_t a = tr.v[(k + 1) % 3];
        const std::uint32_t b = tr.v[(k + 2) % 3];
        const int nb = tr.nbr[k];
        const bool blocked = constraints_active_ && is_constrained(a, b);
        if (nb >= 0 && !blocked && mark_[nb] != epoch_ && incircle_p(nb, p) > 0.0) {
          mark_[nb] = epoch_;
          stack.push_back(nb);
        } else if (nb < 0 || blocked || mark_[nb] != epoch_) {
          ring_.push_back({a, b, nb});
        }
      }
    }
    // Ring edges may reference cavity triangles discovered later; filter.
    std::vector<RingEdge> ring;
    ring.reserve(ring_.size());
    for (const RingEdge& e : ring_)
      if (e.outer < 0 || mark_[e.outer] != epoch_) ring.push_back(e);

    // Close the ring into a loop around p.
    std::map<std::uint32_t, std::pair<std::uint32_t, int>> next;
    for (const RingEdge& e : ring) next[e.a] = {e.b, e.outer};
    if (next.size() != ring.size())
      throw DegenerateGeometry("insertion cavity is not a simple ring");

    for (const int t : cavity_) kill_tri(t);

    std::vector<int> fan;
    fan.reserve(ring.size());
    std::uint32_t start = ring.front().a;
    std::uint32_t a = start;
    do {
      const auto it = next.find(a);
      if (it == next.end())
        throw DegenerateGeometry("insertion cavity ring is not closed");
      const auto [b, outer] = it->second;
      if (orient2d(p, pts_[a], pts_[b]) <= 0.0)
        throw DegenerateGeometry("degenerate cavity fan during insertion");
      const int nt = add_tri(pid, a, b);
      tris_[nt].nbr[0] = outer;
      if (outer >= 0) {
        int ko = -1;
        for (int k = 0; k < 3; ++k)
          if (tris_[outer].v[(k + 1) % 3] == b && tris_[outer].v[(k + 2) % 3] == a)
            ko = k;
        if (ko < 0) throw DegenerateGeometry("cavity adjacency mismatch");
        tris_[outer].nbr[ko] = nt;
      }
      fan.push_back(nt);
      a = b;
    } while (a != start);
    if (fan.size() != ring.size())
      throw DegenerateGeometry("insertion cavity ring did not close");
    const std::size_t m = fan.size();
    for (std::size_t i = 0; i < m; ++i) {
      // fan[i] = (p, a_i, b_i) with b_i = a_{i+1}: edge (b,p) faces fan[i+1],
      // edge (p,a) faces fan[i-1].
      tris_[fan[i]].nbr[1] = fan[(i + 1) % m];
      tris_[fan[i]].nbr[2] = fan[(i + m - 1) % m];
    }
    last_ = fan.front();
  }

  struct RingEdge {
    std::uint32_t a, b;
    int outer;
  };

  // ---- constrained edge recovery -----------------------------------------

  bool edge_exists(std::uint32_t u, std::uint32_t v) const {
    int t = vert2tri_[u];
    if (t < 0) return false;
    // Rotate around u in one direction, then the other if a hull gap appears.
    const int start = t;
    for (int dir = 0; dir < 2; ++dir) {
      t = start;
      int guard = 0;
      while (t >= 0 && guard++ < 1024) {
        const int k = vertex_index_in(t, u);
        if (k < 0) break;
        if (tris_[t].v[(k + 1) % 3] == v || tris_[t].v[(k + 2) % 3] == v) return true;
        t = tris_[t].nbr[dir == 0 ? (k + 1) % 3 : (k + 2) % 3];
        if (t == start) break;
      }
    }
    return false;
  }

  bool flippable(int t1, int k1) const {
    const Tri& a = tris_[t1];
    const int t2 = a.nbr[k1];
    if (t2 < 0) return false;
    const std::uint32_t c1 = a.v[k1];
    const std::uint32_t p = a.v[(k1 + 1) % 3];
    const std::uint32_t q = a.v[(k1 + 2) % 3];
    const int k2 = neighbor_index_in(t2, t1);
    const std::uint32_t d = tris_[t2].v[k2];
    return orient2d(pts_[c1], pts_[p], pts_[d]) > 0.0 &&
           orient2d(pts_[d], pts_[q], pts_[c1]) > 0.0;
  }

  // Flip the edge opposite vertex k1 of t1. Returns the new shared edge.
  std::pair<std::uint32_t, std::uint32_t> flip(int t1, int k1) {
    const int t2 = tris_[t1].nbr[k1];
    const int k2 = neighbor_index_in(t2, t1);
    const std::uint32_t c1 = tris_[t1].v[k1];
    const std::uint32_t p = tris_[t1].v[(k1 + 1) % 3];
    const std::uint32_t q = tris_[t1].v[(k1 + 2) % 3];
    const std::uint32_t d = tris_[t2].v[k2];

    const int na = tris_[t1].nbr[(k1 + 1) % 3];  // across (q, c1)
    const int nb = tris_[t1].nbr[(k1 + 2) % 3];  // across (c1, p)
    const int nc = tris_[t2].nbr[(k2 + 1) % 3];  // across (p, d)
    const int nd = tris_[t2].nbr[(k2 + 2) % 3];  // across (d, q)

    // t1 := (c1, p, d), t2 := (c1, d, q)
    tris_[t1].v[0] = c1;
    tris_[t1].v[1] = p;
    tris_[t1].v[2] = d;
    tris_[t1].nbr[0] = nc;
    tris_[t1].nbr[1] = t2;
    tris_[t1].nbr[2] = nb;
    tris_[t2].v[0] = c1;
    tris_[t2].v[1] = d;
    tris_[t2].v[2] = q;
    tris_[t2].nbr[0] = nd;
    tris_[t2].nbr[1] = na;
    tris_[t2].nbr[2] = t1;

    auto relink = [&](int n, int old_t, int new_t) {
      if (n < 0) return;
      const int k = neighbor_index_in(n, old_t);
      if (k >= 0) tris_[n].nbr[k] = new_t;
    };
    relink(nc, t2, t1);
    relink(na, t1, t2);

    vert2tri_[c1] = t1;
    vert2tri_[p] = t1;
    vert2tri_[d] = t1;
    vert2tri_[q] = t2;
    return {c1, d};
  }

  bool crosses(std::uint32_t a, std::uint32_t b, std::uint32_t u, std::uint32_t v) const {
    if (a == u || a == v || b == u || b == v) return false;
    return segments_intersect(pts_[a], pts_[b], pts_[u], pts_[v]);
  }

  // Locate the (t, k) representation of undirected edge (a, b), if alive.
  std::pair<int, int> find_edge(std::uint32_t a, std::uint32_t b) const {
    int t = vert2tri_[a];
    const int start = t;
    for (int dir = 0; dir < 2; ++dir) {
      t = start;
      int guard = 0;
      while (t >= 0 && guard++ < 1024) {
        const int k = vertex_index_in(t, a);
        if (k < 0) break;
        if (tris_[t].v[(k + 1) % 3] == b) return {t, (k + 2) % 3};
        if (tris_[t].v[(k + 2) % 3] == b) return {t, (k + 1) % 3};
        t = tris_[t].nbr[dir == 0 ? (k + 1) % 3 : (k + 2) % 3];
        if (t == start) break;
      }
    }
    return {-1, -1};
  }

  void recover_edge(std::uint32_t u, std::uint32_t v) {
    if (edge_exists(u, v)) return;
    std::deque<std::pair<std::uint32_t, std::uint32_t>> pending;
    // Seed with every edge currently crossing segment (u, v): rotate around u
    // to the first crossing triangle, then march the pipe toward v.
    {
      int t = vert2tri_[u];
      int guard = 0;
      std::uint32_t a = 0, b = 0;
      bool found = false;
      while (guard++ < 4096) {
        const int k = vertex_index_in(t, u);
        if (k < 0) throw DegenerateGeometry("edge recovery lost its pivot");
        a = tris_[t].v[(k + 1) % 3];
        b = tris_[t].v[(k + 2) % 3];
        if (crosses(a, b, u, v)) {
          found = true;
          break;
        }
        t = tris_[t].nbr[(k + 1) % 3];
        if (t < 0) throw DegenerateGeometry("edge recovery left the hull");
      }
      if (!found) throw DegenerateGeometry("edge recovery failed to start");
      pending.emplace_back(a, b);
      int cur = t;
      while (true) {
        int ke = -1;
        for (int kk = 0; kk < 3; ++kk) {
          const std::uint32_t va = tris_[cur].v[(kk + 1) % 3];
          const std::uint32_t vb = tris_[cur].v[(kk + 2) % 3];
          if ((va == a && vb == b) || (va == b && vb == a)) {
            ke = kk;
            break;
          }
        }
        if (ke < 0) throw DegenerateGeometry("edge recovery pipe broke");
        const int across = tris_[cur].nbr[ke];
        if (across < 0) throw DegenerateGeometry("edge recovery hit the hull");
        const int kw = neighbor_index_in(across, cur);
        const std::uint32_t w = tris_[across].v[kw];
        if (w == v) break;
        if (crosses(a, w, u, v)) {
          pending.emplace_back(a, w);
          b = w;
        } else {
          pending.emplace_back(w, b);
          a = w;
        }
        cur = across;
      }
    }

    std::size_t stall = 0;
    while (!pending.empty()) {
      if (stall++ > 100000)
        throw DegenerateGeometry("constrained edge recovery stalled");
      auto [a, b] = pending.front();
      pending.pop_front();
      const auto [t, k] = find_edge(a, b);
      if (t < 0) continue;
      if (!crosses(a, b, u, v)) continue;
      if (is_constrained(a, b))
        throw DegenerateGeometry("boundary segments cross each other");
      if (flippable(t, k)) {
        const auto [c, d] = flip(t, k);
        if (crosses(c, d, u, v)) pending.emplace_back(c, d);
        stall = 0;
      } else {
        pending.emplace_back(a, b);
      }
    }
    if (!edge_exists(u, v))
      throw DegenerateGeometry("failed to recover a boundary edge");
  }

  // ---- interior classification -------------------------------------------

  void classify_interior() {
    // Everything reachable from super-vertex triangles without crossing a
    // constrained edge is exterior.
    std::vector<char> exterior(tris_.size(), 0);
    std::vector<int> stack;
    for (std::size_t t = 0; t < tris_.size(); ++t) {
      if (!tris_[t].alive) continue;
      for (int k = 0; k < 3; ++k)
        if (is_super(tris_[t].v[k])) {
          if (!exterior[t]) {
            exterior[t] = 1;
            stack.push_back(static_cast<int>(t));
          }
          break;
        }
    }
    while (!stack.empty()) {
      const int t = stack.back();
      stack.pop_back();
      for (int k = 0; k < 3; ++k) {
        const int nb = tris_[t].nbr[k];
        if (nb < 0 || exterior[nb] || !tris_[nb].alive) continue;
        const std::uint32_t a = tris_[t].v[(k + 1) % 3];
        const std::uint32_t b = tris_[t].v[(k + 2) % 3];
        if (is_constrained(a, b)) continue;
        exterior[nb] = 1;
        stack.push_back(nb);
      }
    }
    for (std::size_t t = 0; t < tris_.size(); ++t)
      tris_[t].inside = tris_[t].alive && !exterior[t];
    interior_default_ = true;  // all subsequent insertions happen inside
  }

  // ---- sizing -------------------------------------------------------------

  // Distance from p to the boundary polyline and the length of the nearest
  // segment.
  std::pair<double, double> boundary_distance(const Vec2& p) const {
    double best = std::numeric_limits<double>::max();
    double len = hb_mean_;
    for (std::size_t i = 0; i < n_; ++i) {
      const double d2 = point_segment_dist2(p, pts_[i], pts_[(i + 1) % n_]);
      if (d2 < best) {
        best = d2;
        len = boundary_lengths_[i];
      }
    }
    return {std::sqrt(best), len};
  }

  double size_target(double boundary_dist) const {
    return std::min(h_, hb_mean_ + 0.15 * boundary_dist);
  }

  bool point_in_contour(const Vec2& p) const {
    bool in = false;
    for (std::size_t i = 0; i < n_; ++i) {
      const Vec2& a = pts_[i];
      const Vec2& b = pts_[(i + 1) % n_];
      if ((a.y > p.y) != (b.y > p.y)) {
        const double xint = a.x + (p.y - a.y) / (b.y - a.y) * (b.x - a.x);
        if (p.x < xint) in = !in;
      }
    }
    return in;
  }

  // ---- seeding & refinement ------------------------------------------------

  void seed_interior() {
    double xmin = pts_[0].x, xmax = pts_[0].x, ymin = pts_[0].y, ymax = pts_[0].y;
    for (std::size_t i = 0; i < n_; ++i) {
      xmin = std::min(xmin, pts_[i].x);
      xmax = std::max(xmax, pts_[i].x);
      ymin = std::min(ymin, pts_[i].y);
      ymax = std::max(ymax, pts_[i].y);
    }
    const double dy = h_ * std::sqrt(3.0) / 2.0;
    const long rows = static_cast<long>((ymax - ymin) / dy) + 1;
    for (long r = 0; r < rows; ++r) {
      const double y0 = ymin + (static_cast<double>(r) + 0.5) * dy;
      if (y0 > ymax) break;
      const double xoff = (r % 2 == 0) ? 0.5 * h_ : h_;
      const long cols = static_cast<long>((xmax - xmin) / h_) + 1;
      for (long c = 0; c < cols; ++c) {
        const double x0 = xmin + xoff + static_cast<double>(c) * h_;
        if (x0 > xmax) break;
        const std::uint64_t key =
            (static_cast<std::uint64_t>(static_cast<std::uint32_t>(r)) << 32) |
            static_cast<std::uint32_t>(c);
        const Vec2 p{x0 + (hash01(2 * key) - 0.5) * 0.08 * h_,
                     y0 + (hash01(2 * key + 1) - 0.5) * 0.08 * h_};
        if (!point_in_contour(p)) continue;
        const auto [d, seg_len] = boundary_distance(p);
        if (d < 0.55 * std::max(h_, seg_len)) continue;
        insert_interior_point(p);
      }
    }
  }

  void insert_interior_point(const Vec2& p) {
    if (++inserted_ > opt_.max_insertions)
      throw MeshQualityFailure("interior point budget exhausted");
    const std::uint32_t id = add_point(p);
    bw_insert(id);
  }

  struct Candidate {
    std::array<std::uint32_t, 3> key;
    int tri;
  };

  bool triangle_bad(int t, Vec2* cc_out) const {
    const Tri& tr = tris_[t];
    const Vec2& a = pts_[tr.v[0]];
    const Vec2& b = pts_[tr.v[1]];
    const Vec2& c = pts_[tr.v[2]];
    if (min_angle_deg(a, b, c) < kMinAngleDeg) {
      *cc_out = circumcenter(a, b, c);
      return true;
    }
    const Vec2 cc = circumcenter(a, b, c);
    const double r = dist(cc, a);
    const auto [d, seg_len] = boundary_distance(cc);
    (void)seg_len;
    if (r > 0.8 * size_target(d)) {
      *cc_out = cc;
      return true;
    }
    return false;
  }

  static Vec2 circumcenter(const Vec2& a, const Vec2& b, const Vec2& c) {
    const double d = 2.0 * orient2d(a, b, c);
    if (std::fabs(d) < 1e-300) return a;
    const double a2 = norm2(a), b2 = norm2(b), c2 = norm2(c);
    return {(a2 * (b.y - c.y) + b2 * (c.y - a.y) + c2 * (a.y - b.y)) / d,
            (a2 * (c.x - b.x) + b2 * (a.x - c.x) + c2 * (b.x - a.x)) / d};
  }

  void refine() {
    for (int round = 0; round < 200; ++round) {
      std::vector<Candidate> bad;
      for (std::size_t t = 0; t < tris_.size(); ++t) {
        if (!tris_[t].alive || !tris_[t].inside) continue;
        Vec2 cc;
        if (triangle_bad(static_cast<int>(t), &cc)) {
          std::array<std::uint32_t, 3> key{tris_[t].v[0], tris_[t].v[1], tris_[t].v[2]};
          std::sort(key.begin(), key.end());
          bad.push_back({key, static_cast<int>(t)});
        }
      }
      if (bad.empty()) return;
      std::sort(bad.begin(), bad.end(),
                [](const Candidate& x, const Candidate& y) { return x.key < y.key; });
      std::size_t inserted = 0;
      for (const Candidate& cand : bad) {
        const int t = cand.tri;
        if (!tris_[t].alive || !tris_[t].inside) continue;
        Vec2 cc;
        if (!triangle_bad(t, &cc)) continue;
        // The circumcenter must be reachable inside the domain.
        const int loc = locate(cc, t, true);
        if (loc < 0 || !tris_[loc].inside) continue;
        const auto [d, seg_len] = boundary_distance(cc);
        if (d < 0.45 * seg_len) continue;  // would crowd a boundary segment
        insert_interior_point(cc);
        ++inserted;
      }
      if (inserted == 0) break;
    }
    // Remaining angle violations are a hard failure; size misses are not.
    for (std::size_t t = 0; t < tris_.size(); ++t) {
      if (!tris_[t].alive || !tris_[t].inside) continue;
      const Tri& tr = tris_[t];
      if (min_angle_deg(pts_[tr.v[0]], pts_[tr.v[1]], pts_[tr.v[2]]) <
          kMinAngleDeg - 1e-9)
        throw MeshQualityFailure(
            "triangle quality target unreachable without refining the boundary");
    }
  }

  // ---- extraction -----------------------------------------------------------

  TriMesh extract() {
    TriMesh out;
    out.h = h_;
    out.boundary_count = n_;
    const std::uint32_t invalid = std::numeric_limits<std::uint32_t>::max();
    std::vector<std::uint32_t> remap(pts_.size(), invalid);
    for (std::uint32_t i = 0; i < n_; ++i) {
      remap[i] = i;
      out.vertices.push_back(pts_[i]);
    }
    for (std::size_t i = n_ + 4; i < pts_.size(); ++i) {
      remap[i] = static_cast<std::uint32_t>(out.vertices.size());
      out.vertices.push_back(pts_[i]);
    }
    for (const Tri& t : tris_) {
      if (!t.alive || !t.inside) continue;
      std::array<std::uint32_t, 3> tv{remap[t.v[0]], remap[t.v[1]], remap[t.v[2]]};
      if (tv[0] == invalid || tv[1] == invalid || tv[2] == invalid)
        throw DegenerateGeometry("interior triangle references a super vertex");
      // Rotate so the smallest index leads, preserving orientation.
      int lead = 0;
      for (int k = 1; k < 3; ++k)
        if (tv[k] < tv[lead]) lead = k;
      std::array<std::uint32_t, 3> rot{tv[lead], tv[(lead + 1) % 3], tv[(lead + 2) % 3]};
      out.triangles.push_back(rot);
    }
    std::sort(out.triangles.begin(), out.triangles.end());
    out.boundary_map.resize(n_);
    for (std::uint32_t i = 0; i < n_; ++i) out.boundary_map[i] = {i, i};
    validate_mesh(out);
    return out;
  }

  const Contour& contour_;
  const double h_;
  const TriangulateOptions opt_;
  const std::size_t n_;
  double hb_mean_ = 0.0;
  std::vector<double> boundary_lengths_;

  std::vector<Vec2> pts_;
  std::vector<Tri> tris_;
  std::vector<int> vert2tri_;
  std::vector<int> mark_;
  std::vector<int> cavity_;
  std::vector<RingEdge> ring_;
  int epoch_ = 0;
  int last_ = -1;
  bool constraints_active_ = false;
  bool interior_default_ = false;
  std::size_t inserted_ = 0;
};

}  // namespace

TriMesh triangulate(const Contour& c, double h, const TriangulateOptions& options) {
  const double perim = perimeter(c);
  if (!(h > 0.0))
    throw InvalidArgument("mesh size must be positive");
  if (h > perim / 16.0)
    throw InvalidArgument("mesh size must not exceed perimeter/16");
  Builder b(c, h, options);
  return b.run();
}

double triangle_area(const TriMesh& m, std::size_t t) {
  const auto& tri = m.triangles[t];
  return 0.5 * orient2d(m.vertices[tri[0]], m.vertices[tri[1]], m.vertices[tri[2]]);
}

Vec2 triangle_centroid(const TriMesh& m, std::size_t t) {
  const auto& tri = m.triangles[t];
  return (m.vertices[tri[0]] + m.vertices[tri[1]] + m.vertices[tri[2]]) / 3.0;
}

double mesh_area(const TriMesh& m) {
  double total = 0.0;
  for (std::size_t t = 0; t < m.triangle_count(); ++t) total += triangle_area(m, t);
  return total;
}

MeshStatistics mesh_statistics(const TriMesh& m) {
  MeshStatistics s;
  s.vertex_count = m.vertex_count();
  s.triangle_count = m.triangle_count();
  s.boundary_vertex_count = m.boundary_count;
  s.min_angle_deg = 180.0;
  s.max_angle_deg = 0.0;
  s.min_edge = std::numeric_limits<double>::max();
  s.max_edge = 0.0;

  std::vector<double> edges;
  std::map<std::pair<std::uint32_t, std::uint32_t>, int> seen;
  for (const auto& t : m.triangles) {
    for (int k = 0; k < 3; ++k) {
      const std::uint32_t a = t[k];
      const std::uint32_t b = t[(k + 1) % 3];
      const auto key = std::minmax(a, b);
      if (seen.emplace(std::make_pair(key.first, key.second), 1).second)
        edges.push_back(dist(m.vertices[a], m.vertices[b]));
      const Vec2& apex = m.vertices[t[k]];
      const Vec2& p = m.vertices[t[(k + 1) % 3]];
      const Vec2& q = m.vertices[t[(k + 2) % 3]];
      const double ang = rad_to_deg(corner_angle(apex, p, q));
      s.min_angle_deg = std::min(s.min_angle_deg, ang);
      s.max_angle_deg = std::max(s.max_angle_deg, ang);
    }
  }
  double sum = 0.0;
  for (double e : edges) {
    s.min_edge = std::min(s.min_edge, e);
    s.max_edge = std::max(s.max_edge, e);
    sum += e;
  }
  s.mean_edge = edges.empty() ? 0.0 : sum / static_cast<double>(edges.size());
  s.total_area = mesh_area(m);
  s.edge_histogram.assign(10, 0);
  const double span = s.max_edge - s.min_edge;
  for (double e : edges) {
    std::size_t bin =
        span > 0.0 ? static_cast<std::size_t>(9.999 * (e - s.min_edge) / span) : 0;
    if (bin > 9) bin = 9;
    ++s.edge_histogram[bin];
  }
  return s;
}

namespace {
std::pair<std::uint32_t, std::uint32_t> edge_key(std::uint32_t a, std::uint32_t b) {
  return a < b ? std::pair{a, b} : std::pair{b, a};
}
}  // namespace

void validate_mesh(const TriMesh& m) {
  const std::size_t nv = m.vertex_count();
  const std::size_t nb = m.boundary_count;
  if (nb < 16 || nb > nv) throw DegenerateGeometry("mesh boundary size invalid");
  if (m.boundary_map.size() != nb)
    throw DegenerateGeometry("boundary map size mismatch");
  for (std::uint32_t i = 0; i < nb; ++i)
    if (m.boundary_map[i][0] != i || m.boundary_map[i][1] != i)
      throw DegenerateGeometry("boundary map must be the identity pairing");

  std::map<std::pair<std::uint32_t, std::uint32_t>, int> edge_count;
  for (std::size_t t = 0; t < m.triangle_count(); ++t) {
    const auto& tri = m.triangles[t];
    for (int k = 0; k < 3; ++k) {
      if (tri[k] >= nv) throw DegenerateGeometry("triangle references missing vertex");
      ++edge_count[edge_key(tri[k], tri[(k + 1) % 3])];
    }
    if (!(triangle_area(m, t) > 0.0))
      throw DegenerateGeometry("triangle with non-positive area");
  }
  // Conformity: boundary edges shared by exactly one triangle, interior by two.
  for (const auto& [edge, count] : edge_count) {
    const bool constrained =
        edge.first < nb && edge.second < nb &&
        ((edge.first + 1) % nb == edge.second || (edge.second + 1) % nb == edge.first);
    if (constrained && count != 1)
      throw DegenerateGeometry("boundary edge not preserved exactly once");
    if (!constrained && count != 2)
      throw DegenerateGeometry("non-conforming interior edge");
  }
  for (std::uint32_t i = 0; i < nb; ++i) {
    if (!edge_count.count(edge_key(i, static_cast<std::uint32_t>((i + 1) % nb))))
      throw DegenerateGeometry("missing boundary edge in triangulation");
  }
  // Connectivity over shared edges.
  if (m.triangle_count() == 0) throw DegenerateGeometry("empty triangulation");
  std::map<std::pair<std::uint32_t, std::uint32_t>, std::vector<std::size_t>> edge2tri;
  for (std::size_t t = 0; t < m.triangle_count(); ++t) {
    const auto& tri = m.triangles[t];
    for (int k = 0; k < 3; ++k) edge2tri[edge_key(tri[k], tri[(k + 1) % 3])].push_back(t);
  }
  std::vector<char> seen(m.triangle_count(), 0);
  std::vector<std::size_t> stack{0};
  seen[0] = 1;
  std::size_t reached = 1;
  while (!stack.empty()) {
    const std::size_t t = stack.back();
    stack.pop_back();
    const auto& tri = m.triangles[t];
    for (int k = 0; k < 3; ++k) {
      for (std::size_t other : edge2tri[edge_key(tri[k], tri[(k + 1) % 3])]) {
        if (!seen[other]) {
          seen[other] = 1;
          ++reached;
          stack.push_back(other);
        }
      }
    }
  }
  if (reached != m.triangle_count())
    throw DegenerateGeometry("triangulation is disconnected");
}

double integrate(const TriMesh& m, const std::function<double(Vec2)>& f) {
  // 6-point rule, exact through degree 4.
  static const double w1 = 0.223381589678011;
  static const double w2 = 0.109951743655322;
  static const double g1 = 0.445948490915965;
  static const double g2 = 0.091576213509771;
  static const double bary[6][3] = {
      {1.0 - 2.0 * g1, g1, g1}, {g1, 1.0 - 2.0 * g1, g1}, {g1, g1, 1.0 - 2.0 * g1},
      {1.0 - 2.0 * g2, g2, g2}, {g2, 1.0 - 2.0 * g2, g2}, {g2, g2, 1.0 - 2.0 * g2}};
  static const double weight[6] = {w1, w1, w1, w2, w2, w2};

  double total = 0.0;
  for (std::size_t t = 0; t < m.triangle_count(); ++t) {
    const auto& tri = m.triangles[t];
    const Vec2& a = m.vertices[tri[0]];
    const Vec2& b = m.vertices[tri[1]];
    const Vec2& c = m.vertices[tri[2]];
    const double area = triangle_area(m, t);
    double acc = 0.0;
    for (int q = 0; q < 6; ++q) {
      const Vec2 p = bary[q][0] * a + bary[q][1] * b + bary[q][2] * c;
      acc += weight[q] * f(p);
    }
    total += area * acc;
  }
  return total;
}

std::string to_off(const TriMesh& m) {
  std::ostringstream os;
  os << "OFF\n" << m.vertex_count() << " " << m.triangle_count() << " 0\n";
  char buf[80];
  for (const Vec2& v : m.vertices) {
    std::snprintf(buf, sizeof(buf), "%.17g %.17g 0\n", v.x, v.y);
    os << buf;
  }
  for (const auto& t : m.triangles) os << "3 " << t[0] << " " << t[1] << " " << t[2] << "\n";
  return os.str();
}

}  // namespace shapeflow
