#include "shapeflow/io.hpp"

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "shapeflow/dynamics.hpp"
#include "shapeflow/errors.hpp"
#include "shapeflow/shapes.hpp"
#include "shapeflow/svg.hpp"

using namespace shapeflow;

namespace {

constexpr double kPi = 3.14159265358979323846;

std::filesystem::path scratch_dir() {
  const auto dir = std::filesystem::temp_directory_path() / "shapeflow_test_io";
  std::filesystem::create_directories(dir);
  return dir;
}

void write_file(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

BoundaryScalarField cosine_speed(std::size_t n, int k) {
  BoundaryScalarField a;
  a.values.resize(n);
  for (std::size_t i = 0; i < n; ++i)
    a.values[i] = std::cos(k * 2.0 * kPi * static_cast<double>(i) / static_cast<double>(n));
  return a;
}

// Minimal XML well-formedness: every opening tag is closed in order, and
// attribute quoting inside tags is balanced.
bool tags_balanced(const std::string& svg) {
  std::vector<std::string> stack;
  std::size_t pos = 0;
  while ((pos = svg.find('<', pos)) != std::string::npos) {
    const std::size_t end = svg.find('>', pos);
    if (end == std::string::npos) return false;
    std::string tag = svg.substr(pos + 1, end - pos - 1);
    pos = end + 1;
    if (tag.empty()) return false;
    if (tag.front() == '/') {
      if (stack.empty() || stack.back() != tag.substr(1)) return false;
      stack.pop_back();
      continue;
    }
    const bool self_closing = tag.back() == '/';
    if (self_closing) tag.pop_back();
    const std::string name = tag.substr(0, tag.find_first_of(" \t\n"));
    if (name.empty()) return false;
    if (!self_closing) stack.push_back(name);
  }
  return stack.empty();
}

std::size_t count_occurrences(const std::string& text, const std::string& needle) {
  std::size_t n = 0, pos = 0;
  while ((pos = text.find(needle, pos)) != std::string::npos) {
    ++n;
    pos += needle.size();
  }
  return n;
}

}  // namespace

TEST_CASE("doubles render to shortest exact decimal strings") {
  for (double v : {0.0, 1.0, -1.0, 1.0 / 3.0, 0.1, -2.5e17, 1e-300, 6.02214076e23,
                   3.14159265358979323846, -0.0}) {
    const std::string s = format_double(v);
    char* end = nullptr;
    const double back = std::strtod(s.c_str(), &end);
    CHECK(end == s.c_str() + s.size());
    CHECK(back == v);
    CHECK(std::signbit(back) == std::signbit(v));
  }
  CHECK(format_double(std::nan("")) == "nan");
  CHECK(format_double(std::numeric_limits<double>::infinity()) == "inf");
}

TEST_CASE("contour JSON round-trips exactly and deterministically") {
  const auto dir = scratch_dir();
  const Contour c = make_star(1.0, 0.3, 5, 64);
  const auto file = dir / "star.json";
  save_contour_json(file, c);

  const Contour back = load_contour_json(file);
  REQUIRE(back.size() == c.size());
  for (std::size_t i = 0; i < c.size(); ++i) CHECK(dist(back[i], c[i]) == 0.0);

  const std::string first = read_file(file);
  save_contour_json(file, back);
  CHECK(read_file(file) == first);
}

TEST_CASE("contour JSON loading rejects malformed and degenerate input") {
  const auto dir = scratch_dir();

  const auto garbage = dir / "garbage.json";
  write_file(garbage, "not json at all {{{");
  CHECK_THROWS_AS(load_contour_json(garbage), InvalidArgument);

  const auto wrong_schema = dir / "wrong_schema.json";
  write_file(wrong_schema, "{\"values\": [1, 2, 3]}");
  CHECK_THROWS_AS(load_contour_json(wrong_schema), InvalidArgument);

  const auto short_ring = dir / "short.json";
  write_file(short_ring, "{\"points\": [[0,0],[1,0],[0,1]]}");
  CHECK_THROWS_AS(load_contour_json(short_ring), InvalidArgument);

  const auto missing = dir / "does_not_exist.json";
  CHECK_THROWS_AS(load_contour_json(missing), InvalidArgument);

  // A clockwise ring is valid JSON but not a valid contour.
  const Contour ccw = make_circle(1.0, 32);
  std::string cw = "{\"points\": [";
  for (std::size_t i = 0; i < ccw.size(); ++i) {
    const Vec2 p = ccw[ccw.size() - 1 - i];
    cw += (i ? "," : "") + std::string("[") + format_double(p.x) + "," +
          format_double(p.y) + "]";
  }
  cw += "]}";
  const auto cw_file = dir / "clockwise.json";
  write_file(cw_file, cw);
  CHECK_THROWS_AS(load_contour_json(cw_file), DegenerateGeometry);
}

TEST_CASE("boundary field JSON round-trips exactly") {
  const auto dir = scratch_dir();
  BoundaryScalarField a;
  for (int i = 0; i < 40; ++i) a.values.push_back(std::sin(0.7 * i) / 3.0);
  const auto file = dir / "field.json";
  save_boundary_field_json(file, a);
  const BoundaryScalarField back = load_boundary_field_json(file);
  REQUIRE(back.size() == a.size());
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(back[i] == a[i]);

  const auto bad = dir / "bad_field.json";
  write_file(bad, "{\"values\": [1, \"two\", 3]}");
  CHECK_THROWS_AS(load_boundary_field_json(bad), InvalidArgument);
}

TEST_CASE("potential and gradient CSVs round-trip through the generic reader") {
  const auto dir = scratch_dir();

  std::vector<double> u;
  for (int i = 0; i < 25; ++i) u.push_back(std::cos(1.3 * i) * 1e-3);
  const auto pot = dir / "potential.csv";
  save_potential_csv(pot, u, 1.9993);
  const CsvTable pt = load_csv(pot);
  REQUIRE(pt.header == std::vector<std::string>{"vertex", "u", "S"});
  REQUIRE(pt.rows.size() == u.size());
  for (std::size_t i = 0; i < u.size(); ++i) {
    CHECK(pt.rows[i][0] == static_cast<double>(i));
    CHECK(pt.rows[i][1] == u[i]);
    CHECK(pt.rows[i][2] == 1.9993);
  }

  std::vector<Vec2> g;
  for (int i = 0; i < 30; ++i) g.push_back(Vec2{std::sin(0.1 * i), -i / 7.0});
  const auto grad = dir / "gradient.csv";
  save_gradient_csv(grad, g);
  const CsvTable gt = load_csv(grad);
  REQUIRE(gt.header == std::vector<std::string>{"triangle", "gx", "gy"});
  REQUIRE(gt.rows.size() == g.size());
  for (std::size_t i = 0; i < g.size(); ++i) {
    CHECK(gt.rows[i][1] == g[i].x);
    CHECK(gt.rows[i][2] == g[i].y);
  }
}

TEST_CASE("csv reader accepts nan cells and rejects malformed tables") {
  const auto dir = scratch_dir();

  const auto ok = dir / "ok.csv";
  write_file(ok, "a,b\n1,nan\n2,3\n");
  const CsvTable t = load_csv(ok);
  REQUIRE(t.rows.size() == 2);
  CHECK(std::isnan(t.rows[0][1]));
  CHECK(t.rows[1][1] == 3.0);

  const auto header_only = dir / "header_only.csv";
  write_file(header_only, "a,b,c\n");
  CHECK(load_csv(header_only).rows.empty());

  const auto ragged = dir / "ragged.csv";
  write_file(ragged, "a,b\n1,2\n3\n");
  CHECK_THROWS_AS(load_csv(ragged), InvalidArgument);

  const auto words = dir / "words.csv";
  write_file(words, "a,b\n1,two\n");
  CHECK_THROWS_AS(load_csv(words), InvalidArgument);

  const auto empty = dir / "empty.csv";
  write_file(empty, "");
  CHECK_THROWS_AS(load_csv(empty), InvalidArgument);
}

TEST_CASE("path directories round-trip a shot path") {
  const auto dir = scratch_dir() / "path";
  std::filesystem::remove_all(dir);

  const Contour c0 = make_circle(1.0, 64);
  const GeodesicPath p = shoot_geodesic(c0, cosine_speed(64, 1), 0.25, 8, 0.15);
  REQUIRE(p.status == GeodesicStatus::complete);
  save_path_directory(dir, p);

  const LoadedPath back = load_path_directory(dir);
  REQUIRE(back.sample_count() == p.sample_count());
  for (std::size_t i = 0; i < p.sample_count(); ++i) {
    CHECK(back.times[i] == p.times[i]);
    REQUIRE(back.contours[i].size() == p.contours[i].size());
    for (std::size_t j = 0; j < p.contours[i].size(); ++j)
      CHECK(dist(back.contours[i][j], p.contours[i][j]) == 0.0);
    REQUIRE(back.speeds[i].size() == p.boundary_speeds[i].size());
    for (std::size_t j = 0; j < p.boundary_speeds[i].size(); ++j)
      CHECK(back.speeds[i][j] == p.boundary_speeds[i][j]);
  }
}

TEST_CASE("path directory loading rejects corruption") {
  const auto base = scratch_dir() / "path_corrupt";
  std::filesystem::remove_all(base);

  const Contour c0 = make_circle(1.0, 64);
  const GeodesicPath p = shoot_geodesic(c0, cosine_speed(64, 1), 0.25, 8, 0.15);
  save_path_directory(base, p);

  SUBCASE("missing sample file") {
    std::filesystem::remove(base / "speed_0003.json");
    CHECK_THROWS_AS(load_path_directory(base), InvalidArgument);
  }
  SUBCASE("non-increasing time column") {
    const std::string diag = read_file(base / "diagnostics.csv");
    std::istringstream in(diag);
    std::string header, line;
    std::getline(in, header);
    std::vector<std::string> lines;
    while (std::getline(in, line)) lines.push_back(line);
    std::swap(lines[2], lines[5]);
    std::string out = header + "\n";
    for (const std::string& l : lines) out += l + "\n";
    write_file(base / "diagnostics.csv", out);
    CHECK_THROWS_AS(load_path_directory(base), InvalidArgument);
  }
  SUBCASE("speed length does not match its contour") {
    write_file(base / "speed_0002.json", "{\"values\": [1.0, 2.0]}");
    CHECK_THROWS_AS(load_path_directory(base), InvalidArgument);
  }
  SUBCASE("not a directory") {
    CHECK_THROWS_AS(load_path_directory(base / "nope"), InvalidArgument);
  }
}

TEST_CASE("svg emitters produce well-formed, self-contained, stable markup") {
  const Contour c = make_star(1.0, 0.3, 5, 48);
  const ShapeDomain d(c, 0.2);
  BoundaryScalarField a = cosine_speed(48, 2);
  const TangentVector v = lift(d, a);

  std::vector<Contour> snaps{make_circle(1.0, 32), make_circle(1.2, 32), make_circle(1.4, 32)};
  std::vector<std::vector<Vec2>> traj{{Vec2{0, 0}, Vec2{0.5, 0}},
                                      {Vec2{0.1, 0.05}, Vec2{0.6, 0.02}},
                                      {Vec2{0.2, 0.08}, Vec2{0.7, 0.03}}};

  const std::vector<std::string> pages{
      render_contour_svg(c),
      render_mesh_svg(d.mesh()),
      render_field_svg(d.mesh(), v.potential.values, v.grad.gradients),
      render_filmstrip_svg(snaps),
      render_trajectories_svg(snaps.front(), snaps.back(), traj),
  };
  for (const std::string& svg : pages) {
    CHECK(tags_balanced(svg));
    CHECK(svg.rfind("<svg ", 0) == 0);
    // Self-contained: the namespace declaration is the only URL of any kind.
    CHECK(count_occurrences(svg, "http") == 1);
    CHECK(count_occurrences(svg, "xmlns=\"http://www.w3.org/2000/svg\"") == 1);
    CHECK(svg.find("href") == std::string::npos);
    CHECK(svg.find("@import") == std::string::npos);
  }

  // One closed outline per snapshot in the filmstrip.
  CHECK(count_occurrences(pages[3], "<polygon") == snaps.size());
  // One open polyline per particle in the trajectory page.
  CHECK(count_occurrences(pages[4], "<polyline") == traj.front().size());
  // The field page carries shaded triangles and gradient arrows.
  CHECK(count_occurrences(pages[2], "<polygon") >= d.mesh().triangle_count());
  CHECK(count_occurrences(pages[2], "<line") > 0);

  // Byte-stable across repeated calls.
  CHECK(render_field_svg(d.mesh(), v.potential.values, v.grad.gradients) == pages[2]);
  CHECK(render_mesh_svg(d.mesh()) == pages[1]);
}
