#include "shapeflow/io.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <system_error>
#include <utility>

#include "json.hpp"

#include "shapeflow/errors.hpp"

namespace shapeflow {

namespace {

using nlohmann::json;

void write_text(const std::filesystem::path& file, const std::string& text) {
  if (file.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(file.parent_path(), ec);
  }
  std::ofstream out(file, std::ios::binary);  // binary: byte-stable newlines
  if (!out) throw InvalidArgument("cannot open for writing: " + file.string());
  out << text;
  out.flush();
  if (!out) throw InvalidArgument("write failed: " + file.string());
}

std::string read_text(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw InvalidArgument("cannot open for reading: " + file.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return std::move(buf).str();
}

json parse_json(const std::filesystem::path& file) {
  const std::string text = read_text(file);
  json j = json::parse(text, /*cb=*/nullptr, /*allow_exceptions=*/false);
  if (j.is_discarded())
    throw InvalidArgument("not valid JSON: " + file.string());
  return j;
}

std::vector<double> number_array(const json& j, const char* key,
                                 const std::filesystem::path& file) {
  if (!j.is_object() || !j.contains(key) || !j[key].is_array())
    throw InvalidArgument(std::string("missing \"") + key + "\" array: " + file.string());
  std::vector<double> out;
  out.reserve(j[key].size());
  for (const json& v : j[key]) {
    if (!v.is_number())
      throw InvalidArgument(std::string("non-numeric entry in \"") + key +
                            "\": " + file.string());
    out.push_back(v.get<double>());
  }
  return out;
}

std::string indexed_name(const char* stem, std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%s_%04zu.json", stem, i);
  return buf;
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

// ---------------------------------------------------------------------------
// JSON formats
// ---------------------------------------------------------------------------

Contour load_contour_json(const std::filesystem::path& file) {
  const json j = parse_json(file);
  if (!j.is_object() || !j.contains("points") || !j["points"].is_array())
    throw InvalidArgument("missing \"points\" array: " + file.string());
  std::vector<Vec2> pts;
  pts.reserve(j["points"].size());
  for (const json& p : j["points"]) {
    if (!p.is_array() || p.size() != 2 || !p[0].is_number() || !p[1].is_number())
      throw InvalidArgument("every point must be [x, y]: " + file.string());
    pts.push_back(Vec2{p[0].get<double>(), p[1].get<double>()});
  }
  return Contour(std::move(pts));
}

void save_contour_json(const std::filesystem::path& file, const Contour& c) {
  std::string out = "{\"points\":[";
  for (std::size_t i = 0; i < c.size(); ++i) {
    if (i) out += ',';
    out += '[';
    out += format_double(c[i].x);
    out += ',';
    out += format_double(c[i].y);
    out += ']';
  }
  out += "]}\n";
  write_text(file, out);
}

BoundaryScalarField load_boundary_field_json(const std::filesystem::path& file) {
  BoundaryScalarField a;
  a.values = number_array(parse_json(file), "values", file);
  return a;
}

void save_boundary_field_json(const std::filesystem::path& file,
                              const BoundaryScalarField& a) {
  std::string out = "{\"values\":[";
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (i) out += ',';
    out += format_double(a[i]);
  }
  out += "]}\n";
  write_text(file, out);
}

// ---------------------------------------------------------------------------
// CSV
// ---------------------------------------------------------------------------

void save_potential_csv(const std::filesystem::path& file,
                        const std::vector<double>& u, double div_constant) {
  std::string out = "vertex,u,S\n";
  const std::string s = format_double(div_constant);
  for (std::size_t i = 0; i < u.size(); ++i) {
    out += std::to_string(i);
    out += ',';
    out += format_double(u[i]);
    out += ',';
    out += s;
    out += '\n';
  }
  write_text(file, out);
}

void save_gradient_csv(const std::filesystem::path& file,
                       const std::vector<Vec2>& gradients) {
  std::string out = "triangle,gx,gy\n";
  for (std::size_t i = 0; i < gradients.size(); ++i) {
    out += std::to_string(i);
    out += ',';
    out += format_double(gradients[i].x);
    out += ',';
    out += format_double(gradients[i].y);
    out += '\n';
  }
  write_text(file, out);
}

CsvTable load_csv(const std::filesystem::path& file) {
  const std::string text = read_text(file);
  CsvTable table;
  std::size_t pos = 0;
  bool first = true;
  while (pos < text.size()) {
    std::size_t eol = text.find('\n', pos);
    if (eol == std::string::npos) eol = text.size();
    const std::string line = text.substr(pos, eol - pos);
    pos = eol + 1;
    if (line.empty()) continue;

    std::vector<std::string> cells;
    std::size_t cell_start = 0;
    while (true) {
      const std::size_t comma = line.find(',', cell_start);
      cells.push_back(line.substr(cell_start, comma - cell_start));
      if (comma == std::string::npos) break;
      cell_start = comma + 1;
    }

    if (first) {
      table.header = cells;
      first = false;
      continue;
    }
    if (cells.size() != table.header.size())
      throw InvalidArgument("ragged CSV row: " + file.string());
    std::vector<double> row;
    row.reserve(cells.size());
    for (const std::string& cell : cells) {
      // strtod accepts "nan" and "inf", which to_chars emits for those values.
      char* end = nullptr;
      const double v = std::strtod(cell.c_str(), &end);
      if (end == cell.c_str() || *end != '\0')
        throw InvalidArgument("non-numeric CSV cell \"" + cell + "\": " + file.string());
      row.push_back(v);
    }
    table.rows.push_back(std::move(row));
  }
  if (first) throw InvalidArgument("CSV file is empty: " + file.string());
  return table;
}

// ---------------------------------------------------------------------------
// Geodesic path directories
// ---------------------------------------------------------------------------

void save_path_directory(const std::filesystem::path& dir, const GeodesicPath& p) {
  const std::size_t n = p.sample_count();
  if (n == 0) throw InvalidArgument("cannot save an empty path");
  if (p.contours.size() != n || p.boundary_speeds.size() != n ||
      p.step_diagnostics.size() != n)
    throw InvalidArgument("path samples are inconsistent");

  std::error_code ec;
  std::filesystem::create_directories(dir, ec);

  for (std::size_t i = 0; i < n; ++i) {
    save_contour_json(dir / indexed_name("contour", i), p.contours[i]);
    save_boundary_field_json(dir / indexed_name("speed", i), p.boundary_speeds[i]);
  }

  std::string csv = "t,length_increment,continuity_residual,uniformity_std\n";
  for (std::size_t i = 0; i < n; ++i) {
    const GeodesicStep& s = p.step_diagnostics[i];
    csv += format_double(s.time);
    csv += ',';
    csv += format_double(s.length_increment);
    csv += ',';
    csv += format_double(s.continuity_residual);
    csv += ',';
    csv += format_double(s.uniformity_std);
    csv += '\n';
  }
  write_text(dir / "diagnostics.csv", csv);
}

LoadedPath load_path_directory(const std::filesystem::path& dir) {
  const CsvTable diag = load_csv(dir / "diagnostics.csv");
  if (diag.header.empty() || diag.header.front() != "t")
    throw InvalidArgument("diagnostics.csv must start with a t column: " + dir.string());
  if (diag.rows.empty())
    throw InvalidArgument("diagnostics.csv has no samples: " + dir.string());

  LoadedPath path;
  for (const auto& row : diag.rows) path.times.push_back(row.front());
  for (std::size_t i = 1; i < path.times.size(); ++i)
    if (!(path.times[i] > path.times[i - 1]))
      throw InvalidArgument("time column must increase: " + dir.string());

  for (std::size_t i = 0; i < path.times.size(); ++i) {
    Contour c = load_contour_json(dir / indexed_name("contour", i));
    BoundaryScalarField a = load_boundary_field_json(dir / indexed_name("speed", i));
    if (a.size() != c.size())
      throw InvalidArgument("speed length does not match its contour: " + dir.string());
    path.contours.push_back(std::move(c));
    path.speeds.push_back(std::move(a));
  }
  return path;
}

}  // namespace shapeflow
