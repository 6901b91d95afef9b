#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "shapeflow/contour.hpp"
#include "shapeflow/dynamics.hpp"
#include "shapeflow/geometry.hpp"

namespace shapeflow {

// Shortest decimal string that parses back to exactly the same double;
// locale-free and deterministic, so files built from the same inputs are
// byte-identical across runs. NaN renders as "nan", infinities as "inf".
std::string format_double(double v);

// ---------------------------------------------------------------------------
// Contours and boundary fields as JSON
// ---------------------------------------------------------------------------

// {"points": [[x, y], ...]}; orientation and simplicity are validated by the
// Contour constructor on load. Malformed files throw InvalidArgument.
Contour load_contour_json(const std::filesystem::path& file);
void save_contour_json(const std::filesystem::path& file, const Contour& c);

// {"values": [...]}
BoundaryScalarField load_boundary_field_json(const std::filesystem::path& file);
void save_boundary_field_json(const std::filesystem::path& file,
                              const BoundaryScalarField& a);

// ---------------------------------------------------------------------------
// Tangent-field CSV exports
// ---------------------------------------------------------------------------

// Header "vertex,u,S": one row per mesh vertex with the potential value; the
// S column repeats the field's divergence constant so the file is
// self-describing row by row.
void save_potential_csv(const std::filesystem::path& file,
                        const std::vector<double>& u, double div_constant);

// Header "triangle,gx,gy": one row per mesh triangle with the constant
// gradient on that triangle.
void save_gradient_csv(const std::filesystem::path& file,
                       const std::vector<Vec2>& gradients);

// Generic numeric CSV reader: first line is the header, every later cell is
// parsed as a double ("nan" allowed). Ragged or non-numeric rows throw
// InvalidArgument.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
};
CsvTable load_csv(const std::filesystem::path& file);

// ---------------------------------------------------------------------------
// Geodesic path directories
// ---------------------------------------------------------------------------

// Layout written into `dir` (created if needed):
//   contour_0000.json ...   one contour file per stored sample
//   speed_0000.json ...     the driving field's boundary speed per sample
//   diagnostics.csv          t,length_increment,continuity_residual,uniformity_std
// Speed files carry the flux-consistent boundary trace, so re-lifting
// speed_k on contour_k reproduces the driving field of sample k.
void save_path_directory(const std::filesystem::path& dir, const GeodesicPath& p);

struct LoadedPath {
  std::vector<double> times;
  std::vector<Contour> contours;
  std::vector<BoundaryScalarField> speeds;

  std::size_t sample_count() const { return times.size(); }
};

// Reads the layout above back. Missing files, mismatched lengths, or a
// non-increasing time column throw InvalidArgument; geometric validation of
// each contour happens in the Contour constructor.
LoadedPath load_path_directory(const std::filesystem::path& dir);

}  // namespace shapeflow
