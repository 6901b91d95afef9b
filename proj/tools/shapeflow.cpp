// shapeflow: command-line front end for shape-measure flows on closed planar
// contours. Subcommands: generate | lift | decompose | geodesic | verify |
// render. Every command writes its configuration echo to <output>/run.json;
// all outputs are deterministic functions of the inputs and flags.
//
// Exit codes: 0 success, 1 numerical failure (or failed verification),
// 2 usage/format error, 3 geodesic breakdown (partial path still written).

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "shapeflow/contour.hpp"
#include "shapeflow/dynamics.hpp"
#include "shapeflow/errors.hpp"
#include "shapeflow/io.hpp"
#include "shapeflow/mesh.hpp"
#include "shapeflow/shapes.hpp"
#include "shapeflow/svg.hpp"
#include "shapeflow/tangent.hpp"

namespace fs = std::filesystem;
using nlohmann::ordered_json;
using namespace shapeflow;

namespace {

constexpr double kPi = 3.14159265358979323846;

constexpr int kExitSuccess = 0;
constexpr int kExitNumerical = 1;
constexpr int kExitUsage = 2;
constexpr int kExitBreakdown = 3;

// Raised while reading and validating inputs, so the top level can map the
// problem to the usage exit code even when the throw came from deep inside
// the library (a malformed JSON file, a non-simple contour, a bad spec).
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Run `load` under the usage-error regime: anything thrown while loading is
// the user's data, not a numerical failure.
template <typename Fn>
auto loading(Fn&& load) -> decltype(load()) {
  try {
    return load();
  } catch (const UsageError&) {
    throw;
  } catch (const std::exception& e) {
    throw UsageError(e.what());
  }
}

void write_json_file(const fs::path& file, const ordered_json& j) {
  if (file.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(file.parent_path(), ec);
  }
  std::ofstream out(file, std::ios::binary);
  if (!out) throw UsageError("cannot open for writing: " + file.string());
  out << j.dump(2) << '\n';
  if (!out.flush()) throw UsageError("write failed: " + file.string());
}

void write_text_file(const fs::path& file, const std::string& text) {
  if (file.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(file.parent_path(), ec);
  }
  std::ofstream out(file, std::ios::binary);
  if (!out) throw UsageError("cannot open for writing: " + file.string());
  out << text;
  if (!out.flush()) throw UsageError("write failed: " + file.string());
}

// ---------------------------------------------------------------------------
// Boundary-field mini-language: terms joined by '+', each one of
//   const:<v>    constant speed v
//   cos:<k>      cos(k * theta_j), theta_j = 2*pi*j/N over the sample index
//   sin:<k>      sin(k * theta_j)
//   file:<path>  {"values": [...]} of length N
// ---------------------------------------------------------------------------

double parse_number(const std::string& s, const std::string& what) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size() || !std::isfinite(v))
    throw UsageError("bad " + what + ": \"" + s + "\"");
  return v;
}

long parse_integer(const std::string& s, const std::string& what) {
  char* end = nullptr;
  const long v = std::strtol(s.c_str(), &end, 10);
  if (s.empty() || end != s.c_str() + s.size() || v < 0)
    throw UsageError("bad " + what + ": \"" + s + "\" (want a non-negative integer)");
  return v;
}

BoundaryScalarField parse_field_spec(const std::string& spec, std::size_t n) {
  BoundaryScalarField out;
  out.values.assign(n, 0.0);
  if (spec.empty()) throw UsageError("field spec is empty");

  std::size_t pos = 0;
  while (pos <= spec.size()) {
    std::size_t plus = spec.find('+', pos);
    if (plus == std::string::npos) plus = spec.size();
    const std::string term = spec.substr(pos, plus - pos);
    pos = plus + 1;

    const std::size_t colon = term.find(':');
    if (term.empty() || colon == std::string::npos || colon + 1 >= term.size())
      throw UsageError("bad field term \"" + term +
                       "\" (want const:<v>, cos:<k>, sin:<k>, or file:<path>)");
    const std::string kind = term.substr(0, colon);
    const std::string arg = term.substr(colon + 1);

    if (kind == "const") {
      const double v = parse_number(arg, "const value");
      for (double& x : out.values) x += v;
    } else if (kind == "cos" || kind == "sin") {
      const long k = parse_integer(arg, "harmonic index");
      for (std::size_t j = 0; j < n; ++j) {
        const double theta =
            2.0 * kPi * static_cast<double>(j) / static_cast<double>(n);
        out.values[j] += kind == "cos" ? std::cos(k * theta) : std::sin(k * theta);
      }
    } else if (kind == "file") {
      const BoundaryScalarField f = load_boundary_field_json(arg);
      if (f.size() != n)
        throw UsageError("field file has " + std::to_string(f.size()) +
                         " values for a contour of " + std::to_string(n) + " samples");
      for (std::size_t j = 0; j < n; ++j) out.values[j] += f[j];
    } else {
      throw UsageError("unknown field term kind \"" + kind + "\"");
    }
    if (plus == spec.size()) break;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Shared option blocks
// ---------------------------------------------------------------------------

struct RenderOpts {
  int width = 640;
  double stroke = 1.5;
  double arrow_scale = 1.0;

  RenderStyle style() const { return RenderStyle{width, stroke, arrow_scale}; }
  ordered_json echo() const {
    return ordered_json{{"width", width}, {"stroke", stroke}, {"arrow_scale", arrow_scale}};
  }
  void attach(CLI::App* cmd) {
    cmd->add_option("--width", width, "SVG width in pixels")
        ->check(CLI::Range(64, 8192))
        ->capture_default_str();
    cmd->add_option("--stroke", stroke, "contour stroke width in pixels")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    cmd->add_option("--arrow-scale", arrow_scale, "multiplier on the automatic arrow length")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
  }
};

// ---------------------------------------------------------------------------
// generate
// ---------------------------------------------------------------------------

struct GenerateOpts {
  std::string kind;
  std::string output;
  std::size_t samples = 128;
  double radius = 1.0;
  double semi_a = 1.5;
  double semi_b = 1.0;
  double amplitude = 0.3;
  unsigned lobes = 5;
  double width = 0.5;
  double center = 0.0;
};

int run_generate(const GenerateOpts& o) {
  const Contour c = loading([&] {
    if (o.kind == "circle") return make_circle(o.radius, o.samples);
    if (o.kind == "ellipse") return make_ellipse(o.semi_a, o.semi_b, o.samples);
    if (o.kind == "star") return make_star(o.radius, o.amplitude, o.lobes, o.samples);
    if (o.kind == "bump")
      return make_bump(o.radius, o.amplitude, o.width, o.center, o.samples);
    throw UsageError("unknown shape kind \"" + o.kind + "\"");
  });

  const fs::path dir(o.output);
  save_contour_json(dir / "contour.json", c);

  ordered_json run{{"command", "generate"}, {"kind", o.kind},
                   {"samples", o.samples},  {"radius", o.radius},
                   {"output", o.output}};
  if (o.kind == "ellipse") {
    run["semi_a"] = o.semi_a;
    run["semi_b"] = o.semi_b;
  }
  if (o.kind == "star") {
    run["amplitude"] = o.amplitude;
    run["lobes"] = o.lobes;
  }
  if (o.kind == "bump") {
    run["amplitude"] = o.amplitude;
    run["width"] = o.width;
    run["center"] = o.center;
  }
  write_json_file(dir / "run.json", run);

  std::printf("generate: wrote %s (%zu points, area %s)\n",
              (dir / "contour.json").string().c_str(), c.size(),
              format_double(area(c)).c_str());
  return kExitSuccess;
}

// ---------------------------------------------------------------------------
// lift
// ---------------------------------------------------------------------------

struct LiftOpts {
  std::string input;
  std::string field;
  std::string output;
  double mesh_size = 0.05;
  RenderOpts render;
};

int run_lift(const LiftOpts& o) {
  const Contour c = loading([&] { return load_contour_json(o.input); });
  const BoundaryScalarField a = loading([&] { return parse_field_spec(o.field, c.size()); });

  const ShapeDomain d(c, o.mesh_size);
  const TangentVector alpha = lift(d, a);

  const fs::path dir(o.output);
  save_potential_csv(dir / "potential.csv", alpha.potential.values, alpha.div_constant);
  save_gradient_csv(dir / "gradient.csv", alpha.grad.gradients);
  write_text_file(dir / "lift.svg",
                  render_field_svg(d.mesh(), alpha.potential.values,
                                   alpha.grad.gradients, o.render.style()));
  write_json_file(dir / "run.json",
                  ordered_json{{"command", "lift"},
                               {"input", o.input},
                               {"field", o.field},
                               {"mesh_size", o.mesh_size},
                               {"output", o.output},
                               {"render", o.render.echo()}});

  std::printf("lift: S %s, transport norm %s, %zu vertices, %zu triangles\n",
              format_double(alpha.div_constant).c_str(),
              format_double(ot_norm(d.solver(), alpha.grad)).c_str(),
              d.mesh().vertex_count(), d.mesh().triangle_count());
  return kExitSuccess;
}

// ---------------------------------------------------------------------------
// decompose
// ---------------------------------------------------------------------------

struct DecomposeOpts {
  std::string input;
  std::string field;
  std::string output;
  double mesh_size = 0.05;
};

int run_decompose(const DecomposeOpts& o) {
  const Contour c = loading([&] { return load_contour_json(o.input); });
  const BoundaryScalarField a = loading([&] { return parse_field_spec(o.field, c.size()); });

  const ShapeDomain d(c, o.mesh_size);
  const TangentVector alpha = lift(d, a);
  const TangentDecomposition dec = decompose(d, alpha);

  // Reassemble the three component fields to audit their orthogonality and
  // the reconstruction identity.
  const std::size_t nt = d.mesh().triangle_count();
  VectorField f_trans;
  f_trans.mesh = &d.mesh();
  f_trans.gradients.assign(nt, dec.v_trans);
  const TangentVector unit_scale = scale_component(d);
  VectorField f_scale;
  f_scale.mesh = &d.mesh();
  f_scale.gradients.resize(nt);
  for (std::size_t t = 0; t < nt; ++t)
    f_scale.gradients[t] = dec.lambda_scale * unit_scale.grad.gradients[t];
  const VectorField& f_def = dec.alpha_def;

  const auto ortho = [&](const VectorField& x, const VectorField& y) {
    const double nx = ot_norm(d.solver(), x);
    const double ny = ot_norm(d.solver(), y);
    if (nx * ny < 1e-20) return 0.0;
    return std::fabs(d.solver().inner_product(x, y)) / (nx * ny);
  };

  VectorField sum;
  sum.mesh = &d.mesh();
  sum.gradients.resize(nt);
  for (std::size_t t = 0; t < nt; ++t)
    sum.gradients[t] = alpha.grad.gradients[t] -
                       (f_trans.gradients[t] + f_scale.gradients[t] + f_def.gradients[t]);
  const double total = ot_norm(d.solver(), alpha.grad);
  const double reconstruction =
      ot_norm(d.solver(), sum) / std::max(total, 1e-30);

  const ordered_json report{
      {"v_trans", {dec.v_trans.x, dec.v_trans.y}},
      {"lambda", dec.lambda_scale},
      {"norms",
       {{"translation", dec.norm_trans},
        {"scale", dec.norm_scale},
        {"deformation", dec.norm_def},
        {"total", total}}},
      {"orthogonality",
       {{"translation_scale", ortho(f_trans, f_scale)},
        {"translation_deformation", ortho(f_trans, f_def)},
        {"scale_deformation", ortho(f_scale, f_def)}}},
      {"reconstruction_residual", reconstruction}};

  const fs::path dir(o.output);
  write_json_file(dir / "decomposition.json", report);
  write_json_file(dir / "run.json", ordered_json{{"command", "decompose"},
                                                 {"input", o.input},
                                                 {"field", o.field},
                                                 {"mesh_size", o.mesh_size},
                                                 {"output", o.output}});

  std::printf("decompose: v_trans (%s, %s), lambda %s, norms t/s/d %s/%s/%s\n",
              format_double(dec.v_trans.x).c_str(), format_double(dec.v_trans.y).c_str(),
              format_double(dec.lambda_scale).c_str(),
              format_double(dec.norm_trans).c_str(), format_double(dec.norm_scale).c_str(),
              format_double(dec.norm_def).c_str());
  return kExitSuccess;
}

// ---------------------------------------------------------------------------
// geodesic
// ---------------------------------------------------------------------------

struct GeodesicOpts {
  std::string input;
  std::string field;
  std::string output;
  double mesh_size = 0.05;
  double horizon = 1.0;
  int steps = 64;
  double dt = 0.0;  // alternative to steps: steps = horizon / dt
  int relift_period = 5;
  std::size_t particles = 200;
  RenderOpts render;
};

int run_geodesic(const GeodesicOpts& o) {
  const Contour c = loading([&] { return load_contour_json(o.input); });
  const BoundaryScalarField a = loading([&] { return parse_field_spec(o.field, c.size()); });
  const int steps = o.dt > 0.0
                        ? static_cast<int>(std::lround(o.horizon / o.dt))
                        : o.steps;
  if (steps < 1) throw UsageError("--dt is larger than the horizon");

  ShootOptions shoot_opts;
  shoot_opts.relift_period = o.relift_period;
  GeodesicPath path = shoot_geodesic(c, a, o.horizon, steps, o.mesh_size, shoot_opts);

  const fs::path dir(o.output);
  const bool complete = path.status == GeodesicStatus::complete;

  // Audits only make sense on a whole path; a broken one still gets saved.
  UniformityReport uniformity;
  bool have_uniformity = false;
  if (complete && path.sample_count() >= 3) {
    const ContinuityReport continuity = verify_continuity(path);
    uniformity = density_uniformity(path, o.particles);
    have_uniformity = true;
    annotate_diagnostics(path, &continuity, &uniformity);
  }

  save_path_directory(dir, path);

  if (have_uniformity) {
    std::string csv = "time,particle,x,y\n";
    for (std::size_t i = 0; i < uniformity.times.size(); ++i) {
      for (std::size_t j = 0; j < uniformity.trajectories[i].size(); ++j) {
        csv += format_double(uniformity.times[i]);
        csv += ',';
        csv += std::to_string(j);
        csv += ',';
        csv += format_double(uniformity.trajectories[i][j].x);
        csv += ',';
        csv += format_double(uniformity.trajectories[i][j].y);
        csv += '\n';
      }
    }
    write_text_file(dir / "trajectories.csv", csv);
    write_text_file(dir / "trajectories.svg",
                    render_trajectories_svg(path.contours.front(), path.contours.back(),
                                            uniformity.trajectories, o.render.style()));
  }

  // Filmstrip: at most nine snapshots, always including both endpoints.
  std::vector<Contour> snapshots;
  const std::size_t n = path.sample_count();
  std::size_t last_idx = static_cast<std::size_t>(-1);
  for (int k = 0; k < 9; ++k) {
    const std::size_t idx =
        n <= 1 ? 0 : static_cast<std::size_t>(std::lround(k * (n - 1) / 8.0));
    if (idx != last_idx) snapshots.push_back(path.contours[idx]);
    last_idx = idx;
  }
  write_text_file(dir / "filmstrip.svg", render_filmstrip_svg(snapshots, o.render.style()));

  write_json_file(dir / "run.json", ordered_json{{"command", "geodesic"},
                                                 {"input", o.input},
                                                 {"field", o.field},
                                                 {"mesh_size", o.mesh_size},
                                                 {"horizon", o.horizon},
                                                 {"steps", steps},
                                                 {"dt", o.horizon / steps},
                                                 {"relift_period", o.relift_period},
                                                 {"particles", o.particles},
                                                 {"output", o.output},
                                                 {"render", o.render.echo()}});

  if (!complete) {
    std::printf("geodesic: breakdown after %zu samples (%s); partial path written to %s\n",
                path.sample_count(), path.breakdown_reason.c_str(), dir.string().c_str());
    return kExitBreakdown;
  }
  std::printf(
      "geodesic: complete, %zu samples, length %s, final area %s, straightness departure %s\n",
      path.sample_count(), format_double(path.length).c_str(),
      format_double(area(path.contours.back())).c_str(),
      format_double(hessian_departure(path.potentials.front())).c_str());
  return kExitSuccess;
}

// ---------------------------------------------------------------------------
// verify
// ---------------------------------------------------------------------------

struct VerifyOpts {
  std::string input;
  std::string output;  // empty: <input>/verify
  double mesh_size = 0.0;  // 0: read from <input>/run.json
  double continuity_tol = 0.02;
  double uniformity_tol = 1e-3;
  double mass_tol = 1e-9;
  double quadrature_tol = 1e-6;
  std::size_t particles = 200;
};

int run_verify(const VerifyOpts& o) {
  const fs::path dir(o.input);
  const LoadedPath loaded = loading([&] { return load_path_directory(dir); });

  double h = o.mesh_size;
  if (!(h > 0.0)) {
    h = loading([&]() -> double {
      std::ifstream in(dir / "run.json", std::ios::binary);
      if (!in)
        throw UsageError("no --mesh-size given and no run.json in " + dir.string());
      const nlohmann::json j = nlohmann::json::parse(in, nullptr, false);
      if (j.is_discarded() || !j.contains("mesh_size") || !j["mesh_size"].is_number())
        throw UsageError("run.json in " + dir.string() +
                         " has no usable mesh_size; pass --mesh-size");
      return j["mesh_size"].get<double>();
    });
    if (!(h > 0.0)) throw UsageError("mesh_size must be positive");
  }

  // Rebuild the path: lift each stored speed on its own contour. The speed
  // files carry flux-consistent traces, so the lift reproduces the driving
  // field each sample carried when the path was shot.
  GeodesicPath path;
  path.times = loaded.times;
  path.boundary_speeds = loaded.speeds;
  for (std::size_t i = 0; i < loaded.sample_count(); ++i) {
    const ShapeDomain d(loaded.contours[i], h);
    TangentVector alpha = lift(d, loaded.speeds[i]);
    GeodesicStep step;
    step.time = loaded.times[i];
    step.kinetic_norm = ot_norm(d.solver(), alpha.grad);
    step.area = area(d.contour());
    step.density = 1.0 / step.area;
    step.mass_identity_error = std::fabs(step.area * step.density - 1.0);
    step.mass_quadrature_error = std::fabs(mesh_area(d.mesh()) * step.density - 1.0);
    step.divergence_constant = alpha.div_constant;
    if (i > 0) {
      step.length_increment =
          0.5 * (loaded.times[i] - loaded.times[i - 1]) *
          (path.step_diagnostics.back().kinetic_norm + step.kinetic_norm);
      path.length += step.length_increment;
    }
    path.contours.push_back(d.contour());
    path.meshes.push_back(d.mesh_ptr());
    path.potentials.push_back(std::move(alpha));
    path.step_diagnostics.push_back(step);
  }

  double continuity_rel = 0.0;
  bool continuity_checked = false;
  if (path.sample_count() >= 3) {
    const ContinuityReport continuity = verify_continuity(path);
    double sigmax = 0.0;
    for (double s : continuity.signal) sigmax = std::max(sigmax, s);
    continuity_rel =
        continuity.max_relative_residual(std::max(0.01 * sigmax, 1e-9));
    continuity_checked = true;
    UniformityReport uniformity = density_uniformity(path, o.particles);
    annotate_diagnostics(path, &continuity, &uniformity);
  } else if (path.sample_count() >= 2) {
    UniformityReport uniformity = density_uniformity(path, o.particles);
    annotate_diagnostics(path, nullptr, &uniformity);
  }

  double uniformity_worst = 0.0;
  double mass_worst = 0.0;
  double quadrature_worst = 0.0;
  for (const GeodesicStep& s : path.step_diagnostics) {
    if (std::isfinite(s.uniformity_std))
      uniformity_worst = std::max(uniformity_worst, s.uniformity_std);
    mass_worst = std::max(mass_worst, s.mass_identity_error);
    quadrature_worst = std::max(quadrature_worst, s.mass_quadrature_error);
  }

  const fs::path out_dir = o.output.empty() ? dir / "verify" : fs::path(o.output);
  std::string csv =
      "t,kinetic_norm,area,mass_identity_error,mass_quadrature_error,"
      "continuity_residual,uniformity_std\n";
  for (const GeodesicStep& s : path.step_diagnostics) {
    csv += format_double(s.time);
    csv += ',';
    csv += format_double(s.kinetic_norm);
    csv += ',';
    csv += format_double(s.area);
    csv += ',';
    csv += format_double(s.mass_identity_error);
    csv += ',';
    csv += format_double(s.mass_quadrature_error);
    csv += ',';
    csv += format_double(s.continuity_residual);
    csv += ',';
    csv += format_double(s.uniformity_std);
    csv += '\n';
  }
  write_text_file(out_dir / "verify.csv", csv);
  write_json_file(out_dir / "run.json",
                  ordered_json{{"command", "verify"},
                               {"input", o.input},
                               {"mesh_size", h},
                               {"continuity_tol", o.continuity_tol},
                               {"uniformity_tol", o.uniformity_tol},
                               {"mass_tol", o.mass_tol},
                               {"quadrature_tol", o.quadrature_tol},
                               {"particles", o.particles},
                               {"output", out_dir.string()}});

  bool pass = true;
  if (continuity_checked) {
    const bool ok = continuity_rel <= o.continuity_tol;
    pass = pass && ok;
    std::printf("continuity: max relative residual %s (tol %s) %s\n",
                format_double(continuity_rel).c_str(),
                format_double(o.continuity_tol).c_str(), ok ? "ok" : "FAIL");
  } else {
    std::printf("continuity: skipped (needs at least 3 samples)\n");
  }
  const bool uni_ok = uniformity_worst <= o.uniformity_tol;
  pass = pass && uni_ok;
  std::printf("uniformity: max log-detJ spread %s (tol %s) %s\n",
              format_double(uniformity_worst).c_str(),
              format_double(o.uniformity_tol).c_str(), uni_ok ? "ok" : "FAIL");
  const bool mass_ok = mass_worst <= o.mass_tol && quadrature_worst <= o.quadrature_tol;
  pass = pass && mass_ok;
  std::printf("mass: identity error %s (tol %s), quadrature error %s (tol %s) %s\n",
              format_double(mass_worst).c_str(), format_double(o.mass_tol).c_str(),
              format_double(quadrature_worst).c_str(),
              format_double(o.quadrature_tol).c_str(), mass_ok ? "ok" : "FAIL");
  std::printf("verify: %s\n", pass ? "PASS" : "FAIL");
  return pass ? kExitSuccess : kExitNumerical;
}

// ---------------------------------------------------------------------------
// render
// ---------------------------------------------------------------------------

struct RenderCmdOpts {
  std::string input;
  std::string output;
  double mesh_size = 0.0;  // 0: contour outline only
  RenderOpts render;
};

int run_render(const RenderCmdOpts& o) {
  const Contour c = loading([&] { return load_contour_json(o.input); });

  std::string svg;
  if (o.mesh_size > 0.0) {
    const ShapeDomain d(c, o.mesh_size);
    svg = render_mesh_svg(d.mesh(), o.render.style());
  } else {
    svg = render_contour_svg(c, o.render.style());
  }

  const fs::path dir(o.output);
  write_text_file(dir / "render.svg", svg);
  write_json_file(dir / "run.json", ordered_json{{"command", "render"},
                                                 {"input", o.input},
                                                 {"mesh_size", o.mesh_size},
                                                 {"output", o.output},
                                                 {"render", o.render.echo()}});
  std::printf("render: wrote %s\n", (dir / "render.svg").string().c_str());
  return kExitSuccess;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "shapeflow: constant-divergence flows, transport decompositions, and\n"
      "geodesic shooting on closed planar contours.\n\n"
      "Boundary-field specs: terms joined by '+', each 'const:<v>', 'cos:<k>',\n"
      "'sin:<k>' (k-th harmonic over the sample index), or 'file:<path>'\n"
      "({\"values\": [...]}).\n\n"
      "Exit codes: 0 success, 1 numerical failure or failed verification,\n"
      "2 usage/format error, 3 geodesic breakdown."};
  app.require_subcommand(1);
  app.set_version_flag("--version", "shapeflow 0.1.0");

  std::function<int()> run;

  GenerateOpts gen;
  CLI::App* cmd = app.add_subcommand(
      "generate", "Write a canonical contour as JSON ({\"points\": [[x, y], ...]}).");
  cmd->add_option("--kind", gen.kind, "circle | ellipse | star | bump")
      ->required()
      ->check(CLI::IsMember({"circle", "ellipse", "star", "bump"}));
  cmd->add_option("--samples", gen.samples, "number of contour samples")
      ->check(CLI::Range(16, 100000))
      ->capture_default_str();
  cmd->add_option("--radius", gen.radius, "radius (circle, star, bump)")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  cmd->add_option("--semi-a", gen.semi_a, "ellipse semi-axis along x")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  cmd->add_option("--semi-b", gen.semi_b, "ellipse semi-axis along y")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  cmd->add_option("--amplitude", gen.amplitude,
                  "star: lobe amplitude (r = R(1 + a/n sin(n t))); bump: radial bump height")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  cmd->add_option("--lobes", gen.lobes, "star lobe count")
      ->check(CLI::Range(1, 64))
      ->capture_default_str();
  cmd->add_option("--bump-width", gen.width, "bump angular width (radians)")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  cmd->add_option("--bump-center", gen.center, "bump center angle (radians)")
      ->capture_default_str();
  cmd->add_option("--output", gen.output, "output directory (contour.json, run.json)")
      ->required();
  cmd->callback([&] { run = [&] { return run_generate(gen); }; });

  LiftOpts lift_opts;
  cmd = app.add_subcommand(
      "lift",
      "Lift a boundary normal-speed field to its interior flow. Writes\n"
      "potential.csv (vertex,u,S; S is the constant interior divergence),\n"
      "gradient.csv (triangle,gx,gy), lift.svg, run.json.");
  cmd->add_option("--input", lift_opts.input, "contour JSON file")->required();
  cmd->add_option("--field", lift_opts.field, "boundary-field spec")->required();
  cmd->add_option("--mesh-size", lift_opts.mesh_size, "target interior edge length")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  cmd->add_option("--output", lift_opts.output, "output directory")->required();
  lift_opts.render.attach(cmd);
  cmd->callback([&] { run = [&] { return run_lift(lift_opts); }; });

  DecomposeOpts dec_opts;
  cmd = app.add_subcommand(
      "decompose",
      "Split a lifted field into translation + scale + deformation. Writes\n"
      "decomposition.json (v_trans, lambda, norms, orthogonality residuals,\n"
      "reconstruction residual) and run.json.");
  cmd->add_option("--input", dec_opts.input, "contour JSON file")->required();
  cmd->add_option("--field", dec_opts.field, "boundary-field spec")->required();
  cmd->add_option("--mesh-size", dec_opts.mesh_size, "target interior edge length")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  cmd->add_option("--output", dec_opts.output, "output directory")->required();
  cmd->callback([&] { run = [&] { return run_decompose(dec_opts); }; });

  GeodesicOpts geo;
  cmd = app.add_subcommand(
      "geodesic",
      "Shoot the geodesic flow from a contour and an initial normal speed.\n"
      "Writes contour_NNNN.json + speed_NNNN.json per stored sample,\n"
      "diagnostics.csv (t,length_increment,continuity_residual,uniformity_std),\n"
      "trajectories.csv (time,particle,x,y), filmstrip.svg, trajectories.svg,\n"
      "run.json. Breakdown keeps the partial path and exits with code 3.");
  cmd->add_option("--input", geo.input, "contour JSON file")->required();
  cmd->add_option("--field", geo.field, "boundary-field spec (initial normal speed)")
      ->required();
  cmd->add_option("--mesh-size", geo.mesh_size, "target interior edge length")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  cmd->add_option("--horizon", geo.horizon, "integration time T")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  CLI::Option* steps_opt = cmd->add_option("--steps", geo.steps, "number of time steps")
                               ->check(CLI::Range(8, 100000))
                               ->capture_default_str();
  cmd->add_option("--dt", geo.dt, "time step; alternative to --steps (steps = horizon/dt)")
      ->check(CLI::PositiveNumber)
      ->excludes(steps_opt);
  cmd->add_option("--relift-period", geo.relift_period,
                  "re-impose the constant-divergence constraint every k-th step")
      ->check(CLI::Range(1, 1000000))
      ->capture_default_str();
  cmd->add_option("--particles", geo.particles, "tracer particles for the audits")
      ->check(CLI::Range(1, 100000))
      ->capture_default_str();
  cmd->add_option("--output", geo.output, "output directory")->required();
  geo.render.attach(cmd);
  cmd->callback([&] { run = [&] { return run_geodesic(geo); }; });

  VerifyOpts ver;
  cmd = app.add_subcommand(
      "verify",
      "Re-derive a stored geodesic path and audit it. Writes verify.csv\n"
      "(t,kinetic_norm,area,mass_identity_error,mass_quadrature_error,\n"
      "continuity_residual,uniformity_std) and run.json into --output\n"
      "(default <input>/verify). Exits 0 iff every audit is below tolerance.");
  cmd->add_option("--input", ver.input, "path directory written by geodesic")->required();
  cmd->add_option("--mesh-size", ver.mesh_size,
                  "mesh size for re-lifting (default: mesh_size from run.json)")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--continuity-tol", ver.continuity_tol,
                  "max relative continuity residual")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  cmd->add_option("--uniformity-tol", ver.uniformity_tol, "max log-detJ spread")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  cmd->add_option("--mass-tol", ver.mass_tol, "max area*density deviation from 1")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  cmd->add_option("--quadrature-tol", ver.quadrature_tol,
                  "max mesh quadrature deviation from 1")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  cmd->add_option("--particles", ver.particles, "tracer particles for the audits")
      ->check(CLI::Range(1, 100000))
      ->capture_default_str();
  cmd->add_option("--output", ver.output, "output directory");
  cmd->callback([&] { run = [&] { return run_verify(ver); }; });

  RenderCmdOpts ren;
  cmd = app.add_subcommand("render",
                           "Render a contour (optionally with its triangulation) to\n"
                           "render.svg.");
  cmd->add_option("--input", ren.input, "contour JSON file")->required();
  cmd->add_option("--mesh-size", ren.mesh_size,
                  "triangulate at this edge length and draw the mesh")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--output", ren.output, "output directory")->required();
  ren.render.attach(cmd);
  cmd->callback([&] { run = [&] { return run_render(ren); }; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitSuccess : kExitUsage;
  }

  try {
    return run();
  } catch (const UsageError& e) {
    std::fprintf(stderr, "shapeflow: %s\n", e.what());
    return kExitUsage;
  } catch (const InvalidArgument& e) {
    std::fprintf(stderr, "shapeflow: %s\n", e.what());
    return kExitUsage;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "shapeflow: %s\n", e.what());
    return kExitNumerical;
  }
}
