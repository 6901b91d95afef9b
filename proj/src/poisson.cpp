#include "shapeflow/poisson.hpp"

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseLU>
#include <array>
#include <cmath>
#include <cstdint>

#include "shapeflow/errors.hpp"

namespace shapeflow {

namespace {

using SpMat = Eigen::SparseMatrix<double>;
using Triplet = Eigen::Triplet<double>;

constexpr double kResidualTol = 1e-10;
constexpr double kCompatibilityTol = 1e-8;

}  // namespace

struct PoissonSolver::Impl {
  const TriMesh* mesh = nullptr;
  double area = 0.0;
  double k_inf_norm = 0.0;
  std::vector<double> tri_area;
  std::vector<std::array<Vec2, 3>> hat_grads;  // per triangle, per corner
  SpMat K;
  Eigen::VectorXd w;               // exact integral of each hat function
  std::vector<double> w_as_std;    // same values, plain-vector view
  std::vector<std::int64_t> interior_of;
  std::vector<std::uint32_t> interior_verts;

  // Factorizations are built on first use.
  mutable std::unique_ptr<Eigen::SparseLU<SpMat>> neumann_lu;
  mutable std::unique_ptr<Eigen::SimplicialLDLT<SpMat>> dirichlet_ldlt;
  mutable SpMat A_aug;
  mutable SpMat K_II;

  void assemble();
  void ensure_neumann() const;
  void ensure_dirichlet() const;
  Eigen::VectorXd dirichlet_solve(const Eigen::VectorXd& load_interior) const;
};

void PoissonSolver::Impl::assemble() {
  const TriMesh& m = *mesh;
  const std::size_t nv = m.vertex_count();
  const std::size_t nt = m.triangle_count();
  tri_area.resize(nt);
  hat_grads.resize(nt);
  w = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(nv));

  std::vector<Triplet> trips;
  trips.reserve(nt * 9);
  area = 0.0;
  for (std::size_t t = 0; t < nt; ++t) {
    const auto& tri = m.triangles[t];
    const Vec2& a = m.vertices[tri[0]];
    const Vec2& b = m.vertices[tri[1]];
    const Vec2& c = m.vertices[tri[2]];
    const double A = 0.5 * cross(b - a, c - a);
    if (!(A > 0.0)) throw DegenerateGeometry("solver requires positively oriented triangles");
    tri_area[t] = A;
    area += A;
    const double inv2A = 1.0 / (2.0 * A);
    // Gradient of the hat function at corner k is perpendicular to the
    // opposite edge, scaled by 1 / (2 area).
    hat_grads[t][0] = rotate_cw(b - c) * inv2A;
    hat_grads[t][1] = rotate_cw(c - a) * inv2A;
    hat_grads[t][2] = rotate_cw(a - b) * inv2A;
    for (int i = 0; i < 3; ++i) {
      w[tri[i]] += A / 3.0;
      for (int j = 0; j < 3; ++j)
        trips.emplace_back(static_cast<int>(tri[i]), static_cast<int>(tri[j]),
                           A * dot(hat_grads[t][i], hat_grads[t][j]));
    }
  }
  K.resize(static_cast<Eigen::Index>(nv), static_cast<Eigen::Index>(nv));
  K.setFromTriplets(trips.begin(), trips.end());
  K.makeCompressed();

  // Infinity norm via column traversal (K is symmetric, so row and column
  // sums of absolute values agree).
  Eigen::VectorXd abs_sums = Eigen::VectorXd::Zero(K.rows());
  for (Eigen::Index col = 0; col < K.outerSize(); ++col)
    for (SpMat::InnerIterator it(K, col); it; ++it) abs_sums[it.row()] += std::fabs(it.value());
  k_inf_norm = abs_sums.maxCoeff();

  w_as_std.assign(w.data(), w.data() + w.size());

  interior_of.assign(nv, -1);
  for (std::uint32_t v = 0; v < nv; ++v) {
    if (!m.is_boundary_vertex(v)) {
      interior_of[v] = static_cast<std::int64_t>(interior_verts.size());
      interior_verts.push_back(v);
    }
  }
}

void PoissonSolver::Impl::ensure_neumann() const {
  if (neumann_lu) return;
  const Eigen::Index n = K.rows();
  std::vector<Triplet> trips;
  trips.reserve(static_cast<std::size_t>(K.nonZeros()) + 2 * static_cast<std::size_t>(n));
  for (Eigen::Index col = 0; col < K.outerSize(); ++col)
    for (SpMat::InnerIterator it(K, col); it; ++it)
      trips.emplace_back(static_cast<int>(it.row()), static_cast<int>(it.col()), it.value());
  // Mean-value constraint row/column removes the constant nullspace without
  // distorting the solution at any particular vertex.
  for (Eigen::Index i = 0; i < n; ++i) {
    trips.emplace_back(static_cast<int>(i), static_cast<int>(n), w[i]);
    trips.emplace_back(static_cast<int>(n), static_cast<int>(i), w[i]);
  }
  A_aug.resize(n + 1, n + 1);
  A_aug.setFromTriplets(trips.begin(), trips.end());
  A_aug.makeCompressed();
  neumann_lu = std::make_unique<Eigen::SparseLU<SpMat>>();
  neumann_lu->compute(A_aug);
  if (neumann_lu->info() != Eigen::Success)
    throw SolverFailure("factorization of the constrained flux system failed");
}

void PoissonSolver::Impl::ensure_dirichlet() const {
  if (dirichlet_ldlt) return;
  const std::size_t ni = interior_verts.size();
  if (ni == 0) throw DegenerateGeometry("mesh has no interior vertices");
  std::vector<Triplet> trips;
  for (Eigen::Index col = 0; col < K.outerSize(); ++col) {
    const std::int64_t jc = interior_of[static_cast<std::size_t>(col)];
    if (jc < 0) continue;
    for (SpMat::InnerIterator it(K, col); it; ++it) {
      const std::int64_t ir = interior_of[static_cast<std::size_t>(it.row())];
      if (ir < 0) continue;
      trips.emplace_back(static_cast<int>(ir), static_cast<int>(jc), it.value());
    }
  }
  K_II.resize(static_cast<Eigen::Index>(ni), static_cast<Eigen::Index>(ni));
  K_II.setFromTriplets(trips.begin(), trips.end());
  K_II.makeCompressed();
  dirichlet_ldlt = std::make_unique<Eigen::SimplicialLDLT<SpMat>>();
  dirichlet_ldlt->compute(K_II);
  if (dirichlet_ldlt->info() != Eigen::Success)
    throw SolverFailure("factorization of the zero-boundary system failed");
}

Eigen::VectorXd PoissonSolver::Impl::dirichlet_solve(const Eigen::VectorXd& load_interior) const {
  ensure_dirichlet();
  Eigen::VectorXd x = dirichlet_ldlt->solve(load_interior);
  if (dirichlet_ldlt->info() != Eigen::Success)
    throw SolverFailure("zero-boundary solve failed");
  const double denom = load_interior.norm() + k_inf_norm * x.norm() + 1e-300;
  const double resid = (K_II * x - load_interior).norm();
  if (resid > kResidualTol * denom)
    throw SolverFailure("zero-boundary solve exceeded the residual tolerance");
  return x;
}

PoissonSolver::PoissonSolver(const TriMesh& m) : impl_(std::make_unique<Impl>()) {
  impl_->mesh = &m;
  impl_->assemble();
}

PoissonSolver::~PoissonSolver() = default;
PoissonSolver::PoissonSolver(PoissonSolver&&) noexcept = default;
PoissonSolver& PoissonSolver::operator=(PoissonSolver&&) noexcept = default;

const TriMesh& PoissonSolver::mesh() const { return *impl_->mesh; }
double PoissonSolver::area() const { return impl_->area; }

ScalarField PoissonSolver::solve_neumann(const BoundaryScalarField& g, double S) const {
  const TriMesh& m = *impl_->mesh;
  const std::size_t nb = m.boundary_count;
  if (g.size() != nb)
    throw InvalidArgument("boundary data length does not match the mesh boundary");

  // Discrete compatibility: the prescribed interior divergence must balance
  // the net boundary flux.
  double flux = 0.0;
  Eigen::VectorXd load = Eigen::VectorXd::Zero(impl_->K.rows());
  for (std::size_t i = 0; i < nb; ++i) {
    const std::size_t j = (i + 1) % nb;
    const double L = dist(m.vertices[i], m.vertices[j]);
    flux += 0.5 * L * (g[i] + g[j]);
    load[static_cast<Eigen::Index>(i)] += L / 6.0 * (2.0 * g[i] + g[j]);
    load[static_cast<Eigen::Index>(j)] += L / 6.0 * (g[i] + 2.0 * g[j]);
  }
  const double s_compat = flux / impl_->area;
  if (std::fabs(S - s_compat) > kCompatibilityTol * std::max(1.0, std::fabs(s_compat)))
    throw IncompatibleData("prescribed divergence does not balance the boundary flux");

  load -= S * impl_->w;

  impl_->ensure_neumann();
  const Eigen::Index n = impl_->K.rows();
  Eigen::VectorXd b = Eigen::VectorXd::Zero(n + 1);
  b.head(n) = load;
  Eigen::VectorXd x = impl_->neumann_lu->solve(b);
  if (impl_->neumann_lu->info() != Eigen::Success)
    throw SolverFailure("constrained flux solve failed");
  const double denom = b.norm() + impl_->k_inf_norm * x.norm() + 1e-300;
  const double resid = (impl_->A_aug * x - b).norm();
  if (resid > kResidualTol * denom)
    throw SolverFailure("constrained flux solve exceeded the residual tolerance");

  ScalarField u;
  u.mesh = &m;
  u.values.resize(static_cast<std::size_t>(n));
  // Remove any residual weighted mean so the constant normalization is exact.
  const double mean = impl_->w.dot(x.head(n)) / impl_->area;
  for (Eigen::Index i = 0; i < n; ++i)
    u.values[static_cast<std::size_t>(i)] = x[i] - mean;
  return u;
}

ScalarField PoissonSolver::solve_dirichlet(double rhs) const {
  const TriMesh& m = *impl_->mesh;
  const std::size_t ni = impl_->interior_verts.size();
  Eigen::VectorXd load(static_cast<Eigen::Index>(ni));
  for (std::size_t k = 0; k < ni; ++k)
    load[static_cast<Eigen::Index>(k)] = -rhs * impl_->w[impl_->interior_verts[k]];
  const Eigen::VectorXd x = impl_->dirichlet_solve(load);
  ScalarField u;
  u.mesh = &m;
  u.values.assign(m.vertex_count(), 0.0);
  for (std::size_t k = 0; k < ni; ++k)
    u.values[impl_->interior_verts[k]] = x[static_cast<Eigen::Index>(k)];
  return u;
}

ScalarField PoissonSolver::solve_dirichlet_field(const ScalarField& uin) const {
  const TriMesh& m = *impl_->mesh;
  if (uin.mesh != &m || uin.values.size() != m.vertex_count())
    throw InvalidArgument("input potential lives on a different mesh");
  Eigen::VectorXd full = Eigen::Map<const Eigen::VectorXd>(
      uin.values.data(), static_cast<Eigen::Index>(uin.values.size()));
  Eigen::VectorXd action = impl_->K * full;
  const std::size_t ni = impl_->interior_verts.size();
  Eigen::VectorXd load(static_cast<Eigen::Index>(ni));
  for (std::size_t k = 0; k < ni; ++k)
    load[static_cast<Eigen::Index>(k)] = action[impl_->interior_verts[k]];
  const Eigen::VectorXd x = impl_->dirichlet_solve(load);
  ScalarField u;
  u.mesh = &m;
  u.values.assign(m.vertex_count(), 0.0);
  for (std::size_t k = 0; k < ni; ++k)
    u.values[impl_->interior_verts[k]] = x[static_cast<Eigen::Index>(k)];
  return u;
}

VectorField PoissonSolver::gradient(const ScalarField& u) const {
  const TriMesh& m = *impl_->mesh;
  if (u.mesh != &m || u.values.size() != m.vertex_count())
    throw InvalidArgument("potential lives on a different mesh");
  VectorField g;
  g.mesh = &m;
  g.gradients.resize(m.triangle_count());
  for (std::size_t t = 0; t < m.triangle_count(); ++t) {
    const auto& tri = m.triangles[t];
    Vec2 acc{0.0, 0.0};
    for (int k = 0; k < 3; ++k) acc = acc + impl_->hat_grads[t][k] * u.values[tri[k]];
    g.gradients[t] = acc;
  }
  return g;
}

double PoissonSolver::inner_product(const VectorField& a, const VectorField& b) const {
  const TriMesh& m = *impl_->mesh;
  if (a.mesh != &m || b.mesh != &m || a.gradients.size() != m.triangle_count() ||
      b.gradients.size() != m.triangle_count())
    throw InvalidArgument("fields live on a different mesh");
  double acc = 0.0;
  for (std::size_t t = 0; t < m.triangle_count(); ++t)
    acc += impl_->tri_area[t] * dot(a.gradients[t], b.gradients[t]);
  return acc / impl_->area;
}

DivergenceField PoissonSolver::divergence(const VectorField& a) const {
  const TriMesh& m = *impl_->mesh;
  if (a.mesh != &m || a.gradients.size() != m.triangle_count())
    throw InvalidArgument("field lives on a different mesh");
  DivergenceField d;
  d.mesh = &m;
  d.values.assign(m.vertex_count(), 0.0);
  d.boundary_vertex.assign(m.vertex_count(), 0);
  for (std::size_t t = 0; t < m.triangle_count(); ++t) {
    const auto& tri = m.triangles[t];
    for (int k = 0; k < 3; ++k)
      d.values[tri[k]] -= impl_->tri_area[t] * dot(a.gradients[t], impl_->hat_grads[t][k]);
  }
  for (std::uint32_t v = 0; v < m.vertex_count(); ++v) {
    d.values[v] /= impl_->w[v];
    if (m.is_boundary_vertex(v)) d.boundary_vertex[v] = 1;
  }
  return d;
}

std::vector<double> PoissonSolver::stiffness_action(const std::vector<double>& u) const {
  if (u.size() != impl_->mesh->vertex_count())
    throw InvalidArgument("vector length does not match the mesh");
  Eigen::VectorXd x = Eigen::Map<const Eigen::VectorXd>(u.data(), static_cast<Eigen::Index>(u.size()));
  Eigen::VectorXd y = impl_->K * x;
  return std::vector<double>(y.data(), y.data() + y.size());
}

const std::vector<double>& PoissonSolver::vertex_weights() const { return impl_->w_as_std; }

double PoissonSolver::stiffness_row_sum_max() const {
  Eigen::VectorXd ones = Eigen::VectorXd::Ones(impl_->K.rows());
  return (impl_->K * ones).cwiseAbs().maxCoeff();
}

ScalarField solve_neumann(const TriMesh& m, const BoundaryScalarField& g, double S) {
  return PoissonSolver(m).solve_neumann(g, S);
}
ScalarField solve_dirichlet(const TriMesh& m, double rhs) {
  return PoissonSolver(m).solve_dirichlet(rhs);
}
ScalarField solve_dirichlet_field(const TriMesh& m, const ScalarField& u) {
  return PoissonSolver(m).solve_dirichlet_field(u);
}
VectorField gradient(const ScalarField& u) {
  if (u.mesh == nullptr) throw InvalidArgument("potential has no mesh");
  return PoissonSolver(*u.mesh).gradient(u);
}
double inner_product(const TriMesh& m, const VectorField& a, const VectorField& b) {
  return PoissonSolver(m).inner_product(a, b);
}
DivergenceField divergence(const VectorField& a) {
  if (a.mesh == nullptr) throw InvalidArgument("field has no mesh");
  return PoissonSolver(*a.mesh).divergence(a);
}

DivergenceStats interior_divergence_stats(const DivergenceField& d) {
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t v = 0; v < d.values.size(); ++v) {
    if (!d.boundary_vertex[v]) {
      sum += d.values[v];
      ++n;
    }
  }
  DivergenceStats s;
  if (n == 0) return s;
  s.mean = sum / static_cast<double>(n);
  double var = 0.0;
  for (std::size_t v = 0; v < d.values.size(); ++v) {
    if (!d.boundary_vertex[v]) {
      const double dd = d.values[v] - s.mean;
      var += dd * dd;
    }
  }
  s.stddev = std::sqrt(var / static_cast<double>(n));
  return s;
}

}  // namespace shapeflow
