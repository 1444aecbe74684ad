#include "fem.hpp"

#include <algorithm>
#include <cmath>

#include "error.hpp"

namespace bsfree {

namespace {

struct ElementGeometry {
  double area;
  // Gradients of the three barycentric coordinates.
  double gx[3];
  double gy[3];
};

ElementGeometry element_geometry(const Mesh& mesh, Index t) {
  const auto& tri = mesh.triangles()[t];
  const Point& p0 = mesh.vertices()[tri[0]];
  const Point& p1 = mesh.vertices()[tri[1]];
  const Point& p2 = mesh.vertices()[tri[2]];
  const double twice_area = (p1.x - p0.x) * (p2.y - p0.y) - (p2.x - p0.x) * (p1.y - p0.y);
  const double scale = std::max({std::abs(p1.x - p0.x), std::abs(p1.y - p0.y), std::abs(p2.x - p0.x),
                                 std::abs(p2.y - p0.y)});
  if (!(twice_area > 1e-14 * scale * scale))
    throw AssemblyError("degenerate triangle " + std::to_string(t) + " in assembly");
  ElementGeometry g{};
  g.area = 0.5 * twice_area;
  const Point* p[3] = {&p0, &p1, &p2};
  for (int i = 0; i < 3; ++i) {
    const Point& a = *p[(i + 1) % 3];
    const Point& b = *p[(i + 2) % 3];
    g.gx[i] = (a.y - b.y) / twice_area;
    g.gy[i] = (b.x - a.x) / twice_area;
  }
  return g;
}

double segment_length(const Mesh& mesh, const std::array<Index, 2>& s) {
  const Point& a = mesh.vertices()[s[0]];
  const Point& b = mesh.vertices()[s[1]];
  const double h = std::hypot(b.x - a.x, b.y - a.y);
  if (!(h > 0.0)) throw AssemblyError("zero-length surface segment");
  return h;
}

}  // namespace

SparseMatrix bulk_stiffness(const Mesh& mesh) {
  std::vector<Triplet> t;
  t.reserve(9 * mesh.num_triangles());
  for (Index e = 0; e < mesh.num_triangles(); ++e) {
    const auto g = element_geometry(mesh, e);
    const auto& tri = mesh.triangles()[e];
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) t.push_back({tri[i], tri[j], g.area * (g.gx[i] * g.gx[j] + g.gy[i] * g.gy[j])});
  }
  const std::size_t n = mesh.num_vertices();
  return SparseMatrix::from_triplets(n, n, std::move(t), true);
}

SparseMatrix bulk_mass(const Mesh& mesh, MassKind kind) {
  if (kind == MassKind::Lumped) return SparseMatrix::diagonal_matrix(bulk_mass_lumped(mesh));
  std::vector<Triplet> t;
  t.reserve(9 * mesh.num_triangles());
  for (Index e = 0; e < mesh.num_triangles(); ++e) {
    const double a = element_geometry(mesh, e).area;
    const auto& tri = mesh.triangles()[e];
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) t.push_back({tri[i], tri[j], a / 12.0 * (i == j ? 2.0 : 1.0)});
  }
  const std::size_t n = mesh.num_vertices();
  return SparseMatrix::from_triplets(n, n, std::move(t), true);
}

std::vector<double> bulk_mass_lumped(const Mesh& mesh) {
  std::vector<double> m(mesh.num_vertices(), 0.0);
  for (Index e = 0; e < mesh.num_triangles(); ++e) {
    const double a = element_geometry(mesh, e).area;
    for (Index v : mesh.triangles()[e]) m[v] += a / 3.0;
  }
  return m;
}

SparseMatrix surface_stiffness(const Mesh& mesh) {
  std::vector<Triplet> t;
  t.reserve(4 * mesh.surface_segments().size());
  for (const auto& s : mesh.surface_segments()) {
    const double h = segment_length(mesh, s);
    const Index a = mesh.surface_index(s[0]), b = mesh.surface_index(s[1]);
    t.push_back({a, a, 1.0 / h});
    t.push_back({a, b, -1.0 / h});
    t.push_back({b, a, -1.0 / h});
    t.push_back({b, b, 1.0 / h});
  }
  const std::size_t n = mesh.num_surface_nodes();
  return SparseMatrix::from_triplets(n, n, std::move(t), true);
}

std::vector<double> surface_mass_lumped(const Mesh& mesh) {
  std::vector<double> m(mesh.num_surface_nodes(), 0.0);
  for (const auto& s : mesh.surface_segments()) {
    const double h = segment_length(mesh, s);
    m[mesh.surface_index(s[0])] += 0.5 * h;
    m[mesh.surface_index(s[1])] += 0.5 * h;
  }
  return m;
}

SparseMatrix surface_mass(const Mesh& mesh, MassKind kind) {
  if (kind == MassKind::Lumped) return SparseMatrix::diagonal_matrix(surface_mass_lumped(mesh));
  std::vector<Triplet> t;
  t.reserve(4 * mesh.surface_segments().size());
  for (const auto& s : mesh.surface_segments()) {
    const double h = segment_length(mesh, s);
    const Index a = mesh.surface_index(s[0]), b = mesh.surface_index(s[1]);
    t.push_back({a, a, h / 3.0});
    t.push_back({a, b, h / 6.0});
    t.push_back({b, a, h / 6.0});
    t.push_back({b, b, h / 3.0});
  }
  const std::size_t n = mesh.num_surface_nodes();
  return SparseMatrix::from_triplets(n, n, std::move(t), true);
}

SparseMatrix trace_coupling(const Mesh& mesh, MassKind kind) {
  const SparseMatrix ms = surface_mass(mesh, kind);
  std::vector<Triplet> t;
  t.reserve(ms.nnz());
  for (Index i = 0; i < ms.rows(); ++i)
    for (Index k = ms.row_ptr()[i]; k < ms.row_ptr()[i + 1]; ++k)
      t.push_back({mesh.surface_nodes()[i], ms.col_idx()[k], ms.values()[k]});
  return SparseMatrix::from_triplets(mesh.num_vertices(), mesh.num_surface_nodes(), std::move(t), false);
}

std::vector<double> restrict_to_surface(const Mesh& mesh, std::span<const double> bulk) {
  std::vector<double> s(mesh.num_surface_nodes());
  for (std::size_t i = 0; i < s.size(); ++i) s[i] = bulk[mesh.surface_nodes()[i]];
  return s;
}

void add_from_surface(const Mesh& mesh, std::span<const double> surface, std::span<double> bulk) {
  for (std::size_t i = 0; i < surface.size(); ++i) bulk[mesh.surface_nodes()[i]] += surface[i];
}

DirichletElimination::DirichletElimination(const SparseMatrix& a, std::span<const Index> nodes)
    : nodes_(nodes.begin(), nodes.end()), mask_(a.rows(), 0) {
  if (a.rows() != a.cols()) throw Error("Dirichlet elimination needs a square matrix");
  for (Index v : nodes_) {
    if (v >= a.rows()) throw Error("Dirichlet node " + std::to_string(v) + " out of range");
    mask_[v] = 1;
  }
  std::vector<Triplet> kept, removed;
  kept.reserve(a.nnz());
  for (Index i = 0; i < a.rows(); ++i) {
    if (mask_[i]) {
      kept.push_back({i, i, 1.0});
      continue;
    }
    for (Index k = a.row_ptr()[i]; k < a.row_ptr()[i + 1]; ++k) {
      const Index j = a.col_idx()[k];
      if (mask_[j])
        removed.push_back({i, j, a.values()[k]});
      else
        kept.push_back({i, j, a.values()[k]});
    }
  }
  reduced_ = SparseMatrix::from_triplets(a.rows(), a.cols(), std::move(kept), a.symmetric());
  coupling_ = SparseMatrix::from_triplets(a.rows(), a.cols(), std::move(removed), false);
}

std::vector<double> DirichletElimination::apply_rhs(std::span<const double> rhs,
                                                    std::span<const double> values) const {
  std::vector<double> full(mask_.size(), 0.0);
  for (std::size_t k = 0; k < nodes_.size(); ++k) full[nodes_[k]] = values[k];
  std::vector<double> out = coupling_.multiply(full);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = mask_[i] ? full[i] : rhs[i] - out[i];
  return out;
}

std::vector<double> DirichletElimination::apply_rhs(std::span<const double> rhs, double value) const {
  std::vector<double> values(nodes_.size(), value);
  return apply_rhs(rhs, values);
}

std::pair<SparseMatrix, std::vector<double>> apply_dirichlet(const SparseMatrix& a, std::span<const double> rhs,
                                                             std::span<const Index> nodes, double value) {
  DirichletElimination elim(a, nodes);
  return {elim.matrix(), elim.apply_rhs(rhs, value)};
}

}  // namespace bsfree
