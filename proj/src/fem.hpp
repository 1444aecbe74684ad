#pragma once

#include <span>
#include <utility>
#include <vector>

#include "mesh.hpp"
#include "sparse_matrix.hpp"

namespace bsfree {

enum class MassKind { Consistent, Lumped };

/// Nodal P1 coefficients on the bulk mesh.
struct BulkField {
  std::vector<double> values;
};

/// Nodal P1 coefficients on the surface, indexed like Mesh::surface_nodes().
struct SurfaceField {
  std::vector<double> values;
};

/// P1 stiffness matrix of the bulk Laplacian.
SparseMatrix bulk_stiffness(const Mesh& mesh);
SparseMatrix bulk_mass(const Mesh& mesh, MassKind kind = MassKind::Lumped);

/// Laplace-Beltrami stiffness on the polygonal surface (surface indexing).
SparseMatrix surface_stiffness(const Mesh& mesh);
SparseMatrix surface_mass(const Mesh& mesh, MassKind kind = MassKind::Lumped);

/// Lumped surface mass as a vector.
std::vector<double> surface_mass_lumped(const Mesh& mesh);
std::vector<double> bulk_mass_lumped(const Mesh& mesh);

/// Rectangular bulk-by-surface operator: column j integrates the surface
/// basis function j against the traces of the bulk basis functions.
SparseMatrix trace_coupling(const Mesh& mesh, MassKind kind = MassKind::Lumped);

/// Bulk values at the surface nodes.
std::vector<double> restrict_to_surface(const Mesh& mesh, std::span<const double> bulk);
/// Adds surface values into the bulk vector at the trace indices.
void add_from_surface(const Mesh& mesh, std::span<const double> surface, std::span<double> bulk);

/// Symmetric elimination of prescribed nodal values.
///
/// The reduced matrix has the constrained rows and columns replaced by unit
/// rows, so it stays symmetric. The removed column block is kept so that
/// right-hand sides can be corrected repeatedly without reassembly.
class DirichletElimination {
 public:
  DirichletElimination(const SparseMatrix& a, std::span<const Index> nodes);

  const SparseMatrix& matrix() const noexcept { return reduced_; }
  const std::vector<Index>& nodes() const noexcept { return nodes_; }
  bool constrained(Index i) const noexcept { return mask_[i] != 0; }

  /// Free rows get rhs - A[:, nodes] * values, constrained rows get the value.
  std::vector<double> apply_rhs(std::span<const double> rhs, std::span<const double> values) const;
  std::vector<double> apply_rhs(std::span<const double> rhs, double value) const;

 private:
  SparseMatrix reduced_;
  SparseMatrix coupling_;  // A restricted to constrained columns, free rows
  std::vector<Index> nodes_;
  std::vector<char> mask_;
};

std::pair<SparseMatrix, std::vector<double>> apply_dirichlet(const SparseMatrix& a, std::span<const double> rhs,
                                                             std::span<const Index> nodes, double value);

/// Lagrange interpolation of a function of position at the bulk vertices.
template <typename F>
std::vector<double> interpolate_bulk(const Mesh& mesh, F&& f) {
  std::vector<double> v(mesh.num_vertices());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = f(mesh.vertices()[i]);
  return v;
}

/// Lagrange interpolation at the surface nodes.
template <typename F>
std::vector<double> interpolate_surface(const Mesh& mesh, F&& f) {
  std::vector<double> v(mesh.num_surface_nodes());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = f(mesh.vertices()[mesh.surface_nodes()[i]]);
  return v;
}

}  // namespace bsfree
