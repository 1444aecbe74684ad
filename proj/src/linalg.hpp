#pragma once

#include <span>
#include <vector>

#include "mesh.hpp"
#include "sparse_matrix.hpp"

namespace bsfree {

struct CgConfig {
  double rel_tol = 1e-10;
  double abs_tol = 1e-14;
  /// 0 selects 10 * n.
  int max_iter = 0;
  /// When the true residual stalls above the target but below
  /// stagnation_tol * ||b||, the iterate is accepted instead of failing.
  double stagnation_tol = 0.0;
};

struct CgResult {
  std::vector<double> x;
  int iterations = 0;
  double residual = 0.0;  // true residual 2-norm at exit
};

/// Jacobi-preconditioned conjugate gradients for SPD systems. Stops once the
/// true residual satisfies ||b - Ax|| <= rel_tol * ||b|| + abs_tol; throws
/// SolverError carrying the last residual otherwise.
CgResult cg_solve(const SparseMatrix& a, std::span<const double> b, const CgConfig& cfg = {},
                  std::span<const double> x0 = {});

struct PsorConfig {
  double omega = 1.5;
  double update_tol = 1e-10;
  double comp_tol = 1e-8;
  /// 0 selects 50 * n.
  int max_sweeps = 0;
  /// Keep J(x) = x'Ax/2 - b'x after every sweep.
  bool record_energy = false;

  void validate() const;
  bool operator==(const PsorConfig&) const = default;
};

/// Solution of min x'Ax/2 - b'x subject to x_i >= 0 on a subset of unknowns.
struct ObstacleSolution {
  std::vector<double> x;
  /// b - Ax: nonpositive on constrained unknowns, ~0 elsewhere.
  std::vector<double> multiplier;
  int sweeps = 0;
  double max_update = 0.0;
  double complementarity = 0.0;
  std::vector<double> energy;
};

/// Projected SOR in natural node order. Converged when the largest nodal
/// update is below update_tol and the complementarity residual is below
/// comp_tol.
ObstacleSolution psor_solve(const SparseMatrix& a, std::span<const double> b, std::span<const Index> constrained,
                            const PsorConfig& cfg = {}, std::span<const double> x0 = {});
ObstacleSolution psor_solve(const DenseMatrix& a, std::span<const double> b, std::span<const Index> constrained,
                            const PsorConfig& cfg = {}, std::span<const double> x0 = {});

/// Complementarity residual of (x, b - Ax) for the given constraint mask.
double complementarity_residual(std::span<const double> x, std::span<const double> multiplier,
                                std::span<const char> constrained_mask);

}  // namespace bsfree
