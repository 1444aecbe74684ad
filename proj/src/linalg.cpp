#include "linalg.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "error.hpp"

namespace bsfree {

CgResult cg_solve(const SparseMatrix& a, std::span<const double> b, const CgConfig& cfg,
                  std::span<const double> x0) {
  const std::size_t n = a.rows();
  if (a.cols() != n || b.size() != n) throw Error("cg_solve: dimension mismatch");
  if (!(cfg.rel_tol > 0.0) || !(cfg.abs_tol > 0.0) || cfg.max_iter < 0)
    throw ConfigError("", "cg: tolerances must be positive");
  const int max_iter = cfg.max_iter > 0 ? cfg.max_iter : static_cast<int>(10 * std::max<std::size_t>(n, 1));

  std::vector<double> inv_diag = a.diagonal();
  for (double& d : inv_diag) {
    if (!(d > 0.0)) throw SolverError("cg_solve: non-positive diagonal entry", 0.0, 0);
    d = 1.0 / d;
  }

  CgResult res;
  res.x.assign(n, 0.0);
  if (!x0.empty()) std::copy(x0.begin(), x0.end(), res.x.begin());

  const double tol = cfg.rel_tol * norm2(b) + cfg.abs_tol;
  std::vector<double> r(n), z(n), p(n), q(n);

  auto true_residual = [&] {
    a.multiply(res.x, q);
    for (std::size_t i = 0; i < n; ++i) r[i] = b[i] - q[i];
    return norm2(r);
  };

  double rnorm = true_residual();
  int it = 0;
  while (true) {
    if (rnorm <= tol) {
      res.iterations = it;
      res.residual = rnorm;
      return res;
    }
    // (Re)start from the current residual.
    for (std::size_t i = 0; i < n; ++i) z[i] = inv_diag[i] * r[i];
    p = z;
    double rz = dot(r, z);
    bool restarted = false;
    while (it < max_iter) {
      ++it;
      a.multiply(p, q);
      const double pq = dot(p, q);
      if (!(pq > 0.0)) break;
      const double alpha = rz / pq;
      for (std::size_t i = 0; i < n; ++i) {
        res.x[i] += alpha * p[i];
        r[i] -= alpha * q[i];
      }
      if (norm2(r) <= tol) {
        restarted = true;
        break;
      }
      for (std::size_t i = 0; i < n; ++i) z[i] = inv_diag[i] * r[i];
      const double rz_new = dot(r, z);
      const double beta = rz_new / rz;
      rz = rz_new;
      for (std::size_t i = 0; i < n; ++i) p[i] = z[i] + beta * p[i];
    }
    const double previous = rnorm;
    rnorm = true_residual();
    if (!std::isfinite(rnorm)) throw SolverError("cg_solve: non-finite residual", rnorm, it);
    if (rnorm <= tol) continue;
    // Recursive residual converged but the true one did not and cannot improve further.
    const bool stalled = it >= max_iter || !restarted || rnorm >= previous;
    if (stalled && rnorm <= cfg.stagnation_tol * norm2(b)) {
      res.iterations = it;
      res.residual = rnorm;
      return res;
    }
    if (stalled)
      throw SolverError("cg_solve: no convergence after " + std::to_string(it) +
                            " iterations (residual " + std::to_string(rnorm) + ")",
                        rnorm, it);
  }
}

void PsorConfig::validate() const {
  if (!(omega > 0.0 && omega < 2.0)) throw ConfigError("omega", "must lie in (0, 2)");
  if (!(update_tol > 0.0)) throw ConfigError("update_tol", "must be positive");
  if (!(comp_tol > 0.0)) throw ConfigError("comp_tol", "must be positive");
  if (max_sweeps < 0) throw ConfigError("max_sweeps", "must be nonnegative");
}

double complementarity_residual(std::span<const double> x, std::span<const double> multiplier,
                                std::span<const char> constrained_mask) {
  double r = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (constrained_mask[i]) {
      r = std::max({r, multiplier[i], -x[i], std::abs(x[i] * multiplier[i])});
    } else {
      r = std::max(r, std::abs(multiplier[i]));
    }
  }
  return r;
}

namespace {

// Row access shared by the sparse and dense kernels.
struct SparseRows {
  const SparseMatrix& a;
  std::size_t size() const { return a.rows(); }
  double diag(std::size_t i) const { return a.at(i, i); }
  double row_dot(std::size_t i, std::span<const double> x) const {
    double s = 0.0;
    for (Index k = a.row_ptr()[i]; k < a.row_ptr()[i + 1]; ++k) s += a.values()[k] * x[a.col_idx()[k]];
    return s;
  }
  void multiply(std::span<const double> x, std::span<double> y) const { a.multiply(x, y); }
};

struct DenseRows {
  const DenseMatrix& a;
  std::size_t size() const { return a.rows(); }
  double diag(std::size_t i) const { return a(i, i); }
  double row_dot(std::size_t i, std::span<const double> x) const { return dot(a.row(i), x); }
  void multiply(std::span<const double> x, std::span<double> y) const { a.multiply(x, y); }
};

template <typename Rows>
ObstacleSolution psor_kernel(const Rows& a, std::span<const double> b, std::span<const Index> constrained,
                             const PsorConfig& cfg, std::span<const double> x0) {
  cfg.validate();
  const std::size_t n = a.size();
  if (b.size() != n) throw Error("psor_solve: dimension mismatch");
  std::vector<char> mask(n, 0);
  for (Index i : constrained) {
    if (i >= n) throw Error("psor_solve: constrained index out of range");
    mask[i] = 1;
  }
  std::vector<double> diag(n);
  for (std::size_t i = 0; i < n; ++i) {
    diag[i] = a.diag(i);
    if (!(diag[i] > 0.0)) throw SolverError("psor_solve: non-positive diagonal entry", 0.0, 0);
  }
  const int max_sweeps = cfg.max_sweeps > 0 ? cfg.max_sweeps : static_cast<int>(50 * std::max<std::size_t>(n, 1));

  ObstacleSolution sol;
  sol.x.assign(n, 0.0);
  if (!x0.empty()) std::copy(x0.begin(), x0.end(), sol.x.begin());
  for (std::size_t i = 0; i < n; ++i)
    if (mask[i]) sol.x[i] = std::max(0.0, sol.x[i]);
  sol.multiplier.assign(n, 0.0);

  auto energy = [&] {
    std::vector<double> ax(n);
    a.multiply(sol.x, ax);
    return 0.5 * dot(sol.x, ax) - dot(b, sol.x);
  };
  auto refresh_multiplier = [&] {
    a.multiply(sol.x, sol.multiplier);
    for (std::size_t i = 0; i < n; ++i) sol.multiplier[i] = b[i] - sol.multiplier[i];
    sol.complementarity = complementarity_residual(sol.x, sol.multiplier, mask);
  };

  if (cfg.record_energy) sol.energy.push_back(energy());
  for (int sweep = 1; sweep <= max_sweeps; ++sweep) {
    double max_update = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double residual = b[i] - a.row_dot(i, sol.x);
      double xi = sol.x[i] + cfg.omega * residual / diag[i];
      if (mask[i]) xi = std::max(0.0, xi);
      max_update = std::max(max_update, std::abs(xi - sol.x[i]));
      sol.x[i] = xi;
    }
    sol.sweeps = sweep;
    sol.max_update = max_update;
    if (!std::isfinite(max_update)) throw SolverError("psor_solve: non-finite iterate", max_update, sweep);
    if (cfg.record_energy) sol.energy.push_back(energy());
    if (max_update < cfg.update_tol) {
      refresh_multiplier();
      if (sol.complementarity < cfg.comp_tol) return sol;
    }
  }
  refresh_multiplier();
  throw SolverError("psor_solve: no convergence after " + std::to_string(sol.sweeps) + " sweeps (update " +
                        std::to_string(sol.max_update) + ", complementarity " +
                        std::to_string(sol.complementarity) + ")",
                    sol.complementarity, sol.sweeps);
}

}  // namespace

ObstacleSolution psor_solve(const SparseMatrix& a, std::span<const double> b, std::span<const Index> constrained,
                            const PsorConfig& cfg, std::span<const double> x0) {
  if (a.rows() != a.cols()) throw Error("psor_solve: square matrix required");
  return psor_kernel(SparseRows{a}, b, constrained, cfg, x0);
}

ObstacleSolution psor_solve(const DenseMatrix& a, std::span<const double> b, std::span<const Index> constrained,
                            const PsorConfig& cfg, std::span<const double> x0) {
  if (a.rows() != a.cols()) throw Error("psor_solve: square matrix required");
  return psor_kernel(DenseRows{a}, b, constrained, cfg, x0);
}

}  // namespace bsfree
