#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "error.hpp"
#include "fem.hpp"
#include "freeboundary.hpp"
#include "helpers.hpp"
#include "linalg.hpp"

using namespace bsfree;

namespace {

SparseMatrix random_spd(std::size_t n, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> d(-1, 1);
  std::vector<Triplet> t;
  for (std::size_t i = 0; i < n; ++i) {
    t.push_back({i, i, 4.0 + d(rng)});
    if (i + 1 < n) {
      const double c = 0.8 * d(rng);
      t.push_back({i, i + 1, c});
      t.push_back({i + 1, i, c});
    }
    if (i + 5 < n) {
      const double c = 0.5 * d(rng);
      t.push_back({i, i + 5, c});
      t.push_back({i + 5, i, c});
    }
  }
  return SparseMatrix::from_triplets(n, n, std::move(t), true);
}

struct EnumerationResult {
  std::vector<double> z;
  std::vector<char> active;
  double margin = 0.0;  // smallest strict slack of the winning pattern
  int feasible = 0;
};

// Tries every contact pattern on the surface nodes and keeps those whose
// reduced linear solve satisfies both sign conditions.
EnumerationResult enumerate_evi(const Mesh& m, double t, const std::vector<double>& v0) {
  const auto k = testing::to_dense(bulk_stiffness(m));
  const auto s = surface_mass_lumped(m);
  const std::size_t n = m.num_vertices(), ns = m.num_surface_nodes();
  std::vector<double> load(n, 0.0);
  for (std::size_t i = 0; i < ns; ++i) load[m.surface_nodes()[i]] = s[i] * v0[i];
  EnumerationResult best;
  for (unsigned mask = 0; mask < (1u << ns); ++mask) {
    std::vector<double> fixed(n, std::nan(""));
    for (Index v : m.outer_nodes()) fixed[v] = t;
    for (std::size_t i = 0; i < ns; ++i)
      if (mask >> i & 1u) fixed[m.surface_nodes()[i]] = 0.0;
    std::vector<std::size_t> free;
    for (std::size_t i = 0; i < n; ++i)
      if (std::isnan(fixed[i])) free.push_back(i);
    std::vector<std::vector<double>> a(free.size(), std::vector<double>(free.size()));
    std::vector<double> b(free.size());
    for (std::size_t r = 0; r < free.size(); ++r) {
      b[r] = load[free[r]];
      for (std::size_t c = 0; c < n; ++c)
        if (!std::isnan(fixed[c])) b[r] -= k[free[r]][c] * fixed[c];
      for (std::size_t c = 0; c < free.size(); ++c) a[r][c] = k[free[r]][free[c]];
    }
    const auto x = testing::dense_solve(a, b);
    std::vector<double> z = fixed;
    for (std::size_t r = 0; r < free.size(); ++r) z[free[r]] = x[r];
    double margin = std::numeric_limits<double>::infinity();
    bool ok = true;
    for (std::size_t i = 0; i < ns; ++i) {
      const Index v = m.surface_nodes()[i];
      if (mask >> i & 1u) {
        double res = load[v];
        for (std::size_t c = 0; c < n; ++c) res -= k[v][c] * z[c];
        ok = ok && res <= 0.0;
        margin = std::min(margin, -res);
      } else {
        ok = ok && z[v] >= 0.0;
        margin = std::min(margin, z[v]);
      }
    }
    if (!ok) continue;
    ++best.feasible;
    best.z = z;
    best.margin = margin;
    best.active.assign(ns, 0);
    for (std::size_t i = 0; i < ns; ++i) best.active[i] = (mask >> i & 1u) ? 1 : 0;
  }
  return best;
}

}  // namespace

TEST_CASE("CG matches dense elimination") {
  for (std::size_t n : {5u, 40u, 200u}) {
    const SparseMatrix a = random_spd(n, unsigned(n));
    std::vector<double> b(n);
    for (std::size_t i = 0; i < n; ++i) b[i] = std::sin(double(i) + 1.0);
    const auto x = cg_solve(a, b, {1e-13, 1e-300}).x;
    const auto ref = testing::dense_solve(testing::to_dense(a), b);
    CHECK(testing::max_diff(x, ref) < 1e-11);
  }
}

TEST_CASE("CG reports failure with its residual") {
  const SparseMatrix a = random_spd(100, 3);
  const std::vector<double> b(100, 1.0);
  CgConfig cfg{1e-14, 1e-300, 2, 0.0};
  try {
    cg_solve(a, b, cfg);
    FAIL("expected SolverError");
  } catch (const SolverError& e) {
    CHECK(e.residual() > 0.0);
    CHECK(e.iterations() >= 2);
  }
  // Zero right-hand side converges immediately.
  CHECK(cg_solve(a, std::vector<double>(100, 0.0)).iterations == 0);
}

TEST_CASE("PSOR energy decreases and complementarity holds") {
  const SparseMatrix a = random_spd(60, 11);
  std::vector<double> b(60);
  for (std::size_t i = 0; i < 60; ++i) b[i] = std::cos(1.7 * double(i));
  std::vector<Index> constrained;
  for (Index i = 0; i < 60; i += 2) constrained.push_back(i);
  PsorConfig cfg;
  cfg.record_energy = true;
  cfg.update_tol = 1e-13;
  cfg.comp_tol = 1e-11;
  const auto sol = psor_solve(a, b, constrained, cfg);
  REQUIRE(sol.energy.size() >= 2);
  for (std::size_t k = 1; k < sol.energy.size(); ++k) CHECK(sol.energy[k] <= sol.energy[k - 1] + 1e-14);
  int active = 0;
  for (Index i : constrained) {
    CHECK(sol.x[i] >= 0.0);
    CHECK(sol.multiplier[i] <= 1e-11);
    CHECK(std::abs(sol.x[i] * sol.multiplier[i]) < 1e-11);
    active += sol.x[i] == 0.0;
  }
  CHECK(active > 0);
  for (Index i = 1; i < 60; i += 2) CHECK(std::abs(sol.multiplier[i]) < 1e-10);
  const auto dense = psor_solve(DenseMatrix::from_sparse(a), b, constrained, cfg);
  CHECK(testing::max_diff(dense.x, sol.x) < 1e-12);
}

TEST_CASE("PSOR config validation") {
  PsorConfig c;
  c.omega = 2.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c.omega = 1.0;
  c.update_tol = 0.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("PSOR obstacle solution matches exhaustive contact enumeration") {
  const Mesh m = testing::annulus(8, 2);
  const auto v0 = interpolate_surface(m, [](const Point& p) { return -(1.0 + std::cos(polar_angle(p))); });
  PsorConfig cfg;
  cfg.update_tol = 1e-14;
  cfg.comp_tol = 1e-12;
  const EviSolver solver(m, cfg);
  const std::pair<double, int> cases[] = {{0.3, 5}, {0.7, 3}, {1.0, 1}};
  for (auto [t, expected_active] : cases) {
    CAPTURE(t);
    const auto ref = enumerate_evi(m, t, v0);
    REQUIRE(ref.feasible == 1);
    CHECK(ref.margin > 0.05);
    int na = 0;
    for (char c : ref.active) na += c;
    CHECK(na == expected_active);
    const VIResult vi = solver.solve(t, 1.0, v0);
    CHECK(vi.active == ref.active);
    CHECK(testing::max_diff(vi.z, ref.z) < 1e-9);
  }
}
