#include <doctest.h>

#include <cmath>
#include <numbers>

#include "error.hpp"
#include "fem.hpp"
#include "freeboundary.hpp"
#include "helpers.hpp"

using namespace bsfree;

namespace {

const double kLog2 = std::log(2.0);

double radius(const Point& p) { return std::hypot(p.x, p.y); }

// Radial thin obstacle with unit load: contact until t = log 2, then a
// shifted logarithm.
double radial_z(double r, double t) { return t < kLog2 ? t * std::log(r) / kLog2 : t - kLog2 + std::log(r); }

PsorConfig tight() {
  PsorConfig c;
  c.update_tol = 1e-13;
  c.comp_tol = 1e-11;
  return c;
}

std::vector<double> cos_load(const Mesh& m) {
  return interpolate_surface(m, [](const Point& p) { return -std::max(0.0, std::cos(polar_angle(p))); });
}

}  // namespace

TEST_CASE("radial obstacle problem against its closed form") {
  double err_at_1[2] = {0, 0};
  for (int k : {1, 2}) {
    const Mesh m = testing::annulus(32 * k, 4 * k);
    const double h = m.max_edge_length();
    const EviSolver s(m, tight());
    const std::vector<double> v0(m.num_surface_nodes(), -1.0);
    for (double t : {0.3, 0.6, 0.8, 1.0}) {
      CAPTURE(t);
      const VIResult vi = s.solve(t, 1.0, v0);
      double err = 0.0;
      for (Index v = 0; v < m.num_vertices(); ++v)
        err = std::max(err, std::abs(vi.z[v] - radial_z(radius(m.vertices()[v]), t)));
      CHECK(err <= 0.5 * h * h);
      const bool contact = t < kLog2;
      for (std::size_t i = 0; i < m.num_surface_nodes(); ++i) {
        CHECK(bool(vi.active[i]) == contact);
        if (contact) CHECK(vi.multiplier[i] == doctest::Approx(t / kLog2 - 1.0).epsilon(0.02));
        else CHECK(std::abs(vi.multiplier[i]) < 1e-10);
      }
      if (t == 1.0) err_at_1[k - 1] = err;
      const auto arcs = extract_free_boundary(m, vi);
      CHECK(arcs.size() == (contact ? 1u : 0u));
      if (contact) CHECK(arcs[0].length == doctest::Approx(m.surface_length()));
    }
  }
  CHECK(err_at_1[0] / err_at_1[1] >= 3.6);
  CHECK(err_at_1[0] / err_at_1[1] <= 4.4);
}

TEST_CASE("recovered limit fields") {
  const Mesh m = testing::annulus(64, 8);
  const double h = m.max_edge_length();
  const EviSolver s(m, tight());
  const std::vector<double> v0(m.num_surface_nodes(), -1.0), w0(m.num_surface_nodes(), 1.0);
  const double tpp = 1e-2;
  for (double t : {0.3, 1.0}) {
    const LimitFields f = postprocess_uw(m, s.solve(t, 1.0, v0), s.solve(t - tpp, 1.0, v0), tpp, w0);
    for (Index v = 0; v < m.num_vertices(); ++v) {
      const double r = radius(m.vertices()[v]);
      CHECK(std::abs(f.u[v] - (t < kLog2 ? std::log(r) / kLog2 : 1.0)) <= 5 * h);
    }
    for (double w : f.w) CHECK(std::abs(w - std::max(0.0, 1.0 - t / kLog2)) <= 5 * h);
  }
}

TEST_CASE("parabolic obstacle steps") {
  const Mesh m = testing::annulus(32, 4);
  const auto v0 = cos_load(m);
  const std::vector<double> u0(m.num_vertices(), 1.0);
  SUBCASE("vanishing bulk capacity recovers the elliptic problem") {
    const PviSolver p(m, 1e-10, 0.1, tight());
    const EviSolver e(m, tight());
    const std::vector<double> z0(m.num_vertices(), 0.0);
    const auto zp = p.step(z0, 0.3, 1.0, u0, v0);
    CHECK(testing::max_diff(zp.z, e.solve(0.3, 1.0, v0).z) < 1e-7);
  }
  SUBCASE("z stays feasible and grows in time") {
    const PviSolver p(m, 1.0, 1e-2, tight());
    std::vector<double> z(m.num_vertices(), 0.0);
    for (int k = 1; k <= 30; ++k) {
      const VIResult r = p.step(z, k * 1e-2, 1.0, u0, v0);
      for (Index v : m.surface_nodes()) CHECK(r.z[v] >= 0.0);
      for (Index v = 0; v < m.num_vertices(); ++v) CHECK(r.z[v] >= z[v] - 1e-12);
      z = r.z;
    }
  }
  CHECK_THROWS_AS(PviSolver(m, -1.0, 1e-2), ConfigError);
  CHECK_THROWS_AS(PviSolver(m, 1.0, 0.0), ConfigError);
}

TEST_CASE("Dirichlet-to-Neumann reduction") {
  const Mesh m = testing::annulus(32, 4);
  const double h = m.max_edge_length();
  const DtnOperator dtn(m, 1.0);
  REQUIRE(dtn.is_dense());
  CHECK(dtn.matrix().max_asymmetry() <= 1e-12);
  const DtnOperator free_op(m, 1.0, true);
  CHECK_FALSE(free_op.is_dense());
  std::vector<double> x(dtn.size());
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = std::sin(0.3 * double(i));
  CHECK(testing::max_diff(dtn.apply(x), free_op.apply(x)) < 1e-12);
  CHECK(testing::max_diff(dtn.matrix().multiply(x), dtn.apply(x)) < 1e-12);
  // Constants are not in the kernel: the operator sees the outer Dirichlet ring.
  const auto s = surface_mass_lumped(m);
  for (std::size_t i = 0; i < dtn.size(); ++i) CHECK(std::abs(std::abs(dtn.load()[i]) / s[i] - 1.0 / kLog2) <= 5 * h);

  const EviSolver e(m, tight());
  const auto v0 = cos_load(m);
  for (double t : {0.2, 0.4, 0.7}) {
    const SurfaceVIResult r = solve_dtn_complementarity(dtn, m, t, v0, tight());
    const VIResult ref = e.solve(t, 1.0, v0);
    CHECK(testing::max_diff(r.z, restrict_to_surface(m, ref.z)) < 1e-8);
    CHECK(r.active == ref.active);
  }
}

TEST_CASE("free-boundary arcs under a one-sided load") {
  const double two_pi = 2 * std::numbers::pi;
  std::vector<double> ends;
  for (int k : {1, 2, 4}) {
    const Mesh m = testing::annulus(32 * k, 4 * k);
    const EviSolver s(m, tight());
    const auto v0 = cos_load(m);
    double previous_length = std::numeric_limits<double>::infinity();
    std::vector<double> z_prev(m.num_vertices(), 0.0);
    for (double t : {0.1, 0.2, 0.4}) {
      const VIResult vi = s.solve(t, 1.0, v0);
      for (Index v = 0; v < m.num_vertices(); ++v) CHECK(vi.z[v] >= z_prev[v] - 1e-12);
      z_prev = vi.z;
      const auto arcs = extract_free_boundary(m, vi);
      REQUIRE(arcs.size() == 1);
      // Mirror symmetry about the x axis: the arc straddles theta = 0.
      CHECK(arcs[0].theta_start + arcs[0].theta_end == doctest::Approx(two_pi).epsilon(1e-9));
      CHECK(arcs[0].length < previous_length);
      previous_length = arcs[0].length;
      if (t == 0.2) ends.push_back(arcs[0].theta_end);
    }
  }
  // Endpoints settle under refinement.
  CHECK(std::abs(ends[2] - ends[1]) < std::abs(ends[1] - ends[0]));
  CHECK(std::abs(ends[2] - ends[1]) < 0.01);
}

TEST_CASE("loads are clamped to be nonpositive") {
  testing::WarningCapture warnings;
  const std::vector<double> v{-1.0, 0.5, 0.0};
  const auto c = clamp_surface_load(v);
  CHECK(c == std::vector<double>{-1.0, 0.0, 0.0});
  CHECK(warnings.messages.size() == 1);
  clamp_surface_load(c);
  CHECK(warnings.messages.size() == 1);
}

TEST_CASE("trivial obstacle data") {
  const Mesh m = testing::annulus(16, 2);
  const std::vector<double> zero(m.num_surface_nodes(), 0.0);
  const VIResult flat = solve_evi(m, 0.4, 2.0, zero, tight());
  for (double z : flat.z) CHECK(z == doctest::Approx(0.8).epsilon(1e-9));
  const auto v0 = cos_load(m);
  const VIResult start = solve_evi(m, 0.0, 1.0, v0, tight());
  CHECK(max_abs(start.z) < 1e-12);
  CHECK(testing::max_diff(start.multiplier, v0) < 1e-10);

  // Uniform growth: u0 = u_D and no surface load keep z = t u_D.
  const std::vector<double> u0(m.num_vertices(), 1.0);
  const PviSolver p(m, 0.7, 0.05, tight());
  std::vector<double> z(m.num_vertices(), 0.0);
  for (int k = 1; k <= 4; ++k) {
    z = p.step(z, 0.05 * k, 1.0, u0, zero).z;
    for (double v : z) CHECK(v == doctest::Approx(0.05 * k).epsilon(1e-9));
  }

  const LimitFields f = postprocess_uw(m, solve_evi(m, 0.5, 1.0, zero, tight()), solve_evi(m, 0.49, 1.0, zero, tight()),
                                       0.01, zero);
  for (double u : f.u) CHECK(u == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(max_abs(f.w) < 1e-9);
  CHECK(extract_free_boundary(m, flat).empty());
}
