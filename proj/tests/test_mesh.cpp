#include <doctest.h>

#include <cmath>
#include <numbers>

#include "error.hpp"
#include "helpers.hpp"
#include "mesh.hpp"

using namespace bsfree;

namespace {

std::string mesh_error(const std::vector<Point>& v, const std::vector<std::array<Index, 3>>& t,
                       const std::vector<BoundaryEdge>& b) {
  try {
    Mesh m(v, t, b);
  } catch (const MeshError& e) {
    return e.what();
  }
  return "";
}

bool starts_with(const std::string& s, const std::string& p) { return s.rfind(p, 0) == 0; }

}  // namespace

TEST_CASE("annulus counts and Euler characteristic") {
  for (auto [na, nr] : {std::pair{8, 2}, std::pair{32, 4}, std::pair{17, 3}}) {
    const Mesh m = testing::annulus(na, nr);
    CHECK(m.num_vertices() == std::size_t(na * (nr + 1)));
    CHECK(m.num_triangles() == std::size_t(2 * na * nr));
    CHECK(m.num_surface_nodes() == std::size_t(na));
    CHECK(m.outer_nodes().size() == std::size_t(na));
    CHECK(m.num_loops() == 1);
    const long chi = long(m.num_vertices()) - long(m.num_edges()) + long(m.num_triangles());
    CHECK(chi == 0);
  }
}

TEST_CASE("annulus geometry") {
  const Mesh m = testing::annulus(8, 2);
  // Inscribed 8-gon perimeter.
  CHECK(m.surface_length() == doctest::Approx(2 * 8 * std::sin(std::numbers::pi / 8)).epsilon(1e-14));
  CHECK(m.surface_length() == doctest::Approx(6.1229).epsilon(1e-4));
  const double n = 32;
  const Mesh m32 = testing::annulus(32, 4);
  const double polygon_area = 0.5 * n * std::sin(2 * std::numbers::pi / n) * (4.0 - 1.0);
  CHECK(m32.area() == doctest::Approx(polygon_area).epsilon(1e-13));
  for (Index t = 0; t < m32.num_triangles(); ++t) CHECK(m32.triangle_area(t) > 0.0);
  // Strip construction keeps every angle acute.
  CHECK(m32.max_angle() < std::numbers::pi / 2);
  CHECK(m32.max_angle() * 180 / std::numbers::pi == doctest::Approx(78.4).epsilon(1e-2));
}

TEST_CASE("fine graded annulus area") {
  const Mesh m = generate_annulus({1.0, 2.0, 256, 32, 1.2});
  CHECK(std::abs(m.area() - 3 * std::numbers::pi) / (3 * std::numbers::pi) < 1e-3);
  const Mesh small = generate_annulus({1.0, 2.0, 8, 2, 1.0});
  CHECK(small.num_vertices() == 24);
  CHECK(small.num_triangles() == 32);
}

TEST_CASE("surface loop is closed and has the bulk on its right") {
  const Mesh m = testing::annulus(16, 3);
  const auto& segs = m.surface_segments();
  REQUIRE(segs.size() == m.num_surface_nodes());
  for (std::size_t k = 0; k < segs.size(); ++k) {
    CHECK(segs[k][1] == segs[(k + 1) % segs.size()][0]);
    const Point& a = m.vertices()[segs[k][0]];
    const Point& b = m.vertices()[segs[k][1]];
    // Left normal points out of the bulk, towards the hole.
    const Point nl{-(b.y - a.y), b.x - a.x};
    const Point mid{(a.x + b.x) / 2, (a.y + b.y) / 2};
    CHECK(nl.x * mid.x + nl.y * mid.y < 0.0);
  }
  for (std::size_t i = 0; i < m.num_surface_nodes(); ++i) CHECK(m.surface_index(m.surface_nodes()[i]) == i);
}

TEST_CASE("graded annulus puts the thinnest layer at the surface") {
  const auto r = annulus_radii({1.0, 2.0, 8, 4, 2.0});
  REQUIRE(r.size() == 5);
  CHECK(r.front() == 1.0);
  CHECK(r.back() == 2.0);
  for (int k = 1; k < 4; ++k) CHECK((r[k + 1] - r[k]) / (r[k] - r[k - 1]) == doctest::Approx(2.0));
}

TEST_CASE("annulus spec validation") {
  CHECK_THROWS_AS(generate_annulus({1.0, 0.5, 16, 2, 1.0}), ConfigError);
  CHECK_THROWS_AS(generate_annulus({1.0, 2.0, 7, 2, 1.0}), ConfigError);
  CHECK_THROWS_AS(generate_annulus({1.0, 2.0, 16, 1, 1.0}), ConfigError);
  CHECK_THROWS_AS(generate_annulus({1.0, 2.0, 16, 2, 0.5}), ConfigError);
}

TEST_CASE("red refinement") {
  const Mesh c = testing::annulus(16, 2);
  const Mesh f = refine_uniform(c);
  CHECK(f.num_vertices() == c.num_vertices() + c.num_edges());
  CHECK(f.num_triangles() == 4 * c.num_triangles());
  CHECK(f.num_surface_nodes() == 2 * c.num_surface_nodes());
  for (Index v = 0; v < c.num_vertices(); ++v) {
    CHECK(f.vertices()[v].x == c.vertices()[v].x);
    CHECK(f.vertices()[v].y == c.vertices()[v].y);
  }
  CHECK(f.area() == doctest::Approx(c.area()).epsilon(1e-14));
  CHECK(f.surface_length() == doctest::Approx(c.surface_length()).epsilon(1e-14));
  CHECK(f.min_angle() == doctest::Approx(c.min_angle()).epsilon(1e-12));
  CHECK(f.max_angle() == doctest::Approx(c.max_angle()).epsilon(1e-12));
  CHECK(f.max_edge_length() == doctest::Approx(c.max_edge_length() / 2).epsilon(1e-12));
  const long chi = long(f.num_vertices()) - long(f.num_edges()) + long(f.num_triangles());
  CHECK(chi == 0);

  const Mesh p = refine_uniform(c, Circle{{0, 0}, 1.0});
  for (Index v : p.surface_nodes()) CHECK(std::hypot(p.vertices()[v].x, p.vertices()[v].y) == doctest::Approx(1.0));
}

TEST_CASE("polar angle range") {
  CHECK(polar_angle({1.0, 0.0}) == 0.0);
  CHECK(polar_angle({1.0, -1e-300}) == 0.0);
  CHECK(polar_angle({0.0, -1.0}) == doctest::Approx(1.5 * std::numbers::pi));
  CHECK(polar_angle({-1.0, 0.0}) == doctest::Approx(std::numbers::pi));
}

TEST_CASE("hand-built square ring") {
  const Mesh m = testing::square_ring_mesh();
  CHECK(m.num_vertices() == 16);
  CHECK(m.num_triangles() == 16);
  CHECK(m.num_edges() == 32);
  CHECK(m.num_surface_nodes() == 4);
  CHECK(m.outer_nodes().size() == 12);
  CHECK(m.area() == doctest::Approx(8.0));
  CHECK(m.surface_length() == doctest::Approx(4.0));
}

TEST_CASE("export and import round-trip exactly") {
  const Mesh m = refine_uniform(testing::annulus(12, 3));
  const std::string text = export_mesh(m);
  const Mesh back = import_mesh(text);
  CHECK(back == m);
  CHECK(export_mesh(back) == text);
}

TEST_CASE("import reports the failing line") {
  auto err = [](const std::string& text) {
    try {
      import_mesh(text);
    } catch (const MeshError& e) {
      return std::string(e.what());
    }
    return std::string();
  };
  CHECK(err("bsfree-mesh 2\n") == "parse error at line 1: expected header 'bsfree-mesh 1'");
  CHECK(err("bsfree-mesh 1\nvertices 3\n0 0\n1 x\n") == "parse error at line 4: invalid number 'x'");
  CHECK(err("bsfree-mesh 1\nvertices 1\n0 0\n") ==
        "parse error at line 3: unexpected end of document, expected triangles section");
  const std::string good = export_mesh(testing::square_ring_mesh());
  CHECK(starts_with(err(good + "extra\n"), "parse error at line"));
  std::string bad_marker = good;
  bad_marker.replace(bad_marker.rfind("outer"), 5, "other");
  CHECK(err(bad_marker).find("unknown boundary marker 'other'") != std::string::npos);
}

TEST_CASE("structural invariants name the broken rule") {
  const Mesh ring = testing::square_ring_mesh();
  auto v = ring.vertices();
  auto t = ring.triangles();
  auto b = ring.boundary_edges();

  {
    auto t2 = t;
    std::swap(t2[0][1], t2[0][2]);
    CHECK(starts_with(mesh_error(v, t2, b), "orientation:"));
  }
  {
    auto v2 = v;
    v2.push_back({1.5, -1.0});
    v2.push_back({1.5, 0.5});
    auto t2 = t;
    t2.push_back({2, 1, 16});
    t2.push_back({1, 2, 17});
    CHECK(starts_with(mesh_error(v2, t2, b), "topology:"));
  }
  {
    auto b2 = b;
    b2.pop_back();
    CHECK(starts_with(mesh_error(v, t, b2), "topological boundary:"));
  }
  {
    auto b2 = b;
    b2.push_back({{0, 5}, BoundaryMarker::OuterBoundary});
    CHECK(starts_with(mesh_error(v, t, b2), "topological boundary:"));
  }
  {
    auto b2 = b;
    b2.back().marker = BoundaryMarker::InnerSurface;
    CHECK(starts_with(mesh_error(v, t, b2), "markers:"));
  }
  {
    // Swapping the roles makes the outer square the surface; its corner
    // triangles then carry two surface edges.
    auto b2 = b;
    for (auto& e : b2)
      e.marker = e.marker == BoundaryMarker::InnerSurface ? BoundaryMarker::OuterBoundary : BoundaryMarker::InnerSurface;
    CHECK(starts_with(mesh_error(v, t, b2), "surface:"));
  }
}
