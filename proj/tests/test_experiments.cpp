#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <random>

#include "compare.hpp"
#include "error.hpp"
#include "experiments.hpp"
#include "fem.hpp"
#include "helpers.hpp"
#include "io.hpp"

using namespace bsfree;
namespace fs = std::filesystem;

namespace {

std::string config_error(const std::string& json) {
  try {
    parse_config(json);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

fs::path scratch_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("bsfree_test_" + name + "_" + std::to_string(std::random_device{}()));
  fs::remove_all(p);
  return p;
}

ExperimentConfig small_coupled() {
  ExperimentConfig c = parse_config(R"({"schema": 1, "kind": "coupled",
    "mesh": {"annulus": {"n_angular": 16, "n_radial": 2}},
    "model": {"delta_omega": 0.2, "delta_gamma": 0.2, "delta_k": 0.2},
    "t_end": 0.02, "snapshot_times": [0, 0.01, 0.02]})");
  return c;
}

}  // namespace

TEST_CASE("config errors carry the JSON path") {
  const std::pair<const char*, const char*> cases[] = {
      {R"({"kind": "coupled"})", "schema: missing (expected 1)"},
      {R"({"schema": 2, "kind": "coupled"})", "schema: unsupported version (expected 1)"},
      {R"({"schema": 1})", "kind: missing"},
      {R"({"schema": 1, "kind": "heat"})",
       "kind: unknown experiment kind 'heat' (coupled, evi, pvi, eps-sweep, refine-study, dtn-check)"},
      {R"({"schema": 1, "kind": "coupled", "model": {"delta_k": -1}})", "model.delta_k: must be positive"},
      {R"({"schema": 1, "kind": "coupled", "model": {"delta_k": "x"}})", "model.delta_k: expected a number"},
      {R"({"schema": 1, "kind": "coupled", "model": {"dk": 1}})", "model.dk: unknown member"},
      {R"({"schema": 1, "kind": "coupled", "colour": 1})", "colour: unknown member"},
      {R"({"schema": 1, "kind": "coupled", "mesh": {"annulus": {"n_angular": 4}}})",
       "mesh.annulus.n_angular: must be at least 8"},
      {R"({"schema": 1, "kind": "coupled", "mesh": {"annulus": {"n_radial": 2.5}}})",
       "mesh.annulus.n_radial: expected an integer"},
      {R"({"schema": 1, "kind": "eps-sweep", "snapshot_times": [0.1]})", "eps_list: sweep list is empty"},
      {R"({"schema": 1, "kind": "eps-sweep", "eps_list": [0.1, 0], "snapshot_times": [0.1]})",
       "eps_list[1]: must be positive"},
      {R"({"schema": 1, "kind": "coupled", "snapshot_times": [0.1, 2]})", "snapshot_times[1]: must lie in [0, t_end]"},
      {R"({"schema": 1, "kind": "coupled", "timestep": "tiny"})",
       "timestep: expected \"auto\", a number or an object"},
      {R"({"schema": 1, "kind": "coupled", "timestep": {"policy": "auto", "safety": 2}})",
       "timestep.safety: must lie in (0, 1]"},
      {R"({"schema": 1, "kind": "coupled", "initial": {"w0": {"type": "gauss"}}})",
       "initial.w0.type: unknown profile 'gauss' (constant, trig, cos-theta)"},
      {R"({"schema": 1, "kind": "coupled", "psor": {"omega": 2.5}})", "psor.omega: must lie in (0, 2)"},
      {R"({"schema": 1, "kind": "coupled", "output": {"diagnostics_every": 0}})",
       "output.diagnostics_every: must be at least 1"},
  };
  for (auto [json, expected] : cases) {
    CAPTURE(json);
    CHECK(config_error(json) == expected);
  }
  CHECK(config_error("{").rfind("<root>: invalid JSON", 0) == 0);
  CHECK(config_error("[]") == "<root>: expected an object");
}

TEST_CASE("config echo round-trips for every preset") {
  const auto names = preset_names();
  CHECK(names.size() >= 12);
  for (const auto& n : names) {
    CAPTURE(n);
    const ExperimentConfig c = preset(n);
    CHECK(c.name == n);
    const std::string echo = echo_config(c);
    CHECK(parse_config(echo) == c);
    CHECK(echo_config(parse_config(echo)) == echo);
  }
  CHECK_THROWS_AS(preset("nope"), ConfigError);
}

TEST_CASE("timestep forms") {
  CHECK_FALSE(parse_config(R"({"schema": 1, "kind": "coupled", "timestep": 0.001})").timestep.automatic);
  CHECK(parse_config(R"({"schema": 1, "kind": "coupled", "timestep": 0.001})").timestep.tau == 0.001);
  CHECK(parse_config(R"({"schema": 1, "kind": "coupled", "timestep": "auto"})").timestep.automatic);
  const auto c = parse_config(R"({"schema": 1, "kind": "coupled", "timestep": {"cap": 1e-3, "safety": 0.25},
    "model": {"delta_omega": 0.01, "delta_gamma": 0.01, "delta_k": 0.01}})");
  const Mesh m = build_mesh(c.mesh);
  const double limit = stable_timestep(c.model, m, 1.0, 2.0);
  CHECK(resolve_timestep(c, m, c.model) == doctest::Approx(std::min(1e-3, 0.25 * limit)));
}

TEST_CASE("preset contents") {
  for (auto [name, eps] : {std::pair{"paper-2d-eps-1e-1", 0.1}, std::pair{"paper-2d-eps-1e-2", 0.01},
                           std::pair{"paper-2d-eps-1e-3", 0.001}}) {
    const auto c = preset(name);
    CHECK(c.kind == ExperimentKind::Coupled);
    CHECK(c.model.delta_omega == eps);
    CHECK(c.model.delta_gamma == eps);
    CHECK(c.model.delta_k == eps);
    CHECK(c.model.u_dirichlet == 1.0);
    CHECK(c.t_end == 0.7);
    CHECK(c.mesh.annulus == AnnulusSpec{1.0, 2.0, 64, 8, 1.0});
    CHECK(c.w0.kind == InitialProfile::Kind::Trig);
  }
  CHECK(preset("paper-2d-pvi").model.delta_omega == 1.0);
  CHECK(preset("physical-parabolic").model.delta_gamma == 1e-3);
  CHECK(preset("physical-elliptic").model.delta_omega == 5.7e-2);
  CHECK(preset("neumann-conservation").model.outer_bc == OuterBc::Neumann);
}

TEST_CASE("initial profiles") {
  const Mesh m = testing::annulus(16, 2);
  const auto w = surface_profile(m, {InitialProfile::Kind::CosTheta, 2.0});
  for (std::size_t i = 0; i < w.size(); ++i) {
    const Point& p = m.vertices()[m.surface_nodes()[i]];
    CHECK(w[i] == doctest::Approx(2.0 * std::max(0.0, std::cos(polar_angle(p)))));
  }
  const auto b = bulk_profile(m, {InitialProfile::Kind::Trig, 1.0});
  for (double v : b) CHECK(v >= 0.0);
  CHECK(bulk_profile(m, {InitialProfile::Kind::Constant, 3.0}) == std::vector<double>(m.num_vertices(), 3.0));
}

TEST_CASE("field comparison: identity and constant shift") {
  const Mesh m = testing::annulus(16, 2);
  FieldSnapshot a{0.5, interpolate_bulk(m, [](const Point& p) { return p.x * p.y; }),
                  interpolate_surface(m, [](const Point& p) { return p.x; })};
  const std::vector<FieldSnapshot> ra{a};
  const double t[] = {0.5};
  auto same = compare_fields(m, ra, m, ra, t, "self");
  REQUIRE(same.size() == 1);
  CHECK(same[0].label == "self");
  CHECK(same[0].l2_omega_u <= 1e-14);
  CHECK(same[0].l2_gamma_u <= 1e-14);
  CHECK(same[0].l2_gamma_w <= 1e-14);

  FieldSnapshot b = a;
  const double c = 0.37;
  for (double& v : b.u) v += c;
  for (double& v : b.w) v += c;
  const std::vector<FieldSnapshot> rb{b};
  const auto e = compare_fields(m, ra, m, rb, t);
  CHECK(e[0].l2_omega_u == doctest::Approx(c * std::sqrt(m.area())).epsilon(1e-12));
  CHECK(e[0].l2_gamma_u == doctest::Approx(c * std::sqrt(m.surface_length())).epsilon(1e-12));
  CHECK(e[0].l2_gamma_w == doctest::Approx(c * std::sqrt(m.surface_length())).epsilon(1e-12));

  const double far[] = {0.6};
  CHECK_THROWS_AS(compare_fields(m, ra, m, rb, far), ConfigError);
}

TEST_CASE("field comparison across a refinement: closed forms on the square ring") {
  // e = alpha + beta X + gamma Y with X = x - 1.5, Y = y - 1.5. By symmetry
  //   int_Omega e^2 = 8 alpha^2 + (20/3)(beta^2 + gamma^2)
  //   int_Gamma e^2 = 4 alpha^2 + (2/3)(beta^2 + gamma^2)
  const Mesh coarse = testing::square_ring_mesh();
  const Mesh fine = refine_uniform(coarse);
  const double alpha = 0.3, beta = -1.1, gamma = 0.7;
  auto e = [&](const Point& p) { return alpha + beta * (p.x - 1.5) + gamma * (p.y - 1.5); };
  const std::vector<FieldSnapshot> ra{{0.0, interpolate_bulk(coarse, e), interpolate_surface(coarse, e)}};
  const std::vector<FieldSnapshot> rb{{0.0, std::vector<double>(fine.num_vertices(), 0.0),
                                       std::vector<double>(fine.num_surface_nodes(), 0.0)}};
  const double t[] = {0.0};
  const auto r = compare_fields(coarse, ra, fine, rb, t);
  const double b2g2 = beta * beta + gamma * gamma;
  CHECK(r[0].l2_omega_u == doctest::Approx(std::sqrt(8 * alpha * alpha + 20.0 / 3.0 * b2g2)).epsilon(1e-13));
  CHECK(r[0].l2_gamma_u == doctest::Approx(std::sqrt(4 * alpha * alpha + 2.0 / 3.0 * b2g2)).epsilon(1e-13));
  CHECK(r[0].l2_gamma_w == doctest::Approx(std::sqrt(4 * alpha * alpha + 2.0 / 3.0 * b2g2)).epsilon(1e-13));
  CHECK(r[0].overlap_b == 0.0);

  // Prolongation reproduces linear fields exactly.
  const Prolongation p(coarse, fine);
  CHECK(testing::max_diff(p.bulk(interpolate_bulk(coarse, e)), interpolate_bulk(fine, e)) < 1e-14);
  CHECK(testing::max_diff(p.surface(interpolate_surface(coarse, e)), interpolate_surface(fine, e)) < 1e-14);
}

TEST_CASE("non-nested meshes are rejected") {
  const Mesh a = testing::annulus(16, 2);
  const Mesh b = testing::annulus(24, 2);
  CHECK_THROWS_AS(Prolongation(a, b), ConfigError);
  // Projecting refined surface nodes onto the circle breaks nesting as well.
  CHECK_THROWS_AS(Prolongation(a, refine_uniform(a, Circle{{0, 0}, 1.0})), ConfigError);
  CHECK_NOTHROW(Prolongation(a, refine_uniform(refine_uniform(a))));
}

TEST_CASE("overlap functional") {
  const Mesh m = testing::annulus(16, 2);
  const std::vector<double> u(m.num_vertices(), 2.0), w(m.num_surface_nodes(), 0.5);
  CHECK(overlap_functional(m, u, w) == doctest::Approx(m.surface_length()));
}

TEST_CASE("snapshot CSV schema and round trip") {
  const Mesh m = testing::square_ring_mesh();
  std::vector<FieldSnapshot> s;
  for (int k = 0; k < 2; ++k)
    s.push_back({0.1 * k + 1.0 / 3.0, interpolate_bulk(m, [k](const Point& p) { return std::sin(p.x + k) / 7; }),
                 interpolate_surface(m, [](const Point& p) { return p.y / 3; })});
  const std::string csv = snapshots_csv(m, s);
  CHECK(csv.rfind("time,node_kind,node_id,x,y,value_u,value_w\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 1 + 2 * 16);
  CHECK(csv.find(",bulk,0,0,0,") != std::string::npos);
  CHECK(csv.find(",surface,5,1,1,") != std::string::npos);
  const auto back = parse_snapshots_csv(m, csv);
  REQUIRE(back.size() == 2);
  for (int k = 0; k < 2; ++k) {
    CHECK(back[k].time == s[k].time);
    CHECK(back[k].u == s[k].u);
    CHECK(back[k].w == s[k].w);
  }
  CHECK_THROWS(parse_snapshots_csv(m, "time,x\n"));
  CHECK_THROWS(parse_snapshots_csv(testing::annulus(16, 2), csv));
  std::string truncated = csv.substr(0, csv.rfind('\n', csv.size() - 2) + 1);
  CHECK_THROWS(parse_snapshots_csv(m, truncated));
}

TEST_CASE("format_double is shortest round trip") {
  for (double v : {0.1, 1.0 / 3.0, 1e-300, -2.5e17, 0.0})
    CHECK(std::stod(format_double(v)) == v);
  CHECK(format_double(0.1) == "0.1");
  CHECK(format_double(2.0) == "2");
}

TEST_CASE("diagnostics CSV keeps the last record") {
  std::vector<StepRecord> recs(8);
  for (int k = 0; k < 8; ++k) recs[k].step = k;
  const std::string csv = diagnostics_csv(recs, 3);
  CHECK(csv.rfind("step,time,minU,maxU,minW,maxW,Q,R_cum\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 1 + 4);  // steps 0, 3, 6, 7
  CHECK(csv.find("\n7,") != std::string::npos);
}

TEST_CASE("VI, free-boundary and VTK outputs") {
  const Mesh m = testing::annulus(16, 2);
  const std::vector<double> v0(m.num_surface_nodes(), -1.0);
  const VIResult vi = solve_evi(m, 0.3, 1.0, v0);
  const std::string csv = vi_csv(m, vi);
  CHECK(csv.rfind("node_id,x,y,z,active,multiplier\n", 0) == 0);
  CHECK(csv.find("# summary time=0.3 ") != std::string::npos);
  CHECK(csv.find("active=16/16") != std::string::npos);
  CHECK(parse_vi_csv_z(m, csv) == vi.z);

  const std::string fb = free_boundary_csv(extract_free_boundary(m, vi));
  CHECK(fb.rfind("loop_id,theta_start,theta_end,arclength\n", 0) == 0);
  CHECK(std::count(fb.begin(), fb.end(), '\n') == 2);

  const std::vector<double> u(m.num_vertices(), 1.0), w(m.num_surface_nodes(), 2.0);
  const std::string vtk = vtk_legacy(m, u, w, "t");
  CHECK(vtk.rfind("# vtk DataFile Version 3.0\nt\nASCII\nDATASET UNSTRUCTURED_GRID\n", 0) == 0);
  CHECK(vtk.find("POINTS 48 double\n") != std::string::npos);
  CHECK(vtk.find("CELLS 64 256\n") != std::string::npos);
  CHECK(vtk.find("CELL_TYPES 64\n") != std::string::npos);
  CHECK(vtk.find("SCALARS U double 1") != std::string::npos);
  CHECK(vtk.find("SCALARS W double 1") != std::string::npos);
  CHECK(vtk.find("SCALARS surface int 1") != std::string::npos);
}

TEST_CASE("file helpers report IO failures") {
  CHECK_THROWS_AS(read_text_file("/nonexistent/dir/file"), IoError);
  CHECK_THROWS_AS(write_text_file("/nonexistent/dir/file", "x"), IoError);
  CHECK_THROWS_AS(read_mesh_file("/nonexistent/mesh.txt"), IoError);
}

TEST_CASE("coupled experiment writes its artifacts and reruns bit-identically") {
  const ExperimentConfig c = small_coupled();
  const fs::path d1 = scratch_dir("coupled1"), d2 = scratch_dir("coupled2");
  const auto r = run_experiment(c, d1.string());
  run_experiment(c, d2.string());
  REQUIRE(r.members.size() == 1);
  CHECK(r.members[0].snapshots.size() == 3);
  for (const char* f : {"config.json", "mesh.txt", "diagnostics.csv", "snapshots.csv", "snapshot_000.vtk",
                        "snapshot_002.vtk"}) {
    CAPTURE(f);
    REQUIRE(fs::exists(d1 / f));
    CHECK(read_text_file((d1 / f).string()) == read_text_file((d2 / f).string()));
  }
  CHECK(parse_config(read_text_file((d1 / "config.json").string())) == c);
  const Mesh m = read_mesh_file((d1 / "mesh.txt").string());
  const auto snaps = parse_snapshots_csv(m, read_text_file((d1 / "snapshots.csv").string()));
  CHECK(snaps[2].u == r.members[0].snapshots[2].u);
  fs::remove_all(d1);
  fs::remove_all(d2);
}

TEST_CASE("limit experiments") {
  ExperimentConfig c = preset("radial-oracle");
  c.mesh.annulus = AnnulusSpec{1.0, 2.0, 16, 2, 1.0};
  const fs::path d = scratch_dir("evi");
  const auto r = run_experiment(c, d.string());
  REQUIRE(r.limit);
  CHECK(r.limit->solutions.size() == c.snapshot_times.size());
  CHECK(r.limit->arcs.front().size() == 1);
  CHECK(r.limit->arcs.back().empty());
  for (const char* f : {"vi_000.csv", "freeboundary_000.csv", "times.csv", "snapshots.csv", "snapshot_000.vtk"})
    CHECK(fs::exists(d / f));
  fs::remove_all(d);

  ExperimentConfig p = preset("paper-2d-pvi");
  p.mesh.annulus = AnnulusSpec{1.0, 2.0, 16, 2, 1.0};
  const auto rp = execute_experiment(p);
  REQUIRE(rp.limit);
  for (std::size_t k = 1; k < rp.limit->solutions.size(); ++k)
    for (std::size_t v = 0; v < rp.limit->solutions[k].z.size(); ++v)
      CHECK(rp.limit->solutions[k].z[v] >= rp.limit->solutions[k - 1].z[v] - 1e-12);
}

TEST_CASE("epsilon sweep does not depend on the thread count") {
  ExperimentConfig c = parse_config(R"({"schema": 1, "kind": "eps-sweep",
    "mesh": {"annulus": {"n_angular": 16, "n_radial": 2}}, "eps_list": [0.5, 0.2, 0.1],
    "t_end": 0.05, "snapshot_times": [0.02, 0.05]})");
  const auto one = execute_experiment(c, 1);
  const auto three = execute_experiment(c, 3);
  REQUIRE(one.members.size() == 3);
  CHECK(one.members[1].label == "eps_0.2");
  REQUIRE(one.comparisons.size() == three.comparisons.size());
  CHECK(comparison_csv(one.comparisons) == comparison_csv(three.comparisons));
  CHECK(summary_csv(one.summaries) == summary_csv(three.summaries));
  for (std::size_t k = 0; k < 3; ++k) CHECK(one.members[k].snapshots.back().u == three.members[k].snapshots.back().u);
  const std::string header = "label,epsilon,tau,steps,overlap_integral,overlap_bound,reaction_identity_error,minU,maxU,minW,maxW\n";
  CHECK(summary_csv(one.summaries).rfind(header, 0) == 0);
  const fs::path d = scratch_dir("sweep");
  write_artifacts(one, d.string());
  for (const char* f : {"reference/vi_000.csv", "eps_0.5/diagnostics.csv", "eps_0.1/snapshots.csv", "comparison.csv",
                        "summary.csv"})
    CHECK(fs::exists(d / f));
  fs::remove_all(d);
}

TEST_CASE("refinement study and DtN check experiments") {
  ExperimentConfig c = parse_config(R"({"schema": 1, "kind": "refine-study",
    "mesh": {"annulus": {"n_angular": 8, "n_radial": 2}}, "refine_levels": 2,
    "model": {"delta_omega": 0.5, "delta_gamma": 0.5, "delta_k": 0.5},
    "t_end": 0.02, "snapshot_times": [0.01, 0.02]})");
  const auto r = execute_experiment(c);
  CHECK(r.meshes.size() == 3);
  CHECK(r.members.size() == 3);
  CHECK(r.comparisons.size() == 4);
  CHECK(r.comparisons.front().label == "level_0_vs_level_2");
  const fs::path d = scratch_dir("refine");
  write_artifacts(r, d.string());
  CHECK(fs::exists(d / "level_1" / "mesh.txt"));
  CHECK(fs::exists(d / "comparison.csv"));
  fs::remove_all(d);

  ExperimentConfig k = preset("dtn-check");
  k.mesh.annulus = AnnulusSpec{1.0, 2.0, 16, 2, 1.0};
  const auto rd = execute_experiment(k);
  REQUIRE(rd.dtn.size() == 2 * k.snapshot_times.size());
  for (const auto& row : rd.dtn) {
    CHECK(row.asymmetry <= 1e-12);
    CHECK(row.max_trace_diff <= 1e-8);
  }
}
