#include "bsfree/bsfree.h"

#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <numbers>
#include <string>

#include <json.hpp>

#include "error.hpp"
#include "experiments.hpp"

struct bsf_mesh {
  bsfree::Mesh mesh;
};

namespace {

thread_local std::string g_last_error;

bsf_status fail(bsf_status s, const std::string& msg) {
  g_last_error = msg;
  return s;
}

struct InvalidArgument {
  std::string what;
};

/// Runs f, translating exceptions into status codes.
template <class F>
bsf_status checked(F&& f) {
  g_last_error.clear();
  try {
    f();
    return BSF_OK;
  } catch (const bsfree::ConfigError& e) {
    return fail(BSF_ERR_CONFIG, e.what());
  } catch (const bsfree::MeshError& e) {
    return fail(BSF_ERR_MESH, e.what());
  } catch (const bsfree::AssemblyError& e) {
    return fail(BSF_ERR_ASSEMBLY, e.what());
  } catch (const bsfree::SolverError& e) {
    return fail(BSF_ERR_SOLVER, e.what());
  } catch (const bsfree::IoError& e) {
    return fail(BSF_ERR_IO, e.what());
  } catch (const std::filesystem::filesystem_error& e) {
    return fail(BSF_ERR_IO, e.what());
  } catch (const InvalidArgument& e) {
    return fail(BSF_ERR_INVALID_ARGUMENT, e.what);
  } catch (const std::exception& e) {
    return fail(BSF_ERR_INTERNAL, e.what());
  } catch (...) {
    return fail(BSF_ERR_INTERNAL, "unknown exception");
  }
}

void require(bool ok, const char* what) {
  if (!ok) throw InvalidArgument{what};
}

char* duplicate(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

bsfree::ModelParams to_params(const bsf_model& m) {
  bsfree::ModelParams p;
  p.delta_omega = m.delta_omega;
  p.delta_gamma = m.delta_gamma;
  p.delta_k = m.delta_k;
  p.mu = m.mu;
  p.u_dirichlet = m.u_dirichlet;
  p.outer_bc = m.neumann ? bsfree::OuterBc::Neumann : bsfree::OuterBc::Dirichlet;
  return p;
}

std::string summary_json(const bsfree::ExperimentResult& r, const std::string& out_dir) {
  using nlohmann::json;
  json j;
  j["kind"] = std::string(bsfree::kind_name(r.config.kind));
  j["name"] = r.config.name;
  j["out_dir"] = out_dir;
  j["meshes"] = json::array();
  for (const auto& m : r.meshes)
    j["meshes"].push_back({{"vertices", m.num_vertices()}, {"triangles", m.num_triangles()},
                           {"surface_nodes", m.num_surface_nodes()}, {"h", m.max_edge_length()}});
  j["runs"] = json::array();
  for (const auto& s : r.summaries)
    j["runs"].push_back({{"label", s.label},
                         {"epsilon", s.epsilon},
                         {"tau", s.tau},
                         {"steps", s.steps},
                         {"overlap_integral", s.overlap_integral},
                         {"overlap_bound", s.overlap_bound},
                         {"reaction_identity_error", s.reaction_identity_error},
                         {"min_u", s.min_u},
                         {"max_u", s.max_u},
                         {"min_w", s.min_w},
                         {"max_w", s.max_w}});
  j["comparisons"] = json::array();
  for (const auto& e : r.comparisons)
    j["comparisons"].push_back({{"label", e.label},
                                {"time", e.time},
                                {"l2_omega_u", e.l2_omega_u},
                                {"l2_gamma_u", e.l2_gamma_u},
                                {"l2_gamma_w", e.l2_gamma_w}});
  if (r.limit) {
    j["limit"] = json::array();
    for (std::size_t k = 0; k < r.limit->solutions.size(); ++k)
      j["limit"].push_back({{"time", r.limit->fields[k].time},
                            {"sweeps", r.limit->solutions[k].iterations},
                            {"complementarity", r.limit->solutions[k].complementarity},
                            {"arcs", r.limit->arcs[k].size()}});
  }
  j["dtn"] = json::array();
  for (const auto& d : r.dtn)
    j["dtn"].push_back({{"level", d.level},
                        {"time", d.time},
                        {"surface_nodes", d.surface_nodes},
                        {"asymmetry", d.asymmetry},
                        {"flux_min", d.flux_min},
                        {"flux_max", d.flux_max},
                        {"max_trace_diff", d.max_trace_diff},
                        {"max_multiplier_diff", d.max_multiplier_diff}});
  return j.dump(2) + "\n";
}

}  // namespace

extern "C" {

const char* bsf_version(void) { return "1.0.0"; }

const char* bsf_status_string(bsf_status status) {
  switch (status) {
    case BSF_OK: return "ok";
    case BSF_ERR_INVALID_ARGUMENT: return "invalid argument";
    case BSF_ERR_CONFIG: return "configuration error";
    case BSF_ERR_MESH: return "mesh error";
    case BSF_ERR_ASSEMBLY: return "assembly error";
    case BSF_ERR_SOLVER: return "solver error";
    case BSF_ERR_IO: return "i/o error";
    case BSF_ERR_INTERNAL: return "internal error";
  }
  return "unknown status";
}

const char* bsf_last_error(void) { return g_last_error.c_str(); }

void bsf_string_free(char* s) { std::free(s); }

bsf_status bsf_mesh_generate_annulus(double r_inner, double r_outer, int n_angular, int n_radial, double grading,
                                     bsf_mesh** out) {
  return checked([&] {
    require(out != nullptr, "out is NULL");
    *out = nullptr;
    *out = new bsf_mesh{bsfree::generate_annulus({r_inner, r_outer, n_angular, n_radial, grading})};
  });
}

bsf_status bsf_mesh_import(const char* text, bsf_mesh** out) {
  return checked([&] {
    require(text != nullptr && out != nullptr, "NULL argument");
    *out = nullptr;
    *out = new bsf_mesh{bsfree::import_mesh(text)};
  });
}

bsf_status bsf_mesh_import_file(const char* path, bsf_mesh** out) {
  return checked([&] {
    require(path != nullptr && out != nullptr, "NULL argument");
    *out = nullptr;
    *out = new bsf_mesh{bsfree::read_mesh_file(path)};
  });
}

bsf_status bsf_mesh_export(const bsf_mesh* mesh, char** text_out) {
  return checked([&] {
    require(mesh != nullptr && text_out != nullptr, "NULL argument");
    *text_out = duplicate(bsfree::export_mesh(mesh->mesh));
  });
}

bsf_status bsf_mesh_export_file(const bsf_mesh* mesh, const char* path) {
  return checked([&] {
    require(mesh != nullptr && path != nullptr, "NULL argument");
    bsfree::write_mesh_file(mesh->mesh, path);
  });
}

bsf_status bsf_mesh_refine(const bsf_mesh* mesh, int project, double cx, double cy, double radius, bsf_mesh** out) {
  return checked([&] {
    require(mesh != nullptr && out != nullptr, "NULL argument");
    *out = nullptr;
    std::optional<bsfree::Circle> circle;
    if (project) {
      require(radius > 0.0, "projection radius must be positive");
      circle = bsfree::Circle{{cx, cy}, radius};
    }
    *out = new bsf_mesh{bsfree::refine_uniform(mesh->mesh, circle)};
  });
}

bsf_status bsf_mesh_stats_get(const bsf_mesh* mesh, bsf_mesh_stats* stats) {
  return checked([&] {
    require(mesh != nullptr && stats != nullptr, "NULL argument");
    const bsfree::Mesh& m = mesh->mesh;
    stats->vertices = m.num_vertices();
    stats->triangles = m.num_triangles();
    stats->edges = m.num_edges();
    stats->surface_nodes = m.num_surface_nodes();
    stats->outer_nodes = m.outer_nodes().size();
    stats->loops = m.num_loops();
    stats->area = m.area();
    stats->surface_length = m.surface_length();
    stats->max_edge_length = m.max_edge_length();
    stats->min_angle_deg = m.min_angle() * 180.0 / std::numbers::pi;
    stats->max_angle_deg = m.max_angle() * 180.0 / std::numbers::pi;
  });
}

bsf_status bsf_mesh_vertices(const bsf_mesh* mesh, double* xy, size_t capacity) {
  return checked([&] {
    require(mesh != nullptr && xy != nullptr, "NULL argument");
    require(capacity >= 2 * mesh->mesh.num_vertices(), "buffer too small");
    for (std::size_t i = 0; i < mesh->mesh.num_vertices(); ++i) {
      xy[2 * i] = mesh->mesh.vertices()[i].x;
      xy[2 * i + 1] = mesh->mesh.vertices()[i].y;
    }
  });
}

bsf_status bsf_mesh_surface_nodes(const bsf_mesh* mesh, size_t* ids, size_t capacity) {
  return checked([&] {
    require(mesh != nullptr && ids != nullptr, "NULL argument");
    require(capacity >= mesh->mesh.num_surface_nodes(), "buffer too small");
    for (std::size_t i = 0; i < mesh->mesh.num_surface_nodes(); ++i) ids[i] = mesh->mesh.surface_nodes()[i];
  });
}

void bsf_mesh_free(bsf_mesh* mesh) { delete mesh; }

bsf_model bsf_model_default(void) {
  const bsfree::ModelParams p;
  return bsf_model{p.delta_omega, p.delta_gamma, p.delta_k, p.mu, p.u_dirichlet, 0};
}

bsf_status bsf_stable_timestep(const bsf_mesh* mesh, const bsf_model* model, double u_max, double w_max,
                               double* tau_out) {
  return checked([&] {
    require(mesh != nullptr && model != nullptr && tau_out != nullptr, "NULL argument");
    *tau_out = bsfree::stable_timestep(to_params(*model), mesh->mesh, u_max, w_max);
  });
}

bsf_status bsf_solve_evi(const bsf_mesh* mesh, double t, double u_dirichlet, const double* v0, size_t n_surface,
                         double* z_out, size_t n_bulk, double* multiplier_out, int* sweeps_out) {
  return checked([&] {
    require(mesh != nullptr && v0 != nullptr && z_out != nullptr, "NULL argument");
    require(n_surface == mesh->mesh.num_surface_nodes(), "v0 length does not match the surface");
    require(n_bulk == mesh->mesh.num_vertices(), "z length does not match the mesh");
    const bsfree::VIResult r = bsfree::solve_evi(mesh->mesh, t, u_dirichlet, {v0, n_surface});
    std::copy(r.z.begin(), r.z.end(), z_out);
    if (multiplier_out) std::copy(r.multiplier.begin(), r.multiplier.end(), multiplier_out);
    if (sweeps_out) *sweeps_out = r.iterations;
  });
}

bsf_status bsf_extract_free_boundary(const bsf_mesh* mesh, const double* z_bulk, size_t n_bulk, double threshold,
                                     char** csv_out) {
  return checked([&] {
    require(mesh != nullptr && z_bulk != nullptr && csv_out != nullptr, "NULL argument");
    require(n_bulk == mesh->mesh.num_vertices(), "z length does not match the mesh");
    const auto arcs = bsfree::extract_free_boundary(mesh->mesh, std::span<const double>(z_bulk, n_bulk), threshold);
    *csv_out = duplicate(bsfree::free_boundary_csv(arcs));
  });
}

bsf_status bsf_free_boundary_from_vi_file(const bsf_mesh* mesh, const char* vi_csv_path, double threshold,
                                          char** csv_out) {
  return checked([&] {
    require(mesh != nullptr && vi_csv_path != nullptr && csv_out != nullptr, "NULL argument");
    const std::vector<double> z = bsfree::parse_vi_csv_z(mesh->mesh, bsfree::read_text_file(vi_csv_path));
    *csv_out = duplicate(bsfree::free_boundary_csv(bsfree::extract_free_boundary(mesh->mesh, z, threshold)));
  });
}

bsf_status bsf_preset_names(char** out) {
  return checked([&] {
    require(out != nullptr, "NULL argument");
    std::string s;
    for (const auto& n : bsfree::preset_names()) s += n + "\n";
    *out = duplicate(s);
  });
}

bsf_status bsf_preset_config(const char* name, char** json_out) {
  return checked([&] {
    require(name != nullptr && json_out != nullptr, "NULL argument");
    *json_out = duplicate(bsfree::echo_config(bsfree::preset(name)));
  });
}

bsf_status bsf_config_echo(const char* config_json, char** json_out) {
  return checked([&] {
    require(config_json != nullptr && json_out != nullptr, "NULL argument");
    *json_out = duplicate(bsfree::echo_config(bsfree::parse_config(config_json)));
  });
}

bsf_status bsf_run_experiment(const char* config_json, const char* kind_override, const char* out_dir, int threads,
                              char** summary_json_out) {
  return checked([&] {
    require(config_json != nullptr && out_dir != nullptr, "NULL argument");
    require(threads >= 0, "threads must be nonnegative");
    bsfree::ExperimentConfig cfg = bsfree::parse_config(config_json);
    if (kind_override) {
      cfg.kind = bsfree::parse_kind(kind_override);
      cfg.validate();
    }
    const bsfree::ExperimentResult r = bsfree::run_experiment(cfg, out_dir, threads == 0 ? 1 : threads);
    if (summary_json_out) *summary_json_out = duplicate(summary_json(r, out_dir));
  });
}

bsf_status bsf_compare_runs(const char* run_a_dir, const char* run_b_dir, const double* times, size_t n_times,
                            char** report_csv_out) {
  return checked([&] {
    require(run_a_dir != nullptr && run_b_dir != nullptr && report_csv_out != nullptr, "NULL argument");
    require(times != nullptr || n_times == 0, "times is NULL");
    namespace fs = std::filesystem;
    const fs::path a(run_a_dir), b(run_b_dir);
    const bsfree::Mesh mesh_a = bsfree::read_mesh_file((a / "mesh.txt").string());
    const bsfree::Mesh mesh_b = bsfree::read_mesh_file((b / "mesh.txt").string());
    const auto snaps_a = bsfree::parse_snapshots_csv(mesh_a, bsfree::read_text_file((a / "snapshots.csv").string()));
    const auto snaps_b = bsfree::parse_snapshots_csv(mesh_b, bsfree::read_text_file((b / "snapshots.csv").string()));
    std::vector<double> ts(times, times + n_times);
    if (ts.empty())
      for (const auto& s : snaps_b) ts.push_back(s.time);
    auto name = [](const fs::path& p) {
      const fs::path n = p.lexically_normal();
      return (n.has_filename() ? n.filename() : n.parent_path().filename()).string();
    };
    const auto entries = bsfree::compare_fields(mesh_a, snaps_a, mesh_b, snaps_b, ts, name(a) + "_vs_" + name(b));
    *report_csv_out = duplicate(bsfree::comparison_csv(entries));
  });
}

}  // extern "C"
