// Command-line front end. Talks to the library exclusively through the C API.

#include <bsfree/bsfree.h>

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace {

struct CString {
  char* p = nullptr;
  ~CString() { bsf_string_free(p); }
  std::string str() const { return p ? p : ""; }
};

struct MeshHandle {
  bsf_mesh* p = nullptr;
  ~MeshHandle() { bsf_mesh_free(p); }
};

int exit_code(bsf_status s) {
  switch (s) {
    case BSF_OK: return 0;
    case BSF_ERR_INVALID_ARGUMENT:
    case BSF_ERR_CONFIG: return 2;
    case BSF_ERR_MESH:
    case BSF_ERR_ASSEMBLY: return 3;
    case BSF_ERR_SOLVER: return 4;
    case BSF_ERR_IO: return 5;
    case BSF_ERR_INTERNAL: return 1;
  }
  return 1;
}

struct Failure {
  int code;
};

void check(bsf_status s) {
  if (s == BSF_OK) return;
  std::cerr << "error (" << bsf_status_string(s) << "): " << bsf_last_error() << "\n";
  throw Failure{exit_code(s)};
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    std::cerr << "error: cannot open " << path << "\n";
    throw Failure{5};
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void emit(const std::string& text, const std::string& path) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) {
    std::cerr << "error: cannot write " << path << "\n";
    throw Failure{5};
  }
}

void print_stats(const bsf_mesh* mesh) {
  bsf_mesh_stats s{};
  check(bsf_mesh_stats_get(mesh, &s));
  std::fprintf(stderr,
               "vertices %zu  triangles %zu  edges %zu  surface nodes %zu  outer nodes %zu  loops %zu\n"
               "area %.10g  surface length %.10g  h %.6g  angles [%.2f, %.2f] deg\n",
               s.vertices, s.triangles, s.edges, s.surface_nodes, s.outer_nodes, s.loops, s.area, s.surface_length,
               s.max_edge_length, s.min_angle_deg, s.max_angle_deg);
}

struct Globals {
  std::string config;
  std::string out = "bsfree_out";
  int threads = 1;
  long long seed = 0;
};

/// Config text from --config, else the named preset.
std::string load_config(const Globals& g, const std::string& preset_name, const char* default_preset) {
  if (!g.config.empty()) return read_file(g.config);
  CString json;
  check(bsf_preset_config(preset_name.empty() ? default_preset : preset_name.c_str(), &json.p));
  return json.str();
}

int run_kind(const Globals& g, const std::string& preset_name, const char* kind, const char* default_preset) {
  const std::string cfg = load_config(g, preset_name, default_preset);
  CString summary;
  check(bsf_run_experiment(cfg.c_str(), kind, g.out.c_str(), g.threads, &summary.p));
  std::cout << summary.str();
  return 0;
}

std::vector<double> parse_times(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    try {
      out.push_back(std::stod(item));
    } catch (const std::exception&) {
      std::cerr << "error: bad time '" << item << "'\n";
      throw Failure{2};
    }
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bulk-surface receptor-ligand simulator and free-boundary solver"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--config", g.config, "Experiment config (JSON)")->check(CLI::ExistingFile);
  app.add_option("--out", g.out, "Output directory")->capture_default_str();
  app.add_option("--threads", g.threads, "Worker threads for sweeps")->check(CLI::PositiveNumber)->capture_default_str();
  app.add_option("--seed", g.seed, "Reserved; runs are deterministic");
  app.set_version_flag("--version", std::string(bsf_version()));

  // mesh
  auto* mesh = app.add_subcommand("mesh", "Generate, import or refine meshes");
  mesh->require_subcommand(1);
  double r_in = 1.0, r_out = 2.0, grading = 1.0;
  int n_ang = 32, n_rad = 4;
  std::string mesh_out, mesh_in;
  auto* gen = mesh->add_subcommand("gen", "Structured annulus");
  gen->add_option("--r-inner", r_in)->capture_default_str();
  gen->add_option("--r-outer", r_out)->capture_default_str();
  gen->add_option("--n-angular", n_ang)->capture_default_str();
  gen->add_option("--n-radial", n_rad)->capture_default_str();
  gen->add_option("--grading", grading)->capture_default_str();
  gen->add_option("-o,--output", mesh_out, "Mesh file (stdout if omitted)");

  auto* imp = mesh->add_subcommand("import", "Validate a mesh file and print statistics");
  imp->add_option("file", mesh_in)->required()->check(CLI::ExistingFile);
  imp->add_option("-o,--output", mesh_out, "Re-export the validated mesh");

  int levels = 1;
  std::vector<double> circle;
  auto* ref = mesh->add_subcommand("refine", "Uniform red refinement");
  ref->add_option("file", mesh_in)->required()->check(CLI::ExistingFile);
  ref->add_option("--levels", levels)->check(CLI::Range(1, 8))->capture_default_str();
  ref->add_option("--project-circle", circle, "cx,cy,r: snap new surface nodes to this circle")->expected(3)->delimiter(',');
  ref->add_option("-o,--output", mesh_out, "Mesh file (stdout if omitted)");

  // experiments
  std::string preset_name;
  auto add_run = [&](CLI::App* parent, const char* name, const char* help) {
    auto* sc = parent->add_subcommand(name, help);
    sc->add_option("--preset", preset_name, "Preset used when --config is absent");
    return sc;
  };
  auto* run = app.add_subcommand("run", "Single simulation");
  run->require_subcommand(1);
  auto* run_coupled = add_run(run, "coupled", "Coupled bulk-surface system");
  auto* run_evi = add_run(run, "evi", "Elliptic variational inequality limit");
  auto* run_pvi = add_run(run, "pvi", "Parabolic variational inequality limit");
  auto* sweep = app.add_subcommand("sweep", "Parameter sweeps");
  sweep->require_subcommand(1);
  auto* sweep_eps = add_run(sweep, "eps", "Epsilon sweep against the limit problem");
  auto* study = app.add_subcommand("study", "Convergence studies");
  study->require_subcommand(1);
  auto* study_refine = add_run(study, "refine", "Nested mesh refinement study");
  auto* checkc = app.add_subcommand("check", "Consistency checks");
  checkc->require_subcommand(1);
  auto* check_dtn = add_run(checkc, "dtn", "Dirichlet-to-Neumann cross check");

  std::string run_a, run_b, times_str, report_out;
  auto* cmp = app.add_subcommand("compare", "Discrepancies between two run directories");
  cmp->add_option("run_a", run_a, "Coarse (or equal) run directory")->required()->check(CLI::ExistingDirectory);
  cmp->add_option("run_b", run_b, "Fine run directory")->required()->check(CLI::ExistingDirectory);
  cmp->add_option("--times", times_str, "Comma-separated times (default: all snapshots of run_b)");
  cmp->add_option("-o,--output", report_out, "Report CSV (stdout if omitted)");

  std::string vi_file;
  double threshold = 5e-3;
  auto* fb = app.add_subcommand("freeboundary", "Free-boundary arcs of a VI solution");
  fb->add_option("--mesh", mesh_in)->required()->check(CLI::ExistingFile);
  fb->add_option("--vi", vi_file, "VI CSV written by run evi/pvi")->required()->check(CLI::ExistingFile);
  fb->add_option("--threshold", threshold)->capture_default_str();
  fb->add_option("-o,--output", report_out, "CSV (stdout if omitted)");

  auto* pre = app.add_subcommand("preset", "Shipped experiment presets");
  pre->require_subcommand(1);
  auto* pre_list = pre->add_subcommand("list", "List preset names");
  std::string show_name;
  auto* pre_show = pre->add_subcommand("show", "Print a preset config");
  pre_show->add_option("name", show_name)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    // Usage errors share the configuration exit code; --help and --version exit 0.
    return app.exit(e) == 0 ? 0 : 2;
  }

  try {
    if (gen->parsed()) {
      MeshHandle m;
      check(bsf_mesh_generate_annulus(r_in, r_out, n_ang, n_rad, grading, &m.p));
      print_stats(m.p);
      CString text;
      check(bsf_mesh_export(m.p, &text.p));
      emit(text.str(), mesh_out);
    } else if (imp->parsed()) {
      MeshHandle m;
      check(bsf_mesh_import_file(mesh_in.c_str(), &m.p));
      print_stats(m.p);
      if (!mesh_out.empty()) check(bsf_mesh_export_file(m.p, mesh_out.c_str()));
    } else if (ref->parsed()) {
      MeshHandle m;
      check(bsf_mesh_import_file(mesh_in.c_str(), &m.p));
      for (int i = 0; i < levels; ++i) {
        MeshHandle next;
        if (circle.size() == 3) check(bsf_mesh_refine(m.p, 1, circle[0], circle[1], circle[2], &next.p));
        else check(bsf_mesh_refine(m.p, 0, 0.0, 0.0, 0.0, &next.p));
        std::swap(m.p, next.p);
      }
      print_stats(m.p);
      CString text;
      check(bsf_mesh_export(m.p, &text.p));
      emit(text.str(), mesh_out);
    } else if (run_coupled->parsed()) {
      return run_kind(g, preset_name, "coupled", "paper-2d-eps-1e-1");
    } else if (run_evi->parsed()) {
      return run_kind(g, preset_name, "evi", "paper-2d-evi");
    } else if (run_pvi->parsed()) {
      return run_kind(g, preset_name, "pvi", "paper-2d-pvi");
    } else if (sweep_eps->parsed()) {
      return run_kind(g, preset_name, "eps-sweep", "paper-2d-eps-sweep");
    } else if (study_refine->parsed()) {
      return run_kind(g, preset_name, "refine-study", "paper-2d-refine-study");
    } else if (check_dtn->parsed()) {
      return run_kind(g, preset_name, "dtn-check", "dtn-check");
    } else if (cmp->parsed()) {
      const std::vector<double> times = parse_times(times_str);
      CString report;
      check(bsf_compare_runs(run_a.c_str(), run_b.c_str(), times.data(), times.size(), &report.p));
      emit(report.str(), report_out);
    } else if (fb->parsed()) {
      MeshHandle m;
      check(bsf_mesh_import_file(mesh_in.c_str(), &m.p));
      CString csv;
      check(bsf_free_boundary_from_vi_file(m.p, vi_file.c_str(), threshold, &csv.p));
      emit(csv.str(), report_out);
    } else if (pre_list->parsed()) {
      CString names;
      check(bsf_preset_names(&names.p));
      std::cout << names.str();
    } else if (pre_show->parsed()) {
      CString json;
      check(bsf_preset_config(show_name.c_str(), &json.p));
      std::cout << json.str();
    }
  } catch (const Failure& f) {
    return f.code;
  }
  return 0;
}
