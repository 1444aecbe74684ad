#include "experiments.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numbers>
#include <set>
#include <thread>

#include <json.hpp>

#include "error.hpp"
#include "fem.hpp"

namespace bsfree {

using nlohmann::json;

namespace {

constexpr std::pair<ExperimentKind, std::string_view> kKindNames[] = {
    {ExperimentKind::Coupled, "coupled"},          {ExperimentKind::Evi, "evi"},
    {ExperimentKind::Pvi, "pvi"},                  {ExperimentKind::EpsSweep, "eps-sweep"},
    {ExperimentKind::RefineStudy, "refine-study"}, {ExperimentKind::DtnCheck, "dtn-check"},
};

/// Re-raises a ConfigError from a nested validator under `prefix`.
template <class F>
void under(const std::string& prefix, F&& f) {
  try {
    f();
  } catch (const ConfigError& e) {
    throw ConfigError(e.path().empty() ? prefix : prefix + "." + e.path(), e.message());
  }
}

/// Typed access to a JSON object that remembers the path and rejects
/// members nobody asked for.
class Reader {
 public:
  Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j.is_object()) throw ConfigError(path_.empty() ? "<root>" : path_, "expected an object");
  }

  std::string at(std::string_view key) const { return path_.empty() ? std::string(key) : path_ + "." + std::string(key); }

  const json* get(std::string_view key) {
    used_.insert(std::string(key));
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  double number(std::string_view key, double def) {
    const json* v = get(key);
    if (!v) return def;
    if (!v->is_number()) throw ConfigError(at(key), "expected a number");
    return v->get<double>();
  }

  int integer(std::string_view key, int def) {
    const json* v = get(key);
    if (!v) return def;
    if (!v->is_number_integer()) throw ConfigError(at(key), "expected an integer");
    return v->get<int>();
  }

  bool boolean(std::string_view key, bool def) {
    const json* v = get(key);
    if (!v) return def;
    if (!v->is_boolean()) throw ConfigError(at(key), "expected true or false");
    return v->get<bool>();
  }

  std::string string(std::string_view key, const std::string& def) {
    const json* v = get(key);
    if (!v) return def;
    if (!v->is_string()) throw ConfigError(at(key), "expected a string");
    return v->get<std::string>();
  }

  std::vector<double> numbers(std::string_view key, const std::vector<double>& def) {
    const json* v = get(key);
    if (!v) return def;
    if (!v->is_array()) throw ConfigError(at(key), "expected an array of numbers");
    std::vector<double> out;
    for (std::size_t i = 0; i < v->size(); ++i) {
      if (!(*v)[i].is_number()) throw ConfigError(at(key) + "[" + std::to_string(i) + "]", "expected a number");
      out.push_back((*v)[i].get<double>());
    }
    return out;
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!used_.count(it.key())) throw ConfigError(at(it.key()), "unknown member");
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> used_;
};

InitialProfile read_profile(const json& j, const std::string& path) {
  Reader r(j, path);
  InitialProfile p;
  const std::string type = r.string("type", "constant");
  if (type == "constant") p.kind = InitialProfile::Kind::Constant;
  else if (type == "trig") p.kind = InitialProfile::Kind::Trig;
  else if (type == "cos-theta") p.kind = InitialProfile::Kind::CosTheta;
  else throw ConfigError(r.at("type"), "unknown profile '" + type + "' (constant, trig, cos-theta)");
  p.value = r.number("value", 1.0);
  r.finish();
  return p;
}

json write_profile(const InitialProfile& p) {
  static constexpr const char* names[] = {"constant", "trig", "cos-theta"};
  return json{{"type", names[static_cast<int>(p.kind)]}, {"value", p.value}};
}

}  // namespace

std::string_view kind_name(ExperimentKind kind) {
  for (const auto& [k, n] : kKindNames)
    if (k == kind) return n;
  return "unknown";
}

ExperimentKind parse_kind(std::string_view name) {
  for (const auto& [k, n] : kKindNames)
    if (n == name) return k;
  throw ConfigError("kind", "unknown experiment kind '" + std::string(name) +
                                "' (coupled, evi, pvi, eps-sweep, refine-study, dtn-check)");
}

void ExperimentConfig::validate() const {
  if (mesh.annulus) under("mesh.annulus", [&] { mesh.annulus->validate(); });
  else if (mesh.file.empty()) throw ConfigError("mesh", "needs either \"annulus\" or \"file\"");
  if (mesh.refine < 0 || mesh.refine > 8) throw ConfigError("mesh.refine", "must lie in [0, 8]");
  under("model", [&] { model.validate(); });
  if (kind == ExperimentKind::EpsSweep && eps_list.empty()) throw ConfigError("eps_list", "sweep list is empty");
  for (std::size_t i = 0; i < eps_list.size(); ++i)
    if (!(eps_list[i] > 0.0)) throw ConfigError("eps_list[" + std::to_string(i) + "]", "must be positive");
  if (!std::isfinite(u0.value)) throw ConfigError("initial.u0.value", "must be finite");
  if (!std::isfinite(w0.value)) throw ConfigError("initial.w0.value", "must be finite");
  if (timestep.automatic) {
    if (!(timestep.cap > 0.0)) throw ConfigError("timestep.cap", "must be positive");
    if (!(timestep.safety > 0.0 && timestep.safety <= 1.0)) throw ConfigError("timestep.safety", "must lie in (0, 1]");
  } else if (!(timestep.tau > 0.0) || !std::isfinite(timestep.tau)) {
    throw ConfigError("timestep", "must be positive");
  }
  if (!(t_end > 0.0) || !std::isfinite(t_end)) throw ConfigError("t_end", "must be positive");
  for (std::size_t i = 0; i < snapshot_times.size(); ++i)
    if (!(snapshot_times[i] >= 0.0 && snapshot_times[i] <= t_end))
      throw ConfigError("snapshot_times[" + std::to_string(i) + "]", "must lie in [0, t_end]");
  if ((kind == ExperimentKind::EpsSweep || kind == ExperimentKind::RefineStudy) && snapshot_times.empty())
    throw ConfigError("snapshot_times", "comparisons need at least one time");
  if (!(postprocess_tau > 0.0)) throw ConfigError("postprocess_tau", "must be positive");
  if (refine_levels < 0 || refine_levels > 6) throw ConfigError("refine_levels", "must lie in [0, 6]");
  if (kind == ExperimentKind::RefineStudy && refine_levels < 1)
    throw ConfigError("refine_levels", "refine-study needs at least one refinement");
  under("psor", [&] { psor.validate(); });
  if (!(free_boundary_threshold > 0.0)) throw ConfigError("free_boundary_threshold", "must be positive");
  if (diagnostics_every < 1) throw ConfigError("output.diagnostics_every", "must be at least 1");
}

ExperimentConfig parse_config(std::string_view text) {
  json root;
  try {
    root = json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    throw ConfigError("<root>", std::string("invalid JSON: ") + e.what());
  }
  Reader r(root, "");
  ExperimentConfig c;
  const json* schema = r.get("schema");
  if (!schema) throw ConfigError("schema", "missing (expected 1)");
  if (!schema->is_number_integer() || schema->get<int>() != 1) throw ConfigError("schema", "unsupported version (expected 1)");
  c.name = r.string("name", "");
  if (const json* k = r.get("kind")) {
    if (!k->is_string()) throw ConfigError("kind", "expected a string");
    c.kind = parse_kind(k->get<std::string>());
  } else {
    throw ConfigError("kind", "missing");
  }

  if (const json* m = r.get("mesh")) {
    Reader mr(*m, "mesh");
    const json* a = mr.get("annulus");
    const json* f = mr.get("file");
    if (a && f) throw ConfigError("mesh", "give either \"annulus\" or \"file\", not both");
    if (f) {
      if (!f->is_string()) throw ConfigError("mesh.file", "expected a string");
      c.mesh.annulus.reset();
      c.mesh.file = f->get<std::string>();
    } else if (a) {
      Reader ar(*a, "mesh.annulus");
      AnnulusSpec s;
      s.r_inner = ar.number("r_inner", s.r_inner);
      s.r_outer = ar.number("r_outer", s.r_outer);
      s.n_angular = ar.integer("n_angular", s.n_angular);
      s.n_radial = ar.integer("n_radial", s.n_radial);
      s.grading = ar.number("grading", s.grading);
      ar.finish();
      c.mesh.annulus = s;
    }
    c.mesh.refine = mr.integer("refine", 0);
    mr.finish();
  }

  if (const json* m = r.get("model")) {
    Reader mr(*m, "model");
    ModelParams& p = c.model;
    p.delta_omega = mr.number("delta_omega", p.delta_omega);
    p.delta_gamma = mr.number("delta_gamma", p.delta_gamma);
    p.delta_k = mr.number("delta_k", p.delta_k);
    p.mu = mr.number("mu", p.mu);
    p.u_dirichlet = mr.number("u_dirichlet", p.u_dirichlet);
    const std::string bc = mr.string("outer_bc", "dirichlet");
    if (bc == "dirichlet") p.outer_bc = OuterBc::Dirichlet;
    else if (bc == "neumann") p.outer_bc = OuterBc::Neumann;
    else throw ConfigError("model.outer_bc", "expected \"dirichlet\" or \"neumann\"");
    mr.finish();
  }
  c.eps_list = r.numbers("eps_list", {});

  if (const json* init = r.get("initial")) {
    Reader ir(*init, "initial");
    if (const json* u = ir.get("u0")) c.u0 = read_profile(*u, "initial.u0");
    if (const json* w = ir.get("w0")) c.w0 = read_profile(*w, "initial.w0");
    ir.finish();
  }

  if (const json* ts = r.get("timestep")) {
    if (ts->is_string()) {
      if (ts->get<std::string>() != "auto") throw ConfigError("timestep", "expected \"auto\", a number or an object");
      c.timestep.automatic = true;
    } else if (ts->is_number()) {
      c.timestep.automatic = false;
      c.timestep.tau = ts->get<double>();
    } else {
      Reader tr(*ts, "timestep");
      const std::string policy = tr.string("policy", "auto");
      if (policy == "auto") c.timestep.automatic = true;
      else if (policy == "fixed") c.timestep.automatic = false;
      else throw ConfigError("timestep.policy", "expected \"auto\" or \"fixed\"");
      c.timestep.tau = tr.number("tau", c.timestep.tau);
      c.timestep.cap = tr.number("cap", c.timestep.cap);
      c.timestep.safety = tr.number("safety", c.timestep.safety);
      tr.finish();
    }
  }
  c.t_end = r.number("t_end", c.t_end);
  c.snapshot_times = r.numbers("snapshot_times", {});
  c.postprocess_tau = r.number("postprocess_tau", c.postprocess_tau);
  c.refine_levels = r.integer("refine_levels", c.refine_levels);
  {
    const std::string mass = r.string("mass", "lumped");
    if (mass == "lumped") c.mass = MassKind::Lumped;
    else if (mass == "consistent") c.mass = MassKind::Consistent;
    else throw ConfigError("mass", "expected \"lumped\" or \"consistent\"");
  }
  if (const json* p = r.get("psor")) {
    Reader pr(*p, "psor");
    c.psor.omega = pr.number("omega", c.psor.omega);
    c.psor.update_tol = pr.number("update_tol", c.psor.update_tol);
    c.psor.comp_tol = pr.number("comp_tol", c.psor.comp_tol);
    c.psor.max_sweeps = pr.integer("max_sweeps", c.psor.max_sweeps);
    pr.finish();
  }
  c.free_boundary_threshold = r.number("free_boundary_threshold", c.free_boundary_threshold);
  if (const json* o = r.get("output")) {
    Reader orr(*o, "output");
    c.diagnostics_every = orr.integer("diagnostics_every", c.diagnostics_every);
    c.write_vtk = orr.boolean("vtk", c.write_vtk);
    orr.finish();
  }
  c.allow_unstable_timestep = r.boolean("allow_unstable_timestep", false);
  r.finish();
  c.validate();
  return c;
}

std::string echo_config(const ExperimentConfig& c) {
  json j;
  j["schema"] = 1;
  j["name"] = c.name;
  j["kind"] = std::string(kind_name(c.kind));
  json mesh;
  if (c.mesh.annulus) {
    const AnnulusSpec& s = *c.mesh.annulus;
    mesh["annulus"] = {{"r_inner", s.r_inner}, {"r_outer", s.r_outer}, {"n_angular", s.n_angular},
                       {"n_radial", s.n_radial}, {"grading", s.grading}};
  } else {
    mesh["file"] = c.mesh.file;
  }
  mesh["refine"] = c.mesh.refine;
  j["mesh"] = mesh;
  j["model"] = {{"delta_omega", c.model.delta_omega}, {"delta_gamma", c.model.delta_gamma},
                {"delta_k", c.model.delta_k},         {"mu", c.model.mu},
                {"u_dirichlet", c.model.u_dirichlet},
                {"outer_bc", c.model.outer_bc == OuterBc::Dirichlet ? "dirichlet" : "neumann"}};
  j["eps_list"] = c.eps_list;
  j["initial"] = {{"u0", write_profile(c.u0)}, {"w0", write_profile(c.w0)}};
  j["timestep"] = {{"policy", c.timestep.automatic ? "auto" : "fixed"},
                   {"tau", c.timestep.tau},
                   {"cap", c.timestep.cap},
                   {"safety", c.timestep.safety}};
  j["t_end"] = c.t_end;
  j["snapshot_times"] = c.snapshot_times;
  j["postprocess_tau"] = c.postprocess_tau;
  j["refine_levels"] = c.refine_levels;
  j["mass"] = c.mass == MassKind::Lumped ? "lumped" : "consistent";
  j["psor"] = {{"omega", c.psor.omega},
               {"update_tol", c.psor.update_tol},
               {"comp_tol", c.psor.comp_tol},
               {"max_sweeps", c.psor.max_sweeps}};
  j["free_boundary_threshold"] = c.free_boundary_threshold;
  j["output"] = {{"diagnostics_every", c.diagnostics_every}, {"vtk", c.write_vtk}};
  j["allow_unstable_timestep"] = c.allow_unstable_timestep;
  return j.dump(2) + "\n";
}

namespace {

ExperimentConfig preset_base(std::string name) {
  ExperimentConfig c;
  c.name = std::move(name);
  c.mesh.annulus = AnnulusSpec{1.0, 2.0, 64, 8, 1.0};
  c.u0 = {InitialProfile::Kind::Constant, 1.0};
  c.w0 = {InitialProfile::Kind::Trig, 1.0};
  c.model.u_dirichlet = 1.0;
  c.t_end = 0.7;
  c.snapshot_times = {0.0, 0.01, 0.2, 0.4, 0.7};
  c.diagnostics_every = 10;
  return c;
}

void set_eps(ModelParams& m, double eps) { m.delta_omega = m.delta_gamma = m.delta_k = eps; }

}  // namespace

std::vector<std::string> preset_names() {
  return {"paper-2d-eps-1e-1",  "paper-2d-eps-1e-2",  "paper-2d-eps-1e-3",    "paper-2d-evi",
          "paper-2d-pvi",       "paper-2d-eps-sweep", "paper-2d-refine-study", "physical-parabolic",
          "physical-elliptic",  "radial-oracle",      "neumann-conservation",  "dtn-check"};
}

ExperimentConfig preset(std::string_view name) {
  const std::string n(name);
  ExperimentConfig c = preset_base(n);
  if (n == "paper-2d-eps-1e-1" || n == "paper-2d-eps-1e-2" || n == "paper-2d-eps-1e-3") {
    set_eps(c.model, n == "paper-2d-eps-1e-1" ? 1e-1 : n == "paper-2d-eps-1e-2" ? 1e-2 : 1e-3);
  } else if (n == "paper-2d-evi") {
    c.kind = ExperimentKind::Evi;
    c.snapshot_times = {0.01, 0.2, 0.4, 0.7};
  } else if (n == "paper-2d-pvi") {
    c.kind = ExperimentKind::Pvi;
    c.model.delta_omega = 1.0;
    c.timestep.automatic = false;
    c.timestep.tau = 1e-2;
    c.snapshot_times = {0.01, 0.2, 0.4, 0.7};
  } else if (n == "paper-2d-eps-sweep") {
    c.kind = ExperimentKind::EpsSweep;
    c.eps_list = {1e-1, 1e-2};
    c.snapshot_times = {0.2, 0.4, 0.7};
  } else if (n == "paper-2d-refine-study") {
    c.kind = ExperimentKind::RefineStudy;
    c.mesh.annulus = AnnulusSpec{1.0, 2.0, 16, 2, 1.0};
    c.refine_levels = 2;
    set_eps(c.model, 1e-2);
    c.snapshot_times = {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7};
  } else if (n == "physical-parabolic") {
    c.model.delta_omega = 1.0;
    c.model.delta_gamma = 1e-3;
    c.model.delta_k = 5.7e-2;
  } else if (n == "physical-elliptic") {
    c.model.delta_omega = 5.7e-2;
    c.model.delta_gamma = 1.8e-2;
    c.model.delta_k = 5.7e-2;
  } else if (n == "radial-oracle") {
    c.kind = ExperimentKind::Evi;
    c.mesh.annulus = AnnulusSpec{1.0, 2.0, 32, 4, 1.0};
    c.w0 = {InitialProfile::Kind::Constant, 1.0};
    c.t_end = 1.0;
    c.snapshot_times = {0.3, 0.6, 0.8, 1.0};
  } else if (n == "neumann-conservation") {
    set_eps(c.model, 1e-1);
    c.model.outer_bc = OuterBc::Neumann;
    c.t_end = 0.2;
    c.snapshot_times = {0.0, 0.1, 0.2};
  } else if (n == "dtn-check") {
    c.kind = ExperimentKind::DtnCheck;
    c.mesh.annulus = AnnulusSpec{1.0, 2.0, 32, 4, 1.0};
    c.refine_levels = 1;
    c.snapshot_times = {0.2, 0.4, 0.7};
    c.psor.update_tol = 1e-13;
    c.psor.comp_tol = 1e-11;
  } else {
    std::string list;
    for (const auto& p : preset_names()) list += (list.empty() ? "" : ", ") + p;
    throw ConfigError("preset", "unknown preset '" + n + "' (available: " + list + ")");
  }
  c.validate();
  return c;
}

Mesh build_mesh(const MeshSource& source) {
  Mesh mesh = source.annulus ? generate_annulus(*source.annulus) : read_mesh_file(source.file);
  for (int i = 0; i < source.refine; ++i) mesh = refine_uniform(mesh);
  return mesh;
}

namespace {

double profile_at(const InitialProfile& p, const Point& x) {
  switch (p.kind) {
    case InitialProfile::Kind::Constant:
      return p.value;
    case InitialProfile::Kind::Trig:
      return std::max(0.0, std::cos(std::numbers::pi * x.y) + std::sin(std::numbers::pi * x.x));
    case InitialProfile::Kind::CosTheta:
      return p.value * std::max(0.0, std::cos(polar_angle(x)));
  }
  return 0.0;
}

}  // namespace

std::vector<double> bulk_profile(const Mesh& mesh, const InitialProfile& profile) {
  std::vector<double> v(mesh.num_vertices());
  for (Index i = 0; i < v.size(); ++i) v[i] = profile_at(profile, mesh.vertices()[i]);
  return v;
}

std::vector<double> surface_profile(const Mesh& mesh, const InitialProfile& profile) {
  std::vector<double> v(mesh.num_surface_nodes());
  for (Index i = 0; i < v.size(); ++i) v[i] = profile_at(profile, mesh.vertices()[mesh.surface_nodes()[i]]);
  return v;
}

double resolve_timestep(const ExperimentConfig& c, const Mesh& mesh, const ModelParams& model) {
  if (!c.timestep.automatic) return c.timestep.tau;
  const std::vector<double> u0 = bulk_profile(mesh, c.u0);
  std::vector<double> w0 = surface_profile(mesh, c.w0);
  for (double& v : w0) v = std::max(v, 0.0);
  const double limit = stable_timestep(model, mesh, bulk_upper_bound(model, u0), max_abs(w0));
  return std::min(c.timestep.cap, c.timestep.safety * limit);
}

namespace {

CoupledMember run_member(const ExperimentConfig& c, const Mesh& mesh, std::size_t mesh_index, std::string label,
                         const ModelParams& model, double epsilon) {
  RunOptions opts;
  opts.snapshot_times = c.snapshot_times;
  opts.allow_unstable_tau = c.allow_unstable_timestep;
  opts.mass = c.mass;
  const double tau = resolve_timestep(c, mesh, model);
  CoupledRun run = run_coupled(mesh, model, tau, c.t_end, bulk_profile(mesh, c.u0), surface_profile(mesh, c.w0), opts);
  CoupledMember m;
  m.label = std::move(label);
  m.mesh_index = mesh_index;
  m.model = model;
  m.epsilon = epsilon;
  m.diagnostics = std::move(run.diagnostics);
  for (auto& s : run.snapshots) m.snapshots.push_back(FieldSnapshot{s.time, std::move(s.u), std::move(s.w)});
  return m;
}

SweepSummary summarize(const CoupledMember& m) {
  SweepSummary s;
  s.label = m.label;
  s.epsilon = m.epsilon;
  s.tau = m.diagnostics.tau;
  s.steps = m.diagnostics.steps;
  const StepRecord& last = m.diagnostics.records.back();
  s.overlap_integral = last.overlap_cumulative;
  s.overlap_bound = m.model.delta_k * m.diagnostics.initial_surface_mass;
  const double s0 = m.diagnostics.initial_surface_mass;
  const double lost = s0 - last.surface_total;
  s.reaction_identity_error = std::abs(m.model.mu * last.reaction_cumulative - lost) / std::max(s0, 1e-300);
  s.min_u = s.min_w = std::numeric_limits<double>::infinity();
  s.max_u = s.max_w = -std::numeric_limits<double>::infinity();
  for (const StepRecord& r : m.diagnostics.records) {
    s.min_u = std::min(s.min_u, r.min_u);
    s.max_u = std::max(s.max_u, r.max_u);
    s.min_w = std::min(s.min_w, r.min_w);
    s.max_w = std::max(s.max_w, r.max_w);
  }
  return s;
}

/// EVI (pvi: PVI stepping) solutions and recovered fields at the snapshot times.
LimitSeries solve_limit(const ExperimentConfig& c, const Mesh& mesh, bool parabolic) {
  LimitSeries out;
  const std::vector<double> w0 = surface_profile(mesh, c.w0);
  std::vector<double> v0(w0.size());
  for (std::size_t i = 0; i < v0.size(); ++i) v0[i] = -std::max(w0[i], 0.0);
  const double ud = c.model.u_dirichlet;

  if (!parabolic) {
    const EviSolver solver(mesh, c.psor);
    std::vector<double> times = c.snapshot_times;
    std::sort(times.begin(), times.end());
    std::vector<double> guess;
    for (double t : times) {
      // Backward difference when possible, forward difference near t = 0.
      const double tp = t >= c.postprocess_tau ? t - c.postprocess_tau : t;
      const double tn = t >= c.postprocess_tau ? t : t + c.postprocess_tau;
      VIResult prev = solver.solve(tp, ud, v0, guess);
      VIResult next = solver.solve(tn, ud, v0, prev.z);
      LimitFields f = postprocess_uw(mesh, next, prev, tn - tp, w0);
      VIResult at_t = tn == t ? std::move(next) : std::move(prev);
      guess = at_t.z;
      out.arcs.push_back(extract_free_boundary(mesh, at_t, c.free_boundary_threshold));
      out.fields.push_back(FieldSnapshot{t, std::move(f.u), std::move(f.w)});
      out.solutions.push_back(std::move(at_t));
    }
    return out;
  }

  const double tau = c.timestep.automatic ? c.postprocess_tau : c.timestep.tau;
  const int steps = static_cast<int>(std::ceil(c.t_end / tau - 1e-9));
  const double dt = c.t_end / steps;
  const std::vector<double> u0 = bulk_profile(mesh, c.u0);
  const PviSolver solver(mesh, c.model.delta_omega, dt, c.psor);
  const ParabolicTerms terms{c.model.delta_omega, u0};

  std::vector<std::pair<int, double>> wanted;
  for (double t : c.snapshot_times) wanted.emplace_back(static_cast<int>(std::lround(t / dt)), t);
  std::sort(wanted.begin(), wanted.end());

  VIResult prev;
  prev.time = 0.0;
  prev.z.assign(mesh.num_vertices(), 0.0);
  prev.multiplier.assign(mesh.num_surface_nodes(), 0.0);
  prev.active.assign(mesh.num_surface_nodes(), 1);
  std::size_t next_wanted = 0;
  auto record = [&](int m, const VIResult& cur, const VIResult* before) {
    while (next_wanted < wanted.size() && wanted[next_wanted].first == m) {
      FieldSnapshot f{cur.time, u0, w0};
      if (before) {
        LimitFields lf = postprocess_uw(mesh, cur, *before, dt, w0, terms);
        f.u = std::move(lf.u);
        f.w = std::move(lf.w);
      }
      out.fields.push_back(std::move(f));
      out.solutions.push_back(cur);
      out.arcs.push_back(extract_free_boundary(mesh, cur, c.free_boundary_threshold));
      ++next_wanted;
    }
  };
  record(0, prev, nullptr);
  for (int m = 1; m <= steps; ++m) {
    VIResult cur = solver.step(prev.z, m * dt, ud, u0, v0);
    record(m, cur, &prev);
    prev = std::move(cur);
  }
  return out;
}

std::vector<DtnCheckRow> dtn_check(const ExperimentConfig& c, const std::vector<Mesh>& meshes) {
  std::vector<DtnCheckRow> rows;
  for (std::size_t level = 0; level < meshes.size(); ++level) {
    const Mesh& mesh = meshes[level];
    const DtnOperator dtn(mesh, c.model.u_dirichlet);
    const std::vector<double> s = surface_mass_lumped(mesh);
    const std::vector<double> ones(dtn.size(), 1.0);
    const std::vector<double> a1 = dtn.apply(ones);
    double fmin = std::numeric_limits<double>::infinity(), fmax = -fmin;
    for (std::size_t i = 0; i < a1.size(); ++i) {
      fmin = std::min(fmin, a1[i] / s[i]);
      fmax = std::max(fmax, a1[i] / s[i]);
    }
    const double asym = dtn.matrix().max_asymmetry();

    const EviSolver evi(mesh, c.psor);
    const std::vector<double> w0 = surface_profile(mesh, c.w0);
    std::vector<double> v0(w0.size());
    for (std::size_t i = 0; i < v0.size(); ++i) v0[i] = -std::max(w0[i], 0.0);
    for (double t : c.snapshot_times) {
      const VIResult bulk = evi.solve(t, c.model.u_dirichlet, v0);
      const SurfaceVIResult surf = solve_dtn_complementarity(dtn, mesh, t, v0, c.psor);
      DtnCheckRow r;
      r.level = static_cast<int>(level);
      r.time = t;
      r.surface_nodes = dtn.size();
      r.asymmetry = asym;
      r.flux_min = fmin;
      r.flux_max = fmax;
      for (std::size_t i = 0; i < dtn.size(); ++i) {
        r.max_trace_diff = std::max(r.max_trace_diff, std::abs(surf.z[i] - bulk.z[mesh.surface_nodes()[i]]));
        r.max_multiplier_diff = std::max(r.max_multiplier_diff, std::abs(surf.multiplier[i] - bulk.multiplier[i]));
      }
      rows.push_back(r);
    }
  }
  return rows;
}

std::string eps_label(double eps) { return "eps_" + format_double(eps); }

}  // namespace

ExperimentResult execute_experiment(const ExperimentConfig& config, int threads) {
  config.validate();
  ExperimentResult res;
  res.config = config;
  res.meshes.push_back(build_mesh(config.mesh));
  const ExperimentConfig& c = res.config;

  switch (c.kind) {
    case ExperimentKind::Coupled:
      res.members.push_back(run_member(c, res.meshes[0], 0, c.name.empty() ? "run" : c.name, c.model, 0.0));
      res.summaries.push_back(summarize(res.members.back()));
      break;

    case ExperimentKind::Evi:
    case ExperimentKind::Pvi:
      res.limit = solve_limit(c, res.meshes[0], c.kind == ExperimentKind::Pvi);
      break;

    case ExperimentKind::EpsSweep: {
      res.limit = solve_limit(c, res.meshes[0], false);
      res.members.resize(c.eps_list.size());
      std::vector<std::exception_ptr> errors(c.eps_list.size());
      auto job = [&](std::size_t k) {
        try {
          ModelParams m = c.model;
          set_eps(m, c.eps_list[k]);
          res.members[k] = run_member(c, res.meshes[0], 0, eps_label(c.eps_list[k]), m, c.eps_list[k]);
        } catch (...) {
          errors[k] = std::current_exception();
        }
      };
      const std::size_t workers = std::clamp<std::size_t>(threads < 1 ? 1 : threads, 1, c.eps_list.size());
      if (workers == 1) {
        for (std::size_t k = 0; k < c.eps_list.size(); ++k) job(k);
      } else {
        std::vector<std::thread> pool;
        for (std::size_t w = 0; w < workers; ++w)
          pool.emplace_back([&, w] {
            for (std::size_t k = w; k < c.eps_list.size(); k += workers) job(k);
          });
        for (auto& t : pool) t.join();
      }
      for (auto& e : errors)
        if (e) std::rethrow_exception(e);
      for (const CoupledMember& m : res.members) {
        auto entries = compare_fields(res.meshes[0], m.snapshots, res.meshes[0], res.limit->fields, c.snapshot_times, m.label);
        res.comparisons.insert(res.comparisons.end(), entries.begin(), entries.end());
        res.summaries.push_back(summarize(m));
      }
      break;
    }

    case ExperimentKind::RefineStudy: {
      for (int l = 1; l <= c.refine_levels; ++l) res.meshes.push_back(refine_uniform(res.meshes.back()));
      for (std::size_t l = 0; l < res.meshes.size(); ++l) {
        res.members.push_back(run_member(c, res.meshes[l], l, "level_" + std::to_string(l), c.model, 0.0));
        res.summaries.push_back(summarize(res.members.back()));
      }
      const std::size_t fine = res.meshes.size() - 1;
      for (std::size_t l = 0; l < fine; ++l) {
        auto entries = compare_fields(res.meshes[l], res.members[l].snapshots, res.meshes[fine],
                                      res.members[fine].snapshots, c.snapshot_times,
                                      "level_" + std::to_string(l) + "_vs_level_" + std::to_string(fine));
        res.comparisons.insert(res.comparisons.end(), entries.begin(), entries.end());
      }
      break;
    }

    case ExperimentKind::DtnCheck:
      for (int l = 1; l <= c.refine_levels; ++l) res.meshes.push_back(refine_uniform(res.meshes.back()));
      res.dtn = dtn_check(c, res.meshes);
      break;
  }
  return res;
}

namespace {

namespace fs = std::filesystem;

std::string indexed(const std::string& stem, std::size_t k, const char* ext) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%03zu", k);
  return stem + "_" + buf + ext;
}

void write_member(const CoupledMember& m, const Mesh& mesh, const fs::path& dir, const ExperimentConfig& c) {
  fs::create_directories(dir);
  write_text_file((dir / "diagnostics.csv").string(), diagnostics_csv(m.diagnostics.records, c.diagnostics_every));
  write_text_file((dir / "snapshots.csv").string(), snapshots_csv(mesh, m.snapshots));
  if (c.write_vtk)
    for (std::size_t k = 0; k < m.snapshots.size(); ++k)
      write_text_file((dir / indexed("snapshot", k, ".vtk")).string(),
                      vtk_legacy(mesh, m.snapshots[k].u, m.snapshots[k].w, m.label + " t=" + format_double(m.snapshots[k].time)));
}

void write_limit(const LimitSeries& s, const Mesh& mesh, const fs::path& dir, const ExperimentConfig& c) {
  fs::create_directories(dir);
  write_text_file((dir / "snapshots.csv").string(), snapshots_csv(mesh, s.fields));
  std::string index = "index,time,iterations,complementarity,active_nodes,arcs\n";
  for (std::size_t k = 0; k < s.solutions.size(); ++k) {
    const VIResult& vi = s.solutions[k];
    write_text_file((dir / indexed("vi", k, ".csv")).string(), vi_csv(mesh, vi));
    write_text_file((dir / indexed("freeboundary", k, ".csv")).string(), free_boundary_csv(s.arcs[k]));
    if (c.write_vtk)
      write_text_file((dir / indexed("snapshot", k, ".vtk")).string(),
                      vtk_legacy(mesh, s.fields[k].u, s.fields[k].w, "limit t=" + format_double(s.fields[k].time)));
    std::size_t active = 0;
    for (char a : vi.active) active += a ? 1 : 0;
    index += std::to_string(k) + ',' + format_double(s.fields[k].time) + ',' + std::to_string(vi.iterations) + ',' +
             format_double(vi.complementarity) + ',' + std::to_string(active) + ',' + std::to_string(s.arcs[k].size()) +
             '\n';
  }
  write_text_file((dir / "times.csv").string(), index);
}

}  // namespace

void write_artifacts(const ExperimentResult& r, const std::string& out_dir) {
  const fs::path root(out_dir);
  fs::create_directories(root);
  const ExperimentConfig& c = r.config;
  write_text_file((root / "config.json").string(), echo_config(c));
  write_text_file((root / "mesh.txt").string(), export_mesh(r.meshes[0]));

  switch (c.kind) {
    case ExperimentKind::Coupled:
      write_member(r.members[0], r.meshes[0], root, c);
      break;
    case ExperimentKind::Evi:
    case ExperimentKind::Pvi:
      write_limit(*r.limit, r.meshes[0], root, c);
      break;
    case ExperimentKind::EpsSweep:
      write_limit(*r.limit, r.meshes[0], root / "reference", c);
      for (const CoupledMember& m : r.members) write_member(m, r.meshes[0], root / m.label, c);
      break;
    case ExperimentKind::RefineStudy:
      for (const CoupledMember& m : r.members) {
        write_member(m, r.meshes[m.mesh_index], root / m.label, c);
        write_text_file((root / m.label / "mesh.txt").string(), export_mesh(r.meshes[m.mesh_index]));
      }
      break;
    case ExperimentKind::DtnCheck: {
      std::string out =
          "level,time,surface_nodes,asymmetry,flux_min,flux_max,max_trace_diff,max_multiplier_diff\n";
      for (const DtnCheckRow& d : r.dtn)
        out += std::to_string(d.level) + ',' + format_double(d.time) + ',' + std::to_string(d.surface_nodes) + ',' +
               format_double(d.asymmetry) + ',' + format_double(d.flux_min) + ',' + format_double(d.flux_max) + ',' +
               format_double(d.max_trace_diff) + ',' + format_double(d.max_multiplier_diff) + '\n';
      write_text_file((root / "dtn_check.csv").string(), out);
      break;
    }
  }
  if (!r.comparisons.empty()) write_text_file((root / "comparison.csv").string(), comparison_csv(r.comparisons));
  if (!r.summaries.empty()) write_text_file((root / "summary.csv").string(), summary_csv(r.summaries));
}

}  // namespace bsfree
