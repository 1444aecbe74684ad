#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "compare.hpp"
#include "coupled.hpp"
#include "freeboundary.hpp"
#include "io.hpp"
#include "linalg.hpp"
#include "mesh.hpp"

namespace bsfree {

enum class ExperimentKind { Coupled, Evi, Pvi, EpsSweep, RefineStudy, DtnCheck };

std::string_view kind_name(ExperimentKind kind);
ExperimentKind parse_kind(std::string_view name);

struct MeshSource {
  std::optional<AnnulusSpec> annulus = AnnulusSpec{};
  std::string file;  // used when annulus is empty
  int refine = 0;    // uniform refinements applied after generation or import

  bool operator==(const MeshSource&) const = default;
};

struct InitialProfile {
  enum class Kind {
    Constant,  // value
    Trig,      // max(0, cos(pi y) + sin(pi x))
    CosTheta,  // value * max(0, cos theta), theta the polar angle
  };
  Kind kind = Kind::Constant;
  double value = 1.0;

  bool operator==(const InitialProfile&) const = default;
};

struct TimestepPolicy {
  bool automatic = true;
  double tau = 1e-4;    // fixed step when not automatic
  double cap = 1e-4;    // automatic: min(cap, safety * stable_timestep)
  double safety = 0.5;

  bool operator==(const TimestepPolicy&) const = default;
};

/// Everything needed to reproduce one experiment. JSON form: see README.
struct ExperimentConfig {
  std::string name;
  ExperimentKind kind = ExperimentKind::Coupled;
  MeshSource mesh;
  ModelParams model;
  /// eps-sweep members; each sets delta_omega = delta_gamma = delta_k = eps.
  std::vector<double> eps_list;
  InitialProfile u0{InitialProfile::Kind::Constant, 1.0};
  InitialProfile w0{InitialProfile::Kind::Trig, 1.0};
  TimestepPolicy timestep;
  double t_end = 0.7;
  std::vector<double> snapshot_times;
  /// Difference step for u = dz/dt in the limit problems.
  double postprocess_tau = 1e-2;
  /// refine-study and dtn-check: refinements beyond the base mesh.
  int refine_levels = 2;
  MassKind mass = MassKind::Lumped;
  PsorConfig psor;
  double free_boundary_threshold = kDefaultFreeBoundaryThreshold;
  int diagnostics_every = 1;
  bool write_vtk = true;
  bool allow_unstable_timestep = false;

  /// Throws ConfigError with the JSON path of the first bad member.
  void validate() const;
  bool operator==(const ExperimentConfig&) const = default;
};

ExperimentConfig parse_config(std::string_view json_text);
std::string echo_config(const ExperimentConfig& config);

std::vector<std::string> preset_names();
/// Throws ConfigError for an unknown name.
ExperimentConfig preset(std::string_view name);

Mesh build_mesh(const MeshSource& source);
std::vector<double> bulk_profile(const Mesh& mesh, const InitialProfile& profile);
std::vector<double> surface_profile(const Mesh& mesh, const InitialProfile& profile);
/// Timestep a coupled run of this config would use for the given model.
double resolve_timestep(const ExperimentConfig& config, const Mesh& mesh, const ModelParams& model);

struct CoupledMember {
  std::string label;
  std::size_t mesh_index = 0;
  ModelParams model;
  double epsilon = 0.0;  // 0 unless an eps-sweep member
  RunDiagnostics diagnostics;
  std::vector<FieldSnapshot> snapshots;
};

/// Limit-problem solutions at the snapshot times with recovered fields.
struct LimitSeries {
  std::vector<VIResult> solutions;
  std::vector<FieldSnapshot> fields;
  std::vector<std::vector<FreeBoundaryArc>> arcs;
};

struct DtnCheckRow {
  int level = 0;
  double time = 0.0;
  std::size_t surface_nodes = 0;
  double asymmetry = 0.0;
  double flux_min = 0.0, flux_max = 0.0;  // (A 1)_i / s_i
  double max_trace_diff = 0.0;            // |z_dtn - z_evi| on the surface
  double max_multiplier_diff = 0.0;
};

struct ExperimentResult {
  ExperimentConfig config;
  std::vector<Mesh> meshes;
  std::vector<CoupledMember> members;
  std::optional<LimitSeries> limit;  // evi/pvi, and the eps-sweep reference
  std::vector<ComparisonEntry> comparisons;
  std::vector<SweepSummary> summaries;
  std::vector<DtnCheckRow> dtn;
};

/// Runs the experiment in memory. eps-sweep members use up to `threads`
/// worker threads; results do not depend on the thread count.
ExperimentResult execute_experiment(const ExperimentConfig& config, int threads = 1);

/// Writes the artifact directory (created if needed).
void write_artifacts(const ExperimentResult& result, const std::string& out_dir);

inline ExperimentResult run_experiment(const ExperimentConfig& config, const std::string& out_dir, int threads = 1) {
  ExperimentResult r = execute_experiment(config, threads);
  write_artifacts(r, out_dir);
  return r;
}

}  // namespace bsfree
