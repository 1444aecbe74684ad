#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fem.hpp"
#include "linalg.hpp"
#include "mesh.hpp"

namespace bsfree {

enum class OuterBc { Dirichlet, Neumann };

/// Dimensionless groups of the bulk-surface receptor-ligand system.
struct ModelParams {
  double delta_omega = 1.0;
  double delta_gamma = 1.0;
  double delta_k = 1.0;
  /// Scales the bulk flux feeding the surface equation.
  double mu = 1.0;
  double u_dirichlet = 1.0;
  OuterBc outer_bc = OuterBc::Dirichlet;

  void validate() const;
  bool operator==(const ModelParams&) const = default;
};

struct CoupledState {
  double time = 0.0;
  std::vector<double> u;  // bulk nodal values
  std::vector<double> w;  // surface nodal values
};

/// CG settings used by the time stepper. The tolerance sits near machine
/// precision so that the discrete conservation identities survive 1e5 steps.
CgConfig stepping_cg_config();

/// Assembled, timestep-specific operators for the IMEX scheme.
///
/// Bulk:    (dO/tau) M U^m + K U^m = (dO/tau) M U^{m-1} - (1/dk) T [U W]
/// Surface: (1/tau) S W^m + dG L W^m = (1/tau) S W^{m-1} - (mu/dk) S [U W]
/// where [U W] is the nodal product of the surface trace of U with W.
class CoupledOperators {
 public:
  CoupledOperators(const Mesh& mesh, const ModelParams& params, double tau, MassKind mass = MassKind::Lumped,
                   CgConfig cg = stepping_cg_config());

  const Mesh& mesh() const noexcept { return *mesh_; }
  const ModelParams& params() const noexcept { return params_; }
  double tau() const noexcept { return tau_; }
  MassKind mass_kind() const noexcept { return mass_kind_; }

  const SparseMatrix& bulk_mass() const noexcept { return bulk_mass_; }
  const SparseMatrix& bulk_stiffness() const noexcept { return bulk_stiffness_; }
  const SparseMatrix& surface_mass() const noexcept { return surface_mass_; }
  const SparseMatrix& surface_stiffness() const noexcept { return surface_stiffness_; }
  const SparseMatrix& trace() const noexcept { return trace_; }
  /// Surface mass used against the reaction term in the surface equation.
  const SparseMatrix& surface_reaction_mass() const noexcept { return surface_reaction_mass_; }

  /// System matrices after Dirichlet elimination (bulk) as handed to CG.
  const SparseMatrix& bulk_system() const noexcept;
  const SparseMatrix& surface_system() const noexcept { return surface_system_; }

  /// Right-hand sides of the two linear systems for a given previous state,
  /// Dirichlet correction included.
  std::vector<double> bulk_rhs(const CoupledState& prev) const;
  std::vector<double> surface_rhs(const CoupledState& prev) const;
  /// Nodal product [U W] at the surface nodes.
  std::vector<double> reaction(const CoupledState& state) const;

  const CgConfig& cg() const noexcept { return cg_; }

 private:
  const Mesh* mesh_;
  ModelParams params_;
  double tau_;
  MassKind mass_kind_;
  CgConfig cg_;
  SparseMatrix bulk_mass_, bulk_stiffness_, surface_mass_, surface_stiffness_, trace_, surface_reaction_mass_;
  SparseMatrix bulk_system_raw_, surface_system_;
  std::optional<DirichletElimination> dirichlet_;
};

/// One IMEX step. Throws SolverError on CG failure or non-finite values.
CoupledState imex_step(const CoupledState& state, const CoupledOperators& ops);

struct StepRecord {
  int step = 0;
  double time = 0.0;
  double min_u = 0.0, max_u = 0.0, min_w = 0.0, max_w = 0.0;
  /// dO * 1'M U - (1/mu) * 1'S W; constant in time for the Neumann problem.
  double conserved = 0.0;
  /// 1'S W.
  double surface_total = 0.0;
  /// (tau/dk) * sum_{l<m} 1'S [U^l W^l]; equals (1'S W^0 - 1'S W^m) / mu.
  double reaction_cumulative = 0.0;
  /// dO ||U^m||_M^2 + 2 tau sum_{l<=m} |U^l|_K^2.
  double energy = 0.0;
  /// Time-integral of the overlap functional int_Gamma U W, left rectangle rule.
  double overlap_cumulative = 0.0;
};

struct RunDiagnostics {
  std::vector<StepRecord> records;
  double tau = 0.0;
  int steps = 0;
  double initial_surface_mass = 0.0;  // 1'S W^0
  std::vector<std::string> warnings;
};

struct RunOptions {
  std::vector<double> snapshot_times;
  bool allow_unstable_tau = false;
  MassKind mass = MassKind::Lumped;
  CgConfig cg = stepping_cg_config();
};

struct CoupledRun {
  RunDiagnostics diagnostics;
  std::vector<CoupledState> snapshots;
};

/// Largest tau for which both lumped right-hand sides stay nonnegative for
/// nonnegative iterates bounded by u_max and w_max:
///   tau <= dO dk m_i / (s_i w_max)   (bulk, every surface node i)
///   tau <= dk / (mu u_max)           (surface)
/// where m_i and s_i are the lumped bulk and surface masses. Returns +inf
/// when the reaction vanishes identically (u_max == 0 or w_max == 0).
double stable_timestep(const ModelParams& params, const Mesh& mesh, double u_max, double w_max);

/// Integrates from t = 0 to t_end in ceil(t_end / tau) uniform steps (tau is
/// shortened to land on t_end). Negative entries of w0 are clamped to zero.
/// Snapshots are taken at the step nearest to each requested time.
CoupledRun run_coupled(const Mesh& mesh, const ModelParams& params, double tau, double t_end,
                       std::vector<double> u0, std::vector<double> w0, const RunOptions& options = {});

/// Upper bound for U under the maximum principle.
double bulk_upper_bound(const ModelParams& params, std::span<const double> u0);

}  // namespace bsfree
