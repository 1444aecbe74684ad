#include "coupled.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "error.hpp"
#include "warnings.hpp"

namespace bsfree {

void ModelParams::validate() const {
  if (!(delta_omega > 0.0)) throw ConfigError("delta_omega", "must be positive");
  if (!(delta_gamma > 0.0)) throw ConfigError("delta_gamma", "must be positive");
  if (!(delta_k > 0.0)) throw ConfigError("delta_k", "must be positive");
  if (!(mu > 0.0)) throw ConfigError("mu", "must be positive");
  if (!(u_dirichlet >= 0.0)) throw ConfigError("u_D", "must be nonnegative");
}

CgConfig stepping_cg_config() {
  CgConfig cfg;
  cfg.rel_tol = 1e-15;
  cfg.abs_tol = 1e-300;
  cfg.stagnation_tol = 1e-13;
  return cfg;
}

CoupledOperators::CoupledOperators(const Mesh& mesh, const ModelParams& params, double tau, MassKind mass,
                                   CgConfig cg)
    : mesh_(&mesh), params_(params), tau_(tau), mass_kind_(mass), cg_(cg) {
  params_.validate();
  if (!(tau > 0.0) || !std::isfinite(tau)) throw ConfigError("tau", "timestep must be positive and finite");
  bulk_mass_ = bsfree::bulk_mass(mesh, mass);
  bulk_stiffness_ = bsfree::bulk_stiffness(mesh);
  surface_mass_ = bsfree::surface_mass(mesh, mass);
  surface_stiffness_ = bsfree::surface_stiffness(mesh);
  trace_ = trace_coupling(mesh, mass);
  surface_reaction_mass_ = surface_mass_;

  bulk_system_raw_ = SparseMatrix::combine(params_.delta_omega / tau_, bulk_mass_, 1.0, bulk_stiffness_);
  surface_system_ = SparseMatrix::combine(1.0 / tau_, surface_mass_, params_.delta_gamma, surface_stiffness_);
  if (params_.outer_bc == OuterBc::Dirichlet) {
    if (mesh.outer_nodes().empty()) throw ConfigError("outer_bc", "Dirichlet data needs outer boundary nodes");
    dirichlet_.emplace(bulk_system_raw_, mesh.outer_nodes());
  }
}

const SparseMatrix& CoupledOperators::bulk_system() const noexcept {
  return dirichlet_ ? dirichlet_->matrix() : bulk_system_raw_;
}

std::vector<double> CoupledOperators::reaction(const CoupledState& state) const {
  const auto& nodes = mesh_->surface_nodes();
  std::vector<double> p(nodes.size());
  for (std::size_t i = 0; i < nodes.size(); ++i) p[i] = state.u[nodes[i]] * state.w[i];
  return p;
}

std::vector<double> CoupledOperators::bulk_rhs(const CoupledState& prev) const {
  std::vector<double> rhs = bulk_mass_.multiply(prev.u);
  const double scale = params_.delta_omega / tau_;
  for (double& v : rhs) v *= scale;
  const std::vector<double> flux = trace_.multiply(reaction(prev));
  for (std::size_t i = 0; i < rhs.size(); ++i) rhs[i] -= flux[i] / params_.delta_k;
  if (dirichlet_) return dirichlet_->apply_rhs(rhs, params_.u_dirichlet);
  return rhs;
}

std::vector<double> CoupledOperators::surface_rhs(const CoupledState& prev) const {
  std::vector<double> rhs = surface_mass_.multiply(prev.w);
  for (double& v : rhs) v /= tau_;
  const std::vector<double> flux = surface_reaction_mass_.multiply(reaction(prev));
  const double scale = params_.mu / params_.delta_k;
  for (std::size_t i = 0; i < rhs.size(); ++i) rhs[i] -= scale * flux[i];
  return rhs;
}

CoupledState imex_step(const CoupledState& state, const CoupledOperators& ops) {
  const Mesh& mesh = ops.mesh();
  if (state.u.size() != mesh.num_vertices() || state.w.size() != mesh.num_surface_nodes())
    throw Error("imex_step: state does not match the mesh");
  CoupledState next;
  next.time = state.time + ops.tau();
  next.u = cg_solve(ops.bulk_system(), ops.bulk_rhs(state), ops.cg(), state.u).x;
  next.w = cg_solve(ops.surface_system(), ops.surface_rhs(state), ops.cg(), state.w).x;
  return next;
}

double bulk_upper_bound(const ModelParams& params, std::span<const double> u0) {
  double m = max_abs(u0);
  if (params.outer_bc == OuterBc::Dirichlet) m = std::max(m, params.u_dirichlet);
  return m;
}

double stable_timestep(const ModelParams& params, const Mesh& mesh, double u_max, double w_max) {
  params.validate();
  constexpr double inf = std::numeric_limits<double>::infinity();
  if (!(u_max > 0.0) || !(w_max > 0.0)) return inf;
  const std::vector<double> m = bulk_mass_lumped(mesh);
  const std::vector<double> s = surface_mass_lumped(mesh);
  double tau = params.delta_k / (params.mu * u_max);
  for (std::size_t i = 0; i < s.size(); ++i) {
    const double mi = m[mesh.surface_nodes()[i]];
    tau = std::min(tau, params.delta_omega * params.delta_k * mi / (s[i] * w_max));
  }
  return tau;
}

namespace {

StepRecord make_record(int step, const CoupledState& s, const CoupledOperators& ops) {
  StepRecord r;
  r.step = step;
  r.time = s.time;
  auto [umin, umax] = std::minmax_element(s.u.begin(), s.u.end());
  auto [wmin, wmax] = std::minmax_element(s.w.begin(), s.w.end());
  r.min_u = *umin;
  r.max_u = *umax;
  r.min_w = *wmin;
  r.max_w = *wmax;
  const std::vector<double> mu = ops.bulk_mass().multiply(s.u);
  const std::vector<double> mw = ops.surface_mass().multiply(s.w);
  double bulk_total = 0.0, surface_total = 0.0;
  for (double v : mu) bulk_total += v;
  for (double v : mw) surface_total += v;
  r.surface_total = surface_total;
  r.conserved = ops.params().delta_omega * bulk_total - surface_total / ops.params().mu;
  r.energy = ops.params().delta_omega * dot(s.u, mu);
  return r;
}

/// Neumaier compensated running sum; run totals span 1e5+ terms.
class CompensatedSum {
 public:
  void add(double x) {
    const double t = sum_ + x;
    comp_ += std::abs(sum_) >= std::abs(x) ? (sum_ - t) + x : (x - t) + sum_;
    sum_ = t;
  }
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0, comp_ = 0.0;
};

bool all_finite(const std::vector<double>& v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

}  // namespace

CoupledRun run_coupled(const Mesh& mesh, const ModelParams& params, double tau, double t_end,
                       std::vector<double> u0, std::vector<double> w0, const RunOptions& options) {
  params.validate();
  if (u0.size() != mesh.num_vertices()) throw ConfigError("u0", "length does not match the bulk vertex count");
  if (w0.size() != mesh.num_surface_nodes()) throw ConfigError("w0", "length does not match the surface node count");
  if (!(t_end > 0.0)) throw ConfigError("t_end", "must be positive");
  if (!(tau > 0.0)) throw ConfigError("tau", "must be positive");

  CoupledRun run;
  auto& diag = run.diagnostics;

  std::size_t clamped = 0;
  for (double& v : w0) {
    if (v < 0.0) {
      v = 0.0;
      ++clamped;
    }
  }
  if (clamped > 0) {
    diag.warnings.push_back("clamped " + std::to_string(clamped) + " negative nodal values of w0 to zero");
    warn(diag.warnings.back());
  }
  if (!all_finite(u0) || !all_finite(w0)) throw ConfigError("initial", "initial data must be finite");

  const double tau_max = stable_timestep(params, mesh, bulk_upper_bound(params, u0), max_abs(w0));
  if (tau > tau_max) {
    if (!options.allow_unstable_tau)
      throw ConfigError("timestep", "tau = " + std::to_string(tau) + " exceeds the positivity limit " +
                                        std::to_string(tau_max));
    diag.warnings.push_back("tau exceeds the positivity limit " + std::to_string(tau_max));
    warn(diag.warnings.back());
  }

  const int steps = static_cast<int>(std::ceil(t_end / tau - 1e-9));
  const double dt = t_end / steps;
  diag.tau = dt;
  diag.steps = steps;

  CoupledOperators ops(mesh, params, dt, options.mass, options.cg);

  std::vector<int> snapshot_steps;
  for (double ts : options.snapshot_times) {
    if (ts < -1e-12 || ts > t_end * (1.0 + 1e-12))
      throw ConfigError("snapshot_times", "snapshot time outside [0, t_end]");
    snapshot_steps.push_back(static_cast<int>(std::lround(ts / dt)));
  }
  auto take_snapshots = [&](int step, const CoupledState& s) {
    for (int target : snapshot_steps)
      if (target == step) run.snapshots.push_back(s);
  };

  CoupledState state{0.0, std::move(u0), std::move(w0)};
  const std::vector<double> s_weights = ops.surface_reaction_mass().column_sums();
  {
    const std::vector<double> mw = ops.surface_mass().multiply(state.w);
    for (double v : mw) diag.initial_surface_mass += v;
  }
  diag.records.push_back(make_record(0, state, ops));
  take_snapshots(0, state);

  CompensatedSum reaction_sum, stiffness_sum;
  for (int m = 1; m <= steps; ++m) {
    const std::vector<double> p = ops.reaction(state);
    double step_reaction = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) step_reaction += s_weights[i] * p[i];
    reaction_sum.add(step_reaction);

    state = imex_step(state, ops);
    state.time = m * dt;
    if (!all_finite(state.u) || !all_finite(state.w))
      throw SolverError("non-finite value at step " + std::to_string(m), 0.0, m);

    const std::vector<double> ku = ops.bulk_stiffness().multiply(state.u);
    stiffness_sum.add(dot(state.u, ku));
    StepRecord r = make_record(m, state, ops);
    r.overlap_cumulative = dt * reaction_sum.value();
    r.reaction_cumulative = r.overlap_cumulative / params.delta_k;
    r.energy += 2.0 * dt * stiffness_sum.value();
    diag.records.push_back(r);
    take_snapshots(m, state);
  }
  return run;
}

}  // namespace bsfree
