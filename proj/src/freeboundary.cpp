#include "freeboundary.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "error.hpp"
#include "warnings.hpp"

namespace bsfree {

namespace {

constexpr double kActiveTol = 1e-12;

CgConfig tight_cg() {
  CgConfig cfg;
  cfg.rel_tol = 1e-14;
  cfg.abs_tol = 1e-300;
  return cfg;
}

std::vector<char> active_flags(const Mesh& mesh, std::span<const double> z) {
  std::vector<char> active(mesh.num_surface_nodes());
  for (std::size_t i = 0; i < active.size(); ++i) active[i] = z[mesh.surface_nodes()[i]] <= kActiveTol ? 1 : 0;
  return active;
}

VIResult package(const Mesh& mesh, double t, ObstacleSolution&& sol, const std::vector<double>& surface_mass) {
  VIResult r;
  r.time = t;
  r.iterations = sol.sweeps;
  r.complementarity = sol.complementarity;
  r.multiplier.resize(mesh.num_surface_nodes());
  for (std::size_t i = 0; i < r.multiplier.size(); ++i)
    r.multiplier[i] = sol.multiplier[mesh.surface_nodes()[i]] / surface_mass[i];
  r.active = active_flags(mesh, sol.x);
  r.z = std::move(sol.x);
  return r;
}

}  // namespace

std::vector<double> clamp_surface_load(std::span<const double> v0) {
  std::vector<double> v(v0.begin(), v0.end());
  std::size_t clamped = 0;
  for (double& x : v) {
    if (x > 0.0) {
      x = 0.0;
      ++clamped;
    }
  }
  if (clamped > 0) warn("clamped " + std::to_string(clamped) + " positive nodal values of v0 to zero");
  return v;
}

EviSolver::EviSolver(const Mesh& mesh, PsorConfig cfg)
    : mesh_(&mesh),
      cfg_(cfg),
      stiffness_(bulk_stiffness(mesh)),
      dirichlet_(stiffness_, mesh.outer_nodes()),
      surface_mass_(surface_mass_lumped(mesh)) {
  cfg_.validate();
  if (mesh.outer_nodes().empty()) throw ConfigError("mesh", "variational inequality needs outer Dirichlet nodes");
}

VIResult EviSolver::solve(double t, double u_dirichlet, std::span<const double> v0,
                          std::span<const double> initial_guess) const {
  const Mesh& mesh = *mesh_;
  if (!(t >= 0.0)) throw ConfigError("t", "time must be nonnegative");
  if (v0.size() != mesh.num_surface_nodes()) throw ConfigError("v0", "length does not match the surface");
  const std::vector<double> load = clamp_surface_load(v0);

  std::vector<double> rhs(mesh.num_vertices(), 0.0);
  for (std::size_t i = 0; i < load.size(); ++i) rhs[mesh.surface_nodes()[i]] = surface_mass_[i] * load[i];
  rhs = dirichlet_.apply_rhs(rhs, t * u_dirichlet);

  std::vector<double> guess;
  if (initial_guess.empty()) {
    guess.assign(mesh.num_vertices(), t * u_dirichlet);
  } else {
    guess.assign(initial_guess.begin(), initial_guess.end());
    for (Index v : mesh.outer_nodes()) guess[v] = t * u_dirichlet;
  }
  ObstacleSolution sol = psor_solve(dirichlet_.matrix(), rhs, mesh.surface_nodes(), cfg_, guess);
  return package(mesh, t, std::move(sol), surface_mass_);
}

VIResult solve_evi(const Mesh& mesh, double t, double u_dirichlet, std::span<const double> v0,
                   const PsorConfig& cfg) {
  return EviSolver(mesh, cfg).solve(t, u_dirichlet, v0);
}

PviSolver::PviSolver(const Mesh& mesh, double delta_omega, double tau, PsorConfig cfg)
    : mesh_(&mesh),
      delta_omega_(delta_omega),
      tau_(tau),
      cfg_(cfg),
      bulk_mass_(bulk_mass_lumped(mesh)),
      system_raw_(SparseMatrix::combine(delta_omega / tau, SparseMatrix::diagonal_matrix(bulk_mass_), 1.0,
                                        bulk_stiffness(mesh))),
      dirichlet_(system_raw_, mesh.outer_nodes()),
      surface_mass_(surface_mass_lumped(mesh)) {
  cfg_.validate();
  if (!(delta_omega >= 0.0)) throw ConfigError("delta_omega", "must be nonnegative");
  if (!(tau > 0.0)) throw ConfigError("tau", "must be positive");
  if (mesh.outer_nodes().empty()) throw ConfigError("mesh", "variational inequality needs outer Dirichlet nodes");
}

VIResult PviSolver::step(std::span<const double> z_prev, double t, double u_dirichlet, std::span<const double> u0,
                         std::span<const double> v0) const {
  const Mesh& mesh = *mesh_;
  const std::size_t n = mesh.num_vertices();
  if (z_prev.size() != n || u0.size() != n) throw ConfigError("pvi", "bulk field length does not match the mesh");
  if (v0.size() != mesh.num_surface_nodes()) throw ConfigError("v0", "length does not match the surface");
  const std::vector<double> load = clamp_surface_load(v0);

  std::vector<double> rhs(n);
  for (std::size_t i = 0; i < n; ++i)
    rhs[i] = delta_omega_ * bulk_mass_[i] * (z_prev[i] / tau_ + u0[i]);
  for (std::size_t i = 0; i < load.size(); ++i) rhs[mesh.surface_nodes()[i]] += surface_mass_[i] * load[i];
  rhs = dirichlet_.apply_rhs(rhs, t * u_dirichlet);

  std::vector<double> guess(z_prev.begin(), z_prev.end());
  for (Index v : mesh.outer_nodes()) guess[v] = t * u_dirichlet;
  ObstacleSolution sol = psor_solve(dirichlet_.matrix(), rhs, mesh.surface_nodes(), cfg_, guess);
  return package(mesh, t, std::move(sol), surface_mass_);
}

VIResult solve_pvi_step(const Mesh& mesh, std::span<const double> z_prev, double t, double tau, double u_dirichlet,
                        std::span<const double> u0, std::span<const double> v0, double delta_omega,
                        const PsorConfig& cfg) {
  return PviSolver(mesh, delta_omega, tau, cfg).step(z_prev, t, u_dirichlet, u0, v0);
}

std::vector<double> recovered_flux(const Mesh& mesh, const SparseMatrix& stiffness, std::span<const double> z,
                                   std::span<const double> bulk_source) {
  std::vector<double> r = stiffness.multiply(z);
  if (!bulk_source.empty())
    for (std::size_t i = 0; i < r.size(); ++i) r[i] -= bulk_source[i];
  const std::vector<double> s = surface_mass_lumped(mesh);
  std::vector<double> flux(mesh.num_surface_nodes());
  for (std::size_t i = 0; i < flux.size(); ++i) flux[i] = r[mesh.surface_nodes()[i]] / s[i];
  return flux;
}

LimitFields postprocess_uw(const Mesh& mesh, const VIResult& at_t, const VIResult& at_prev, double tau,
                           std::span<const double> w0, const std::optional<ParabolicTerms>& parabolic) {
  const std::size_t n = mesh.num_vertices();
  if (at_t.z.size() != n || at_prev.z.size() != n) throw Error("postprocess_uw: solutions do not match the mesh");
  if (w0.size() != mesh.num_surface_nodes()) throw ConfigError("w0", "length does not match the surface");
  if (!(tau > 0.0)) throw ConfigError("tau", "post-processing step must be positive");

  LimitFields out;
  out.u.resize(n);
  for (std::size_t i = 0; i < n; ++i) out.u[i] = (at_t.z[i] - at_prev.z[i]) / tau;

  std::vector<double> source;
  if (parabolic && parabolic->delta_omega > 0.0) {
    if (parabolic->u0.size() != n) throw ConfigError("u0", "length does not match the mesh");
    const std::vector<double> m = bulk_mass_lumped(mesh);
    source.resize(n);
    for (std::size_t i = 0; i < n; ++i) source[i] = parabolic->delta_omega * m[i] * (parabolic->u0[i] - out.u[i]);
  }
  const std::vector<double> flux = recovered_flux(mesh, bulk_stiffness(mesh), at_t.z, source);
  out.w.resize(flux.size());
  for (std::size_t i = 0; i < flux.size(); ++i) out.w[i] = w0[i] + flux[i];
  return out;
}

DtnOperator::DtnOperator(const Mesh& mesh, double u_dirichlet, bool force_matrix_free)
    : mesh_(&mesh), ns_(mesh.num_surface_nodes()), interior_pos_(mesh.num_vertices(), kNoIndex) {
  const std::size_t n = mesh.num_vertices();
  for (Index v = 0; v < n; ++v) {
    if (mesh.surface_index(v) == kNoIndex && !mesh.is_outer(v)) {
      interior_pos_[v] = interior_.size();
      interior_.push_back(v);
    }
  }
  const std::size_t ni = interior_.size();
  const SparseMatrix k = bulk_stiffness(mesh);

  std::vector<Triplet> ii, is, si, ss;
  std::vector<double> io_lift(ni, 0.0), so_lift(ns_, 0.0);
  for (Index r = 0; r < n; ++r) {
    const Index ri = interior_pos_[r];
    const Index rs = mesh.surface_index(r);
    if (ri == kNoIndex && rs == kNoIndex) continue;
    for (Index p = k.row_ptr()[r]; p < k.row_ptr()[r + 1]; ++p) {
      const Index c = k.col_idx()[p];
      const double val = k.values()[p];
      const Index ci = interior_pos_[c];
      const Index cs = mesh.surface_index(c);
      if (ri != kNoIndex) {
        if (ci != kNoIndex) ii.push_back({ri, ci, val});
        else if (cs != kNoIndex) is.push_back({ri, cs, val});
        else io_lift[ri] += val * u_dirichlet;
      } else {
        if (ci != kNoIndex) si.push_back({rs, ci, val});
        else if (cs != kNoIndex) ss.push_back({rs, cs, val});
        else so_lift[rs] += val * u_dirichlet;
      }
    }
  }
  k_ii_ = SparseMatrix::from_triplets(ni, ni, std::move(ii), true);
  k_is_ = SparseMatrix::from_triplets(ni, ns_, std::move(is), false);
  k_si_ = SparseMatrix::from_triplets(ns_, ni, std::move(si), false);
  k_ss_ = SparseMatrix::from_triplets(ns_, ns_, std::move(ss), true);

  // Lift: u_D on the outer boundary, 0 on the surface, discrete harmonic inside.
  for (double& v : io_lift) v = -v;
  const std::vector<double> lift = interior_solve(io_lift);
  load_ = ni > 0 ? k_si_.multiply(lift) : std::vector<double>(ns_, 0.0);
  for (std::size_t i = 0; i < ns_; ++i) load_[i] += so_lift[i];

  if (!force_matrix_free && ns_ <= kDenseLimit) {
    DenseMatrix a(ns_, ns_);
    std::vector<double> e(ns_, 0.0);
    for (std::size_t j = 0; j < ns_; ++j) {
      e[j] = 1.0;
      const std::vector<double> col = apply(e);
      for (std::size_t i = 0; i < ns_; ++i) a(i, j) = col[i];
      e[j] = 0.0;
    }
    dense_ = std::move(a);
  }
}

const DenseMatrix& DtnOperator::matrix() const {
  if (!dense_) throw Error("DtnOperator: dense matrix not formed (matrix-free mode)");
  return *dense_;
}

std::vector<double> DtnOperator::interior_solve(std::span<const double> rhs) const {
  if (interior_.empty()) return {};
  if (norm2(rhs) == 0.0) return std::vector<double>(rhs.size(), 0.0);
  return cg_solve(k_ii_, rhs, tight_cg()).x;
}

std::vector<double> DtnOperator::apply(std::span<const double> z_surface) const {
  if (z_surface.size() != ns_) throw Error("DtnOperator::apply: size mismatch");
  if (dense_) return dense_->multiply(z_surface);
  std::vector<double> y = k_ss_.multiply(z_surface);
  if (!interior_.empty()) {
    std::vector<double> rhs = k_is_.multiply(z_surface);
    for (double& v : rhs) v = -v;
    const std::vector<double> x = interior_solve(rhs);
    const std::vector<double> c = k_si_.multiply(x);
    for (std::size_t i = 0; i < ns_; ++i) y[i] += c[i];
  }
  return y;
}

DtnOperator dtn_matrix(const Mesh& mesh, double u_dirichlet) { return DtnOperator(mesh, u_dirichlet); }

SurfaceVIResult solve_dtn_complementarity(const DtnOperator& dtn, const Mesh& mesh, double t,
                                          std::span<const double> v0, const PsorConfig& cfg) {
  if (v0.size() != dtn.size()) throw ConfigError("v0", "length does not match the surface");
  const std::vector<double> load = clamp_surface_load(v0);
  const std::vector<double> s = surface_mass_lumped(mesh);
  std::vector<double> b(dtn.size());
  for (std::size_t i = 0; i < b.size(); ++i) b[i] = s[i] * load[i] - t * dtn.load()[i];
  std::vector<Index> all(dtn.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  std::vector<double> guess(dtn.size(), std::max(t, 0.0));
  ObstacleSolution sol = psor_solve(dtn.matrix(), b, all, cfg, guess);

  SurfaceVIResult r;
  r.iterations = sol.sweeps;
  r.complementarity = sol.complementarity;
  r.multiplier.resize(dtn.size());
  r.active.resize(dtn.size());
  for (std::size_t i = 0; i < dtn.size(); ++i) {
    r.multiplier[i] = sol.multiplier[i] / s[i];
    r.active[i] = sol.x[i] <= kActiveTol ? 1 : 0;
  }
  r.z = std::move(sol.x);
  return r;
}

std::vector<FreeBoundaryArc> extract_free_boundary(const Mesh& mesh, std::span<const double> z_bulk,
                                                   double threshold) {
  if (!(threshold > 0.0)) throw ConfigError("threshold", "must be positive");
  if (z_bulk.size() != mesh.num_vertices()) throw Error("extract_free_boundary: field does not match the mesh");
  const auto& nodes = mesh.surface_nodes();
  const auto& pts = mesh.vertices();
  std::vector<FreeBoundaryArc> arcs;

  for (std::size_t loop = 0; loop < mesh.num_loops(); ++loop) {
    const Index begin = mesh.loop_offsets()[loop], end = mesh.loop_offsets()[loop + 1];
    const std::size_t len = end - begin;
    Point centroid{0.0, 0.0};
    std::vector<double> s(len + 1, 0.0);
    for (std::size_t k = 0; k < len; ++k) {
      const Point& a = pts[nodes[begin + k]];
      const Point& b = pts[nodes[begin + (k + 1) % len]];
      centroid.x += a.x / static_cast<double>(len);
      centroid.y += a.y / static_cast<double>(len);
      s[k + 1] = s[k] + std::hypot(b.x - a.x, b.y - a.y);
    }
    const double perimeter = s[len];
    auto value = [&](std::size_t k) { return z_bulk[nodes[begin + k % len]]; };
    auto angle_at = [&](std::size_t k, double alpha) {
      const Point& a = pts[nodes[begin + k % len]];
      const Point& b = pts[nodes[begin + (k + 1) % len]];
      return polar_angle({a.x + alpha * (b.x - a.x) - centroid.x, a.y + alpha * (b.y - a.y) - centroid.y});
    };

    std::size_t start = len;
    bool any_below = false;
    for (std::size_t k = 0; k < len; ++k) {
      if (value(k) >= threshold) {
        if (start == len) start = k;
      } else {
        any_below = true;
      }
    }
    if (!any_below) continue;
    if (start == len) {
      const double theta = angle_at(0, 0.0);
      arcs.push_back({loop, 0.0, perimeter, theta, theta + 2.0 * std::numbers::pi, perimeter});
      continue;
    }

    // Walk once around the loop starting from a node above the threshold.
    double enter_s = 0.0, enter_theta = 0.0;
    for (std::size_t step = 0; step < len; ++step) {
      const std::size_t k = start + step;
      const double fa = value(k), fb = value(k + 1);
      const double sa = s[k % len] + (k >= len ? perimeter : 0.0);
      const double h = s[k % len + 1] - s[k % len];
      const bool below_a = fa < threshold, below_b = fb < threshold;
      if (!below_a && below_b) {
        const double alpha = (fa - threshold) / (fa - fb);
        enter_s = sa + alpha * h;
        enter_theta = angle_at(k, alpha);
      } else if (below_a && !below_b) {
        const double alpha = (threshold - fa) / (fb - fa);
        const double exit_s = sa + alpha * h;
        FreeBoundaryArc arc;
        arc.loop = loop;
        arc.s_start = std::fmod(enter_s, perimeter);
        arc.length = exit_s - enter_s;
        arc.s_end = std::fmod(exit_s, perimeter);
        arc.theta_start = enter_theta;
        arc.theta_end = angle_at(k, alpha);
        arcs.push_back(arc);
      }
    }
  }
  std::sort(arcs.begin(), arcs.end(), [](const FreeBoundaryArc& a, const FreeBoundaryArc& b) {
    return a.loop != b.loop ? a.loop < b.loop : a.s_start < b.s_start;
  });
  return arcs;
}

std::vector<FreeBoundaryArc> extract_free_boundary(const Mesh& mesh, const VIResult& vi, double threshold) {
  return extract_free_boundary(mesh, vi.z, threshold);
}

}  // namespace bsfree
