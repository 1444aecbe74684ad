#pragma once

#include <optional>
#include <span>
#include <vector>

#include "fem.hpp"
#include "linalg.hpp"
#include "mesh.hpp"
#include "sparse_matrix.hpp"

namespace bsfree {

/// Solution of a discrete thin-obstacle problem posed on the bulk mesh.
struct VIResult {
  double time = 0.0;
  /// Bulk nodal values of the time-integrated concentration.
  std::vector<double> z;
  /// Surface multiplier (<= 0): the integrated residual divided by the
  /// lumped surface mass.
  std::vector<double> multiplier;
  /// Surface nodes in contact (z == 0).
  std::vector<char> active;
  int iterations = 0;
  double complementarity = 0.0;
};

/// Bulk and surface limit fields recovered from a pair of VI solutions.
struct LimitFields {
  std::vector<double> u;
  std::vector<double> w;
};

/// Clamps positive entries of v0 to zero, warning once per call.
std::vector<double> clamp_surface_load(std::span<const double> v0);

/// Elliptic VI with time as a parameter:
///   find z with z = t u_D on the outer boundary and z >= 0 on the surface
///   minimizing z'Kz/2 - (S v0)'z
/// Assembled once, solved at any number of times.
class EviSolver {
 public:
  explicit EviSolver(const Mesh& mesh, PsorConfig cfg = {});

  VIResult solve(double t, double u_dirichlet, std::span<const double> v0,
                 std::span<const double> initial_guess = {}) const;

  const Mesh& mesh() const noexcept { return *mesh_; }
  const SparseMatrix& stiffness() const noexcept { return stiffness_; }
  const PsorConfig& config() const noexcept { return cfg_; }

 private:
  const Mesh* mesh_;
  PsorConfig cfg_;
  SparseMatrix stiffness_;
  DirichletElimination dirichlet_;
  std::vector<double> surface_mass_;
};

VIResult solve_evi(const Mesh& mesh, double t, double u_dirichlet, std::span<const double> v0,
                   const PsorConfig& cfg = {});

/// Implicit Euler step of the parabolic VI:
///   ((dO/tau) M + K) z = (dO/tau) M z_prev + dO M u0 + S v0,  z >= 0 on the surface
/// with lumped bulk mass M.
class PviSolver {
 public:
  PviSolver(const Mesh& mesh, double delta_omega, double tau, PsorConfig cfg = {});

  VIResult step(std::span<const double> z_prev, double t, double u_dirichlet, std::span<const double> u0,
                std::span<const double> v0) const;

  double delta_omega() const noexcept { return delta_omega_; }
  double tau() const noexcept { return tau_; }

 private:
  const Mesh* mesh_;
  double delta_omega_;
  double tau_;
  PsorConfig cfg_;
  std::vector<double> bulk_mass_;
  SparseMatrix system_raw_;
  DirichletElimination dirichlet_;
  std::vector<double> surface_mass_;
};

VIResult solve_pvi_step(const Mesh& mesh, std::span<const double> z_prev, double t, double tau, double u_dirichlet,
                        std::span<const double> u0, std::span<const double> v0, double delta_omega,
                        const PsorConfig& cfg = {});

/// Bulk-side terms of the parabolic VI needed by the flux recovery.
struct ParabolicTerms {
  double delta_omega = 0.0;
  std::vector<double> u0;  // bulk initial concentration
};

/// u = (z(t) - z(t - tau)) / tau and w = w0 + normal flux of z, where the
/// flux is recovered variationally from the residual of the bulk equation
/// on the surface rows divided by the lumped surface mass.
LimitFields postprocess_uw(const Mesh& mesh, const VIResult& at_t, const VIResult& at_prev, double tau,
                           std::span<const double> w0, const std::optional<ParabolicTerms>& parabolic = std::nullopt);

/// Discrete recovered normal flux of z on the surface (see postprocess_uw).
std::vector<double> recovered_flux(const Mesh& mesh, const SparseMatrix& stiffness, std::span<const double> z,
                                   std::span<const double> bulk_source = {});

/// Schur complement of the bulk stiffness onto the surface unknowns with
/// homogeneous outer Dirichlet data, plus the flux of the u_D lift.
class DtnOperator {
 public:
  /// Dense assembly is used up to this many surface nodes.
  static constexpr std::size_t kDenseLimit = 2000;

  DtnOperator(const Mesh& mesh, double u_dirichlet, bool force_matrix_free = false);

  std::size_t size() const noexcept { return ns_; }
  bool is_dense() const noexcept { return dense_.has_value(); }
  const DenseMatrix& matrix() const;
  /// Integrated normal flux of the discrete harmonic lift of u_D (zero on
  /// the surface) per unit time.
  const std::vector<double>& load() const noexcept { return load_; }
  std::vector<double> apply(std::span<const double> z_surface) const;

 private:
  std::vector<double> interior_solve(std::span<const double> rhs) const;

  const Mesh* mesh_;
  std::size_t ns_;
  std::vector<Index> interior_;         // bulk ids of interior unknowns
  std::vector<Index> interior_pos_;     // bulk id -> interior position or kNoIndex
  SparseMatrix k_ii_, k_is_, k_si_, k_ss_;
  std::optional<DenseMatrix> dense_;
  std::vector<double> load_;
};

DtnOperator dtn_matrix(const Mesh& mesh, double u_dirichlet);

/// Surface complementarity system
///   A z + t g - S v0 = -S vhat,  z >= 0, vhat <= 0, z vhat = 0.
struct SurfaceVIResult {
  std::vector<double> z;
  std::vector<double> multiplier;  // vhat
  std::vector<char> active;
  int iterations = 0;
  double complementarity = 0.0;
};

SurfaceVIResult solve_dtn_complementarity(const DtnOperator& dtn, const Mesh& mesh, double t,
                                          std::span<const double> v0, const PsorConfig& cfg = {});

/// Maximal surface arc on which the trace of z is below the threshold.
struct FreeBoundaryArc {
  std::size_t loop = 0;
  double s_start = 0.0;  // arclength from the first node of the loop
  double s_end = 0.0;
  double theta_start = 0.0;  // polar angle about the loop centroid
  double theta_end = 0.0;
  double length = 0.0;
};

inline constexpr double kDefaultFreeBoundaryThreshold = 5e-3;

std::vector<FreeBoundaryArc> extract_free_boundary(const Mesh& mesh, std::span<const double> z_bulk,
                                                   double threshold = kDefaultFreeBoundaryThreshold);
std::vector<FreeBoundaryArc> extract_free_boundary(const Mesh& mesh, const VIResult& vi,
                                                   double threshold = kDefaultFreeBoundaryThreshold);

}  // namespace bsfree
