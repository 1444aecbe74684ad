#pragma once

#include <array>
#include <span>
#include <string>
#include <vector>

#include "io.hpp"
#include "mesh.hpp"

namespace bsfree {

/// P1 interpolation of coarse-mesh fields onto the vertices of a mesh that
/// refines it. Construction checks nestedness: every fine triangle must lie
/// inside one coarse triangle and every fine surface segment inside one
/// coarse surface segment; otherwise ConfigError is thrown.
class Prolongation {
 public:
  Prolongation(const Mesh& coarse, const Mesh& fine);

  std::vector<double> bulk(std::span<const double> coarse_values) const;
  std::vector<double> surface(std::span<const double> coarse_values) const;

 private:
  struct Stencil {
    std::array<Index, 3> node{};
    std::array<double, 3> weight{};
  };
  std::size_t coarse_vertices_ = 0, coarse_surface_ = 0;
  std::vector<Stencil> bulk_;     // per fine vertex, coarse vertex ids
  std::vector<Stencil> surface_;  // per fine surface node, coarse surface ids (two used)
};

struct ComparisonEntry {
  std::string label;
  double time = 0.0;
  double l2_omega_u = 0.0;  // ||U_a - U_b||_{L2(Omega)}
  double l2_gamma_u = 0.0;  // ||U_a - U_b||_{L2(Gamma)} on the traces
  double l2_gamma_w = 0.0;  // ||W_a - W_b||_{L2(Gamma)}
  double overlap_a = 0.0;   // int_Gamma U_a W_a
  double overlap_b = 0.0;
};

/// Per-member summary of an epsilon sweep.
struct SweepSummary {
  std::string label;
  double epsilon = 0.0;
  double tau = 0.0;
  int steps = 0;
  double overlap_integral = 0.0;  // int_0^T int_Gamma U W
  double overlap_bound = 0.0;     // epsilon * 1'S W0
  double reaction_identity_error = 0.0;
  double min_u = 0.0, max_u = 0.0, min_w = 0.0, max_w = 0.0;
};

struct ComparisonReport {
  std::vector<ComparisonEntry> entries;
  std::vector<SweepSummary> summaries;
};

/// Discrepancies between run A and run B at the requested times. Run B's
/// mesh must equal or refine run A's mesh; A is prolongated onto B and the
/// norms use B's consistent mass matrices. For each time the snapshot of
/// each run nearest to it is used, and it must lie within time_tol.
std::vector<ComparisonEntry> compare_fields(const Mesh& mesh_a, std::span<const FieldSnapshot> run_a,
                                            const Mesh& mesh_b, std::span<const FieldSnapshot> run_b,
                                            std::span<const double> times, const std::string& label = "",
                                            double time_tol = 1e-3);

/// int_Gamma U W with the consistent surface mass.
double overlap_functional(const Mesh& mesh, std::span<const double> u, std::span<const double> w);

/// label,time,l2_omega_u,l2_gamma_u,l2_gamma_w,overlap_a,overlap_b
std::string comparison_csv(std::span<const ComparisonEntry> entries);
/// label,epsilon,tau,steps,overlap_integral,overlap_bound,reaction_identity_error,minU,maxU,minW,maxW
std::string summary_csv(std::span<const SweepSummary> summaries);

}  // namespace bsfree
