#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "coupled.hpp"
#include "freeboundary.hpp"
#include "mesh.hpp"

namespace bsfree {

/// Nodal fields at one instant: bulk values u and surface values w.
struct FieldSnapshot {
  double time = 0.0;
  std::vector<double> u;
  std::vector<double> w;
};

/// Shortest decimal form that parses back to the same double.
std::string format_double(double v);

void write_text_file(const std::string& path, std::string_view content);
std::string read_text_file(const std::string& path);

/// One row per bulk vertex:
///   time,node_kind,node_id,x,y,value_u,value_w
/// node_kind is "surface" for vertices on the surface (value_w filled) and
/// "bulk" otherwise (value_w empty).
std::string snapshots_csv(const Mesh& mesh, std::span<const FieldSnapshot> snapshots);
/// Parses snapshots_csv output for the given mesh.
std::vector<FieldSnapshot> parse_snapshots_csv(const Mesh& mesh, std::string_view text);

/// Legacy ASCII VTK unstructured grid with point arrays U and W (W is zero
/// away from the surface) and a surface indicator array.
std::string vtk_legacy(const Mesh& mesh, std::span<const double> u, std::span<const double> w,
                       const std::string& title);

/// step,time,minU,maxU,minW,maxW,Q,R_cum. Every `every`-th record plus the last.
std::string diagnostics_csv(std::span<const StepRecord> records, int every = 1);

/// node_id,x,y,z,active,multiplier for every bulk vertex (active and
/// multiplier empty off the surface), then a "# summary" comment line.
std::string vi_csv(const Mesh& mesh, const VIResult& vi);

/// Bulk z values from vi_csv output for the given mesh.
std::vector<double> parse_vi_csv_z(const Mesh& mesh, std::string_view text);

/// loop_id,theta_start,theta_end,arclength
std::string free_boundary_csv(std::span<const FreeBoundaryArc> arcs);

}  // namespace bsfree
