#pragma once

#include <array>
#include <cstddef>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace bsfree {

using Index = std::size_t;
inline constexpr Index kNoIndex = std::numeric_limits<Index>::max();

struct Point {
  double x = 0.0;
  double y = 0.0;
};

enum class BoundaryMarker { InnerSurface, OuterBoundary };

struct BoundaryEdge {
  std::array<Index, 2> v;
  BoundaryMarker marker;
};

/// Closed circle used to optionally snap refined surface nodes.
struct Circle {
  Point center;
  double radius = 1.0;
};

/// 2D triangulation of a bulk domain whose boundary splits into an inner
/// closed curve (the surface) and an outer boundary.
///
/// A Mesh is immutable once constructed. The constructor validates every
/// structural invariant and throws MeshError naming the first one that fails.
/// Surface nodes are stored loop by loop; within a loop consecutive nodes are
/// joined by a surface segment and the loop closes back on its first node.
/// Segments are oriented with the bulk domain on their right, so the left
/// normal of a segment is the outward normal of the bulk domain.
class Mesh {
 public:
  Mesh(std::vector<Point> vertices, std::vector<std::array<Index, 3>> triangles,
       std::vector<BoundaryEdge> boundary_edges);

  const std::vector<Point>& vertices() const noexcept { return vertices_; }
  const std::vector<std::array<Index, 3>>& triangles() const noexcept { return triangles_; }
  const std::vector<BoundaryEdge>& boundary_edges() const noexcept { return boundary_edges_; }

  /// Bulk vertex indices of surface nodes, ordered loop by loop.
  const std::vector<Index>& surface_nodes() const noexcept { return surface_nodes_; }
  /// Surface segments as pairs of bulk vertex indices.
  const std::vector<std::array<Index, 2>>& surface_segments() const noexcept {
    return surface_segments_;
  }
  /// Offsets into surface_nodes(); loop k spans [loop_offsets[k], loop_offsets[k+1]).
  const std::vector<Index>& loop_offsets() const noexcept { return loop_offsets_; }
  std::size_t num_loops() const noexcept { return loop_offsets_.size() - 1; }

  /// Bulk vertices on the outer boundary, ascending.
  const std::vector<Index>& outer_nodes() const noexcept { return outer_nodes_; }

  /// Position of a bulk vertex in surface_nodes(), or kNoIndex.
  Index surface_index(Index vertex) const noexcept { return surface_index_[vertex]; }
  bool is_outer(Index vertex) const noexcept { return is_outer_[vertex] != 0; }

  std::size_t num_vertices() const noexcept { return vertices_.size(); }
  std::size_t num_triangles() const noexcept { return triangles_.size(); }
  std::size_t num_surface_nodes() const noexcept { return surface_nodes_.size(); }

  double triangle_area(Index t) const;
  double area() const;
  double surface_length() const;
  double max_edge_length() const;
  double max_surface_segment_length() const;
  /// Smallest interior angle over all triangles, radians.
  double min_angle() const;
  /// Largest interior angle over all triangles, radians.
  double max_angle() const;
  /// Number of distinct undirected edges.
  std::size_t num_edges() const;

  friend bool operator==(const Mesh& a, const Mesh& b);

 private:
  void validate_and_index();

  std::vector<Point> vertices_;
  std::vector<std::array<Index, 3>> triangles_;
  std::vector<BoundaryEdge> boundary_edges_;
  std::vector<Index> surface_nodes_;
  std::vector<std::array<Index, 2>> surface_segments_;
  std::vector<Index> loop_offsets_;
  std::vector<Index> outer_nodes_;
  std::vector<Index> surface_index_;
  std::vector<char> is_outer_;
};

/// Structured annulus description. Radial layers follow a geometric
/// progression whose ratio is `grading`, smallest layer at the inner circle.
struct AnnulusSpec {
  double r_inner = 1.0;
  double r_outer = 2.0;
  int n_angular = 32;
  int n_radial = 4;
  double grading = 1.0;

  void validate() const;
  bool operator==(const AnnulusSpec&) const = default;
};

/// Radii of the n_radial + 1 rings of an annulus spec.
std::vector<double> annulus_radii(const AnnulusSpec& spec);

/// Structured annulus mesh. Ring j is rotated by j*pi/n_angular so that each
/// layer is a strip of near-isosceles triangles. Inner ring nodes form the
/// surface; its segments run counterclockwise.
Mesh generate_annulus(const AnnulusSpec& spec);

/// Red refinement: every triangle is split into four through its edge
/// midpoints. Existing vertices keep their indices; midpoints are appended.
/// When `project_surface` is set, new surface midpoints are moved radially
/// onto that circle; otherwise the polygonal surface is kept.
Mesh refine_uniform(const Mesh& mesh, const std::optional<Circle>& project_surface = std::nullopt);

/// Parse the "bsfree-mesh 1" ASCII format.
Mesh import_mesh(std::string_view text);
/// Serialize to the "bsfree-mesh 1" ASCII format (round-trips exactly).
std::string export_mesh(const Mesh& mesh);

Mesh read_mesh_file(const std::string& path);
void write_mesh_file(const Mesh& mesh, const std::string& path);

/// Polar angle of a point about the origin in [0, 2*pi).
double polar_angle(const Point& p);

}  // namespace bsfree
