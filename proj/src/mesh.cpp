#include "mesh.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <sstream>
#include <utility>

#include "error.hpp"

namespace bsfree {

namespace {

using EdgeKey = std::pair<Index, Index>;

EdgeKey edge_key(Index a, Index b) { return a < b ? EdgeKey{a, b} : EdgeKey{b, a}; }

double signed_area(const Point& a, const Point& b, const Point& c) {
  return 0.5 * ((b.x - a.x) * (c.y - a.y) - (c.x - a.x) * (b.y - a.y));
}

double distance(const Point& a, const Point& b) { return std::hypot(b.x - a.x, b.y - a.y); }

const char* marker_name(BoundaryMarker m) {
  return m == BoundaryMarker::InnerSurface ? "inner" : "outer";
}

std::string edge_str(Index a, Index b) {
  return "(" + std::to_string(a) + ", " + std::to_string(b) + ")";
}

}  // namespace

Mesh::Mesh(std::vector<Point> vertices, std::vector<std::array<Index, 3>> triangles,
           std::vector<BoundaryEdge> boundary_edges)
    : vertices_(std::move(vertices)),
      triangles_(std::move(triangles)),
      boundary_edges_(std::move(boundary_edges)) {
  validate_and_index();
}

void Mesh::validate_and_index() {
  const std::size_t nv = vertices_.size();
  if (nv < 3) throw MeshError("mesh needs at least 3 vertices");
  if (triangles_.empty()) throw MeshError("mesh has no triangles");

  for (std::size_t i = 0; i < nv; ++i) {
    if (!std::isfinite(vertices_[i].x) || !std::isfinite(vertices_[i].y))
      throw MeshError("vertex " + std::to_string(i) + " has a non-finite coordinate");
  }

  // Orientation and connectivity.
  std::map<EdgeKey, int> edge_count;
  // Directed edge (a, b) -> triangle that traverses it counterclockwise.
  std::map<EdgeKey, Index> directed_owner;
  for (std::size_t t = 0; t < triangles_.size(); ++t) {
    const auto& tri = triangles_[t];
    for (Index v : tri) {
      if (v >= nv)
        throw MeshError("triangle " + std::to_string(t) + " references vertex " +
                        std::to_string(v) + " out of range");
    }
    if (tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2])
      throw MeshError("triangle " + std::to_string(t) + " repeats a vertex");
    if (!(signed_area(vertices_[tri[0]], vertices_[tri[1]], vertices_[tri[2]]) > 0.0))
      throw MeshError("orientation: triangle " + std::to_string(t) +
                      " has non-positive signed area (expected counterclockwise)");
    for (int e = 0; e < 3; ++e) {
      Index a = tri[e], b = tri[(e + 1) % 3];
      if (++edge_count[edge_key(a, b)] > 2)
        throw MeshError("topology: edge " + edge_str(a, b) + " is shared by more than two triangles");
      if (!directed_owner.emplace(EdgeKey{a, b}, t).second)
        throw MeshError("orientation: directed edge " + edge_str(a, b) +
                        " traversed by two triangles (inconsistent orientation)");
    }
  }

  // Declared boundary versus topological boundary.
  std::map<EdgeKey, BoundaryMarker> declared;
  for (const auto& be : boundary_edges_) {
    if (be.v[0] >= nv || be.v[1] >= nv)
      throw MeshError("boundary edge " + edge_str(be.v[0], be.v[1]) + " references a vertex out of range");
    auto key = edge_key(be.v[0], be.v[1]);
    if (!declared.emplace(key, be.marker).second)
      throw MeshError("boundary edge " + edge_str(be.v[0], be.v[1]) + " declared twice");
    auto it = edge_count.find(key);
    if (it == edge_count.end() || it->second != 1)
      throw MeshError("topological boundary: declared boundary edge " + edge_str(be.v[0], be.v[1]) +
                      " is not on the boundary of the triangle set");
  }
  for (const auto& [key, count] : edge_count) {
    if (count == 1 && !declared.count(key))
      throw MeshError("topological boundary: boundary edge " + edge_str(key.first, key.second) +
                      " of the triangle set has no marker");
  }

  // Vertex markers.
  std::vector<char> on_inner(nv, 0);
  is_outer_.assign(nv, 0);
  for (const auto& be : boundary_edges_) {
    for (Index v : be.v) {
      if (be.marker == BoundaryMarker::InnerSurface)
        on_inner[v] = 1;
      else
        is_outer_[v] = 1;
    }
  }
  for (std::size_t v = 0; v < nv; ++v) {
    if (on_inner[v] && is_outer_[v])
      throw MeshError("markers: vertex " + std::to_string(v) + " carries both inner and outer markers");
    if (is_outer_[v]) outer_nodes_.push_back(v);
  }

  // Surface segments, oriented with the bulk on their right.
  std::vector<Index> next(nv, kNoIndex), prev(nv, kNoIndex);
  std::vector<int> surface_edges_per_triangle(triangles_.size(), 0);
  std::vector<std::array<Index, 2>> segments;
  for (const auto& be : boundary_edges_) {
    if (be.marker != BoundaryMarker::InnerSurface) continue;
    Index a = be.v[0], b = be.v[1];
    auto it = directed_owner.find({a, b});
    if (it == directed_owner.end()) {
      it = directed_owner.find({b, a});
      std::swap(a, b);
    }
    // Triangle traverses a -> b counterclockwise; the surface segment runs b -> a.
    if (++surface_edges_per_triangle[it->second] > 1)
      throw MeshError("surface: triangle " + std::to_string(it->second) +
                      " has more than one edge on the inner surface");
    segments.push_back({b, a});
  }
  if (segments.empty()) throw MeshError("surface: mesh has no inner surface edges");
  for (const auto& s : segments) {
    if (next[s[0]] != kNoIndex || prev[s[1]] != kNoIndex)
      throw MeshError("surface: vertex " + std::to_string(next[s[0]] != kNoIndex ? s[0] : s[1]) +
                      " appears in more than two surface segments");
    next[s[0]] = s[1];
    prev[s[1]] = s[0];
  }
  for (std::size_t v = 0; v < nv; ++v) {
    if (on_inner[v] && (next[v] == kNoIndex || prev[v] == kNoIndex))
      throw MeshError("surface: vertex " + std::to_string(v) + " is not on a closed surface loop");
  }

  surface_index_.assign(nv, kNoIndex);
  loop_offsets_.push_back(0);
  for (std::size_t start = 0; start < nv; ++start) {
    if (!on_inner[start] || surface_index_[start] != kNoIndex) continue;
    Index v = start;
    do {
      surface_index_[v] = surface_nodes_.size();
      surface_nodes_.push_back(v);
      surface_segments_.push_back({v, next[v]});
      v = next[v];
    } while (v != start);
    loop_offsets_.push_back(surface_nodes_.size());
  }
}

double Mesh::triangle_area(Index t) const {
  const auto& tri = triangles_[t];
  return signed_area(vertices_[tri[0]], vertices_[tri[1]], vertices_[tri[2]]);
}

double Mesh::area() const {
  double a = 0.0;
  for (std::size_t t = 0; t < triangles_.size(); ++t) a += triangle_area(t);
  return a;
}

double Mesh::surface_length() const {
  double len = 0.0;
  for (const auto& s : surface_segments_) len += distance(vertices_[s[0]], vertices_[s[1]]);
  return len;
}

double Mesh::max_edge_length() const {
  double h = 0.0;
  for (const auto& tri : triangles_)
    for (int e = 0; e < 3; ++e) h = std::max(h, distance(vertices_[tri[e]], vertices_[tri[(e + 1) % 3]]));
  return h;
}

double Mesh::max_surface_segment_length() const {
  double h = 0.0;
  for (const auto& s : surface_segments_) h = std::max(h, distance(vertices_[s[0]], vertices_[s[1]]));
  return h;
}

namespace {

std::array<double, 3> triangle_angles(const Point& a, const Point& b, const Point& c) {
  const double la = distance(b, c), lb = distance(c, a), lc = distance(a, b);
  auto angle = [](double opp, double s1, double s2) {
    double cosv = (s1 * s1 + s2 * s2 - opp * opp) / (2.0 * s1 * s2);
    return std::acos(std::clamp(cosv, -1.0, 1.0));
  };
  return {angle(la, lb, lc), angle(lb, lc, la), angle(lc, la, lb)};
}

}  // namespace

double Mesh::min_angle() const {
  double m = std::numbers::pi;
  for (const auto& tri : triangles_)
    for (double a : triangle_angles(vertices_[tri[0]], vertices_[tri[1]], vertices_[tri[2]]))
      m = std::min(m, a);
  return m;
}

double Mesh::max_angle() const {
  double m = 0.0;
  for (const auto& tri : triangles_)
    for (double a : triangle_angles(vertices_[tri[0]], vertices_[tri[1]], vertices_[tri[2]]))
      m = std::max(m, a);
  return m;
}

std::size_t Mesh::num_edges() const {
  std::map<EdgeKey, int> edges;
  for (const auto& tri : triangles_)
    for (int e = 0; e < 3; ++e) edges[edge_key(tri[e], tri[(e + 1) % 3])] = 1;
  return edges.size();
}

bool operator==(const Mesh& a, const Mesh& b) {
  if (a.vertices_.size() != b.vertices_.size() || a.triangles_ != b.triangles_ ||
      a.boundary_edges_.size() != b.boundary_edges_.size())
    return false;
  for (std::size_t i = 0; i < a.vertices_.size(); ++i) {
    if (a.vertices_[i].x != b.vertices_[i].x || a.vertices_[i].y != b.vertices_[i].y) return false;
  }
  for (std::size_t i = 0; i < a.boundary_edges_.size(); ++i) {
    if (a.boundary_edges_[i].v != b.boundary_edges_[i].v ||
        a.boundary_edges_[i].marker != b.boundary_edges_[i].marker)
      return false;
  }
  return true;
}

void AnnulusSpec::validate() const {
  if (!(r_inner > 0.0) || !(r_inner < r_outer))
    throw ConfigError("r_inner", "require 0 < r_inner < r_outer");
  if (n_angular < 8) throw ConfigError("n_angular", "must be at least 8");
  if (n_radial < 2) throw ConfigError("n_radial", "must be at least 2");
  if (!(grading >= 1.0 && grading <= 4.0)) throw ConfigError("grading", "must lie in [1, 4]");
}

std::vector<double> annulus_radii(const AnnulusSpec& spec) {
  spec.validate();
  std::vector<double> weights(spec.n_radial);
  double total = 0.0, w = 1.0;
  for (int j = 0; j < spec.n_radial; ++j) {
    weights[j] = w;
    total += w;
    w *= spec.grading;
  }
  std::vector<double> radii(spec.n_radial + 1);
  radii[0] = spec.r_inner;
  double acc = 0.0;
  for (int j = 0; j < spec.n_radial; ++j) {
    acc += weights[j];
    radii[j + 1] = spec.r_inner + (spec.r_outer - spec.r_inner) * acc / total;
  }
  radii.back() = spec.r_outer;
  return radii;
}

Mesh generate_annulus(const AnnulusSpec& spec) {
  const auto radii = annulus_radii(spec);
  const Index n = static_cast<Index>(spec.n_angular);
  const Index rings = radii.size();
  const double dtheta = 2.0 * std::numbers::pi / static_cast<double>(n);

  std::vector<Point> vertices;
  vertices.reserve(n * rings);
  for (Index j = 0; j < rings; ++j) {
    const double offset = (j % 2 == 0) ? 0.0 : 0.5;
    for (Index k = 0; k < n; ++k) {
      const double theta = (static_cast<double>(k) + offset) * dtheta;
      vertices.push_back({radii[j] * std::cos(theta), radii[j] * std::sin(theta)});
    }
  }
  auto id = [n](Index ring, Index k) { return ring * n + (k % n); };

  std::vector<std::array<Index, 3>> triangles;
  triangles.reserve(2 * n * (rings - 1));
  auto push_ccw = [&](Index a, Index b, Index c) {
    if (signed_area(vertices[a], vertices[b], vertices[c]) < 0.0) std::swap(b, c);
    triangles.push_back({a, b, c});
  };
  for (Index j = 0; j + 1 < rings; ++j) {
    for (Index k = 0; k < n; ++k) {
      if (j % 2 == 0) {
        // Ring j+1 node k sits angularly between ring j nodes k and k+1.
        push_ccw(id(j, k), id(j, k + 1), id(j + 1, k));
        push_ccw(id(j, k + 1), id(j + 1, k + 1), id(j + 1, k));
      } else {
        // Ring j node k sits between ring j+1 nodes k and k+1.
        push_ccw(id(j + 1, k), id(j, k), id(j + 1, k + 1));
        push_ccw(id(j, k), id(j, k + 1), id(j + 1, k + 1));
      }
    }
  }

  std::vector<BoundaryEdge> boundary;
  boundary.reserve(2 * n);
  for (Index k = 0; k < n; ++k) boundary.push_back({{id(0, k), id(0, k + 1)}, BoundaryMarker::InnerSurface});
  for (Index k = 0; k < n; ++k)
    boundary.push_back({{id(rings - 1, k), id(rings - 1, k + 1)}, BoundaryMarker::OuterBoundary});

  return Mesh(std::move(vertices), std::move(triangles), std::move(boundary));
}

Mesh refine_uniform(const Mesh& mesh, const std::optional<Circle>& project_surface) {
  std::vector<Point> vertices = mesh.vertices();
  std::map<EdgeKey, Index> midpoint;
  auto mid = [&](Index a, Index b) {
    auto key = edge_key(a, b);
    auto it = midpoint.find(key);
    if (it != midpoint.end()) return it->second;
    const Point& pa = vertices[a];
    const Point& pb = vertices[b];
    Index idx = vertices.size();
    vertices.push_back({0.5 * (pa.x + pb.x), 0.5 * (pa.y + pb.y)});
    midpoint.emplace(key, idx);
    return idx;
  };

  std::vector<std::array<Index, 3>> triangles;
  triangles.reserve(4 * mesh.num_triangles());
  for (const auto& tri : mesh.triangles()) {
    const Index a = tri[0], b = tri[1], c = tri[2];
    const Index ab = mid(a, b), bc = mid(b, c), ca = mid(c, a);
    triangles.push_back({a, ab, ca});
    triangles.push_back({ab, b, bc});
    triangles.push_back({ca, bc, c});
    triangles.push_back({ab, bc, ca});
  }

  std::vector<BoundaryEdge> boundary;
  boundary.reserve(2 * mesh.boundary_edges().size());
  for (const auto& be : mesh.boundary_edges()) {
    const Index m = midpoint.at(edge_key(be.v[0], be.v[1]));
    boundary.push_back({{be.v[0], m}, be.marker});
    boundary.push_back({{m, be.v[1]}, be.marker});
    if (project_surface && be.marker == BoundaryMarker::InnerSurface) {
      Point& p = vertices[m];
      const double dx = p.x - project_surface->center.x, dy = p.y - project_surface->center.y;
      const double r = std::hypot(dx, dy);
      p.x = project_surface->center.x + project_surface->radius * dx / r;
      p.y = project_surface->center.y + project_surface->radius * dy / r;
    }
  }
  return Mesh(std::move(vertices), std::move(triangles), std::move(boundary));
}

namespace {

struct Line {
  int number;
  std::vector<std::string> tokens;
};

std::vector<Line> tokenize(std::string_view text) {
  std::vector<Line> lines;
  int number = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    ++number;
    std::string_view raw = text.substr(pos, end - pos);
    if (auto hash = raw.find('#'); hash != std::string_view::npos) raw = raw.substr(0, hash);
    std::istringstream in{std::string(raw)};
    Line line{number, {}};
    for (std::string tok; in >> tok;) line.tokens.push_back(tok);
    if (!line.tokens.empty()) lines.push_back(std::move(line));
    pos = end + 1;
  }
  return lines;
}

[[noreturn]] void parse_fail(int line, const std::string& what) {
  throw MeshError("parse error at line " + std::to_string(line) + ": " + what);
}

template <typename T>
T parse_number(const std::string& tok, int line) {
  T value{};
  const char* first = tok.data();
  const char* last = tok.data() + tok.size();
  if (!tok.empty() && tok[0] == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last) parse_fail(line, "invalid number '" + tok + "'");
  return value;
}

std::size_t parse_header(const Line& line, const char* keyword) {
  if (line.tokens.size() != 2 || line.tokens[0] != keyword)
    parse_fail(line.number, std::string("expected '") + keyword + " <count>'");
  return parse_number<std::size_t>(line.tokens[1], line.number);
}

void append_double(std::string& out, double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  out.append(buf, res.ptr);
}

}  // namespace

Mesh import_mesh(std::string_view text) {
  const auto lines = tokenize(text);
  std::size_t cur = 0;
  auto need = [&](const char* what) -> const Line& {
    if (cur >= lines.size())
      parse_fail(lines.empty() ? 1 : lines.back().number, std::string("unexpected end of document, expected ") + what);
    return lines[cur++];
  };

  const Line& header = need("header");
  if (header.tokens.size() != 2 || header.tokens[0] != "bsfree-mesh" || header.tokens[1] != "1")
    parse_fail(header.number, "expected header 'bsfree-mesh 1'");

  const std::size_t nv = parse_header(need("vertices section"), "vertices");
  std::vector<Point> vertices(nv);
  for (std::size_t i = 0; i < nv; ++i) {
    const Line& l = need("vertex line");
    if (l.tokens.size() != 2) parse_fail(l.number, "vertex line needs 2 coordinates");
    vertices[i] = {parse_number<double>(l.tokens[0], l.number), parse_number<double>(l.tokens[1], l.number)};
  }

  const std::size_t nt = parse_header(need("triangles section"), "triangles");
  std::vector<std::array<Index, 3>> triangles(nt);
  for (std::size_t i = 0; i < nt; ++i) {
    const Line& l = need("triangle line");
    if (l.tokens.size() != 3) parse_fail(l.number, "triangle line needs 3 vertex indices");
    for (int k = 0; k < 3; ++k) triangles[i][k] = parse_number<Index>(l.tokens[k], l.number);
  }

  const std::size_t nb = parse_header(need("boundary section"), "boundary");
  std::vector<BoundaryEdge> boundary(nb);
  for (std::size_t i = 0; i < nb; ++i) {
    const Line& l = need("boundary line");
    if (l.tokens.size() != 3) parse_fail(l.number, "boundary line needs 'i j marker'");
    boundary[i].v = {parse_number<Index>(l.tokens[0], l.number), parse_number<Index>(l.tokens[1], l.number)};
    if (l.tokens[2] == "inner")
      boundary[i].marker = BoundaryMarker::InnerSurface;
    else if (l.tokens[2] == "outer")
      boundary[i].marker = BoundaryMarker::OuterBoundary;
    else
      parse_fail(l.number, "unknown boundary marker '" + l.tokens[2] + "'");
  }
  if (cur != lines.size()) parse_fail(lines[cur].number, "trailing content after boundary section");

  return Mesh(std::move(vertices), std::move(triangles), std::move(boundary));
}

std::string export_mesh(const Mesh& mesh) {
  std::string out = "bsfree-mesh 1\n";
  out += "vertices " + std::to_string(mesh.num_vertices()) + "\n";
  for (const auto& p : mesh.vertices()) {
    append_double(out, p.x);
    out += ' ';
    append_double(out, p.y);
    out += '\n';
  }
  out += "triangles " + std::to_string(mesh.num_triangles()) + "\n";
  for (const auto& t : mesh.triangles())
    out += std::to_string(t[0]) + " " + std::to_string(t[1]) + " " + std::to_string(t[2]) + "\n";
  out += "boundary " + std::to_string(mesh.boundary_edges().size()) + "\n";
  for (const auto& be : mesh.boundary_edges())
    out += std::to_string(be.v[0]) + " " + std::to_string(be.v[1]) + " " + marker_name(be.marker) + "\n";
  return out;
}

Mesh read_mesh_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open mesh file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return import_mesh(buf.str());
}

void write_mesh_file(const Mesh& mesh, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write mesh file '" + path + "'");
  out << export_mesh(mesh);
}

double polar_angle(const Point& p) {
  double a = std::atan2(p.y, p.x);
  if (a < 0.0) a += 2.0 * std::numbers::pi;
  // Tiny negative angles round up to exactly 2 pi.
  return a < 2.0 * std::numbers::pi ? a : 0.0;
}

}  // namespace bsfree
