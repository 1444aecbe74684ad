#include "io.hpp"

#include <charconv>
#include <fstream>
#include <map>
#include <sstream>

#include "error.hpp"

namespace bsfree {

std::string format_double(double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

void write_text_file(const std::string& path, std::string_view content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw IoError("write failed: " + path);
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string snapshots_csv(const Mesh& mesh, std::span<const FieldSnapshot> snapshots) {
  std::string out = "time,node_kind,node_id,x,y,value_u,value_w\n";
  for (const FieldSnapshot& s : snapshots) {
    if (s.u.size() != mesh.num_vertices() || s.w.size() != mesh.num_surface_nodes())
      throw Error("snapshot does not match the mesh");
    const std::string t = format_double(s.time);
    for (Index v = 0; v < mesh.num_vertices(); ++v) {
      const Point& p = mesh.vertices()[v];
      const Index si = mesh.surface_index(v);
      out += t;
      out += si == kNoIndex ? ",bulk," : ",surface,";
      out += std::to_string(v) + ',' + format_double(p.x) + ',' + format_double(p.y) + ',' + format_double(s.u[v]) + ',';
      if (si != kNoIndex) out += format_double(s.w[si]);
      out += '\n';
    }
  }
  return out;
}

namespace {

std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> parts;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(sep, start);
    parts.push_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return parts;
}

double parse_number(std::string_view s, std::size_t line) {
  double v = 0.0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw Error("snapshot csv line " + std::to_string(line) + ": bad number '" + std::string(s) + "'");
  return v;
}

}  // namespace

std::vector<FieldSnapshot> parse_snapshots_csv(const Mesh& mesh, std::string_view text) {
  std::map<double, FieldSnapshot> by_time;
  std::map<double, std::size_t> filled;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;
    if (line_no == 1) {
      if (line != "time,node_kind,node_id,x,y,value_u,value_w")
        throw Error("snapshot csv: unexpected header");
      continue;
    }
    const auto f = split(line, ',');
    if (f.size() != 7) throw Error("snapshot csv line " + std::to_string(line_no) + ": expected 7 fields");
    const double t = parse_number(f[0], line_no);
    const double id = parse_number(f[2], line_no);
    if (id < 0 || id >= static_cast<double>(mesh.num_vertices()) || id != static_cast<double>(static_cast<Index>(id)))
      throw Error("snapshot csv line " + std::to_string(line_no) + ": node_id does not belong to the mesh");
    const auto v = static_cast<Index>(id);
    auto [it, inserted] = by_time.try_emplace(t);
    if (inserted) {
      it->second.time = t;
      it->second.u.assign(mesh.num_vertices(), 0.0);
      it->second.w.assign(mesh.num_surface_nodes(), 0.0);
    }
    it->second.u[v] = parse_number(f[5], line_no);
    const Index si = mesh.surface_index(v);
    if ((si != kNoIndex) != (f[1] == "surface"))
      throw Error("snapshot csv line " + std::to_string(line_no) + ": node_kind disagrees with the mesh");
    if (si != kNoIndex) it->second.w[si] = parse_number(f[6], line_no);
    ++filled[t];
  }
  std::vector<FieldSnapshot> out;
  for (auto& [t, s] : by_time) {
    if (filled[t] != mesh.num_vertices())
      throw Error("snapshot csv: time " + format_double(t) + " does not cover every vertex exactly once");
    out.push_back(std::move(s));
  }
  return out;
}

std::string vtk_legacy(const Mesh& mesh, std::span<const double> u, std::span<const double> w,
                       const std::string& title) {
  const std::size_t nv = mesh.num_vertices(), nt = mesh.num_triangles();
  std::string out = "# vtk DataFile Version 3.0\n" + title + "\nASCII\nDATASET UNSTRUCTURED_GRID\n";
  out += "POINTS " + std::to_string(nv) + " double\n";
  for (const Point& p : mesh.vertices()) out += format_double(p.x) + ' ' + format_double(p.y) + " 0\n";
  out += "CELLS " + std::to_string(nt) + ' ' + std::to_string(4 * nt) + '\n';
  for (const auto& t : mesh.triangles())
    out += "3 " + std::to_string(t[0]) + ' ' + std::to_string(t[1]) + ' ' + std::to_string(t[2]) + '\n';
  out += "CELL_TYPES " + std::to_string(nt) + '\n';
  for (std::size_t i = 0; i < nt; ++i) out += "5\n";
  out += "POINT_DATA " + std::to_string(nv) + '\n';
  out += "SCALARS U double 1\nLOOKUP_TABLE default\n";
  for (std::size_t v = 0; v < nv; ++v) out += format_double(u[v]) + '\n';
  out += "SCALARS W double 1\nLOOKUP_TABLE default\n";
  for (std::size_t v = 0; v < nv; ++v) {
    const Index si = mesh.surface_index(v);
    out += si == kNoIndex ? std::string("0") : format_double(w[si]);
    out += '\n';
  }
  out += "SCALARS surface int 1\nLOOKUP_TABLE default\n";
  for (std::size_t v = 0; v < nv; ++v) out += mesh.surface_index(v) == kNoIndex ? "0\n" : "1\n";
  return out;
}

std::string diagnostics_csv(std::span<const StepRecord> records, int every) {
  if (every < 1) every = 1;
  std::string out = "step,time,minU,maxU,minW,maxW,Q,R_cum\n";
  for (std::size_t k = 0; k < records.size(); ++k) {
    if (k % static_cast<std::size_t>(every) != 0 && k + 1 != records.size()) continue;
    const StepRecord& r = records[k];
    out += std::to_string(r.step) + ',' + format_double(r.time) + ',' + format_double(r.min_u) + ',' +
           format_double(r.max_u) + ',' + format_double(r.min_w) + ',' + format_double(r.max_w) + ',' +
           format_double(r.conserved) + ',' + format_double(r.reaction_cumulative) + '\n';
  }
  return out;
}

std::string vi_csv(const Mesh& mesh, const VIResult& vi) {
  std::string out = "node_id,x,y,z,active,multiplier\n";
  for (Index v = 0; v < mesh.num_vertices(); ++v) {
    const Point& p = mesh.vertices()[v];
    out += std::to_string(v) + ',' + format_double(p.x) + ',' + format_double(p.y) + ',' + format_double(vi.z[v]) + ',';
    const Index si = mesh.surface_index(v);
    if (si != kNoIndex) out += std::string(vi.active[si] ? "1" : "0") + ',' + format_double(vi.multiplier[si]);
    else out += ',';
    out += '\n';
  }
  std::size_t n_active = 0;
  for (char a : vi.active) n_active += a ? 1 : 0;
  out += "# summary time=" + format_double(vi.time) + " iterations=" + std::to_string(vi.iterations) +
         " complementarity=" + format_double(vi.complementarity) + " active=" + std::to_string(n_active) + '/' +
         std::to_string(vi.active.size()) + '\n';
  return out;
}

std::vector<double> parse_vi_csv_z(const Mesh& mesh, std::string_view text) {
  std::vector<double> z(mesh.num_vertices(), 0.0);
  std::vector<char> seen(mesh.num_vertices(), 0);
  std::size_t line_no = 0, pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty() || line.front() == '#') continue;
    if (line_no == 1) {
      if (line != "node_id,x,y,z,active,multiplier") throw Error("vi csv: unexpected header");
      continue;
    }
    const auto f = split(line, ',');
    if (f.size() != 6) throw Error("vi csv line " + std::to_string(line_no) + ": expected 6 fields");
    const double id = parse_number(f[0], line_no);
    if (id < 0 || id >= static_cast<double>(mesh.num_vertices()))
      throw Error("vi csv line " + std::to_string(line_no) + ": node_id does not belong to the mesh");
    const auto v = static_cast<Index>(id);
    z[v] = parse_number(f[3], line_no);
    seen[v] = 1;
  }
  for (char s : seen)
    if (!s) throw Error("vi csv: not every vertex of the mesh is listed");
  return z;
}

std::string free_boundary_csv(std::span<const FreeBoundaryArc> arcs) {
  std::string out = "loop_id,theta_start,theta_end,arclength\n";
  for (const FreeBoundaryArc& a : arcs)
    out += std::to_string(a.loop) + ',' + format_double(a.theta_start) + ',' + format_double(a.theta_end) + ',' +
           format_double(a.length) + '\n';
  return out;
}

}  // namespace bsfree
