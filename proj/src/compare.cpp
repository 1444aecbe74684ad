#include "compare.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "error.hpp"
#include "fem.hpp"

namespace bsfree {

namespace {

/// Uniform bucket grid over triangle bounding boxes.
class TriangleLocator {
 public:
  explicit TriangleLocator(const Mesh& mesh) : mesh_(&mesh) {
    const auto& vs = mesh.vertices();
    lo_ = hi_ = vs.front();
    for (const Point& p : vs) {
      lo_.x = std::min(lo_.x, p.x), lo_.y = std::min(lo_.y, p.y);
      hi_.x = std::max(hi_.x, p.x), hi_.y = std::max(hi_.y, p.y);
    }
    n_ = std::max<std::size_t>(1, static_cast<std::size_t>(std::sqrt(static_cast<double>(mesh.num_triangles()))));
    const double pad = 1e-9 * std::max(hi_.x - lo_.x, hi_.y - lo_.y);
    lo_.x -= pad, lo_.y -= pad, hi_.x += pad, hi_.y += pad;
    cells_.resize(n_ * n_);
    for (Index t = 0; t < mesh.num_triangles(); ++t) {
      Point a = vs[mesh.triangles()[t][0]], b = a;
      for (Index v : mesh.triangles()[t]) {
        a.x = std::min(a.x, vs[v].x), a.y = std::min(a.y, vs[v].y);
        b.x = std::max(b.x, vs[v].x), b.y = std::max(b.y, vs[v].y);
      }
      const auto [i0, j0] = cell(a);
      const auto [i1, j1] = cell(b);
      for (std::size_t i = i0; i <= i1; ++i)
        for (std::size_t j = j0; j <= j1; ++j) cells_[i * n_ + j].push_back(t);
    }
  }

  std::array<double, 3> barycentric(Index t, const Point& p) const {
    const auto& tri = mesh_->triangles()[t];
    const Point& a = mesh_->vertices()[tri[0]];
    const Point& b = mesh_->vertices()[tri[1]];
    const Point& c = mesh_->vertices()[tri[2]];
    const double det = (b.x - a.x) * (c.y - a.y) - (c.x - a.x) * (b.y - a.y);
    const double l1 = ((p.x - a.x) * (c.y - a.y) - (c.x - a.x) * (p.y - a.y)) / det;
    const double l2 = ((b.x - a.x) * (p.y - a.y) - (p.x - a.x) * (b.y - a.y)) / det;
    return {1.0 - l1 - l2, l1, l2};
  }

  /// Triangle containing p (largest minimal barycentric coordinate), or
  /// kNoIndex when p lies outside by more than tol.
  Index locate(const Point& p, double tol) const {
    if (p.x < lo_.x || p.y < lo_.y || p.x > hi_.x || p.y > hi_.y) return kNoIndex;
    const auto [i, j] = cell(p);
    Index best = kNoIndex;
    double best_min = -std::numeric_limits<double>::infinity();
    for (Index t : cells_[i * n_ + j]) {
      const auto l = barycentric(t, p);
      const double m = std::min({l[0], l[1], l[2]});
      if (m > best_min) best_min = m, best = t;
    }
    return best_min >= -tol ? best : kNoIndex;
  }

 private:
  std::pair<std::size_t, std::size_t> cell(const Point& p) const {
    auto idx = [&](double v, double lo, double hi) {
      const double s = (v - lo) / (hi - lo) * static_cast<double>(n_);
      return static_cast<std::size_t>(std::clamp(s, 0.0, static_cast<double>(n_ - 1)));
    };
    return {idx(p.x, lo_.x, hi_.x), idx(p.y, lo_.y, hi_.y)};
  }

  const Mesh* mesh_;
  Point lo_, hi_;
  std::size_t n_ = 1;
  std::vector<std::vector<Index>> cells_;
};

constexpr double kNestTol = 1e-9;

}  // namespace

Prolongation::Prolongation(const Mesh& coarse, const Mesh& fine)
    : coarse_vertices_(coarse.num_vertices()), coarse_surface_(coarse.num_surface_nodes()) {
  if (fine.num_vertices() < coarse.num_vertices() || fine.num_surface_nodes() < coarse.num_surface_nodes())
    throw ConfigError("meshes", "second mesh is coarser than the first; meshes are not nested");
  const TriangleLocator locator(coarse);
  const auto& fv = fine.vertices();

  std::vector<Index> host(fine.num_vertices(), kNoIndex);
  bulk_.resize(fine.num_vertices());
  for (Index v = 0; v < fine.num_vertices(); ++v) {
    const Index t = locator.locate(fv[v], kNestTol);
    if (t == kNoIndex) throw ConfigError("meshes", "fine vertex " + std::to_string(v) + " lies outside the coarse mesh");
    const auto l = locator.barycentric(t, fv[v]);
    for (int k = 0; k < 3; ++k) {
      bulk_[v].node[k] = coarse.triangles()[t][k];
      bulk_[v].weight[k] = l[k];
    }
  }
  for (const auto& tri : fine.triangles()) {
    const Point c{(fv[tri[0]].x + fv[tri[1]].x + fv[tri[2]].x) / 3.0, (fv[tri[0]].y + fv[tri[1]].y + fv[tri[2]].y) / 3.0};
    const Index t = locator.locate(c, kNestTol);
    bool inside = t != kNoIndex;
    for (int k = 0; inside && k < 3; ++k) {
      const auto l = locator.barycentric(t, fv[tri[k]]);
      inside = std::min({l[0], l[1], l[2]}) >= -kNestTol;
    }
    if (!inside) throw ConfigError("meshes", "fine triangle straddles coarse triangles; meshes are not nested");
  }

  // Each fine surface segment must lie on one coarse surface segment.
  const auto& cv = coarse.vertices();
  surface_.assign(fine.num_surface_nodes(), Stencil{});
  std::vector<char> seen(fine.num_surface_nodes(), 0);
  for (const auto& fs : fine.surface_segments()) {
    const Point& p = fv[fs[0]];
    const Point& q = fv[fs[1]];
    bool found = false;
    for (const auto& cs : coarse.surface_segments()) {
      const Point& a = cv[cs[0]];
      const Point& b = cv[cs[1]];
      const double dx = b.x - a.x, dy = b.y - a.y, len2 = dx * dx + dy * dy;
      auto param = [&](const Point& x, double& s) {
        s = ((x.x - a.x) * dx + (x.y - a.y) * dy) / len2;
        const double off = std::abs((x.x - a.x) * dy - (x.y - a.y) * dx) / len2;
        return off <= kNestTol && s >= -kNestTol && s <= 1.0 + kNestTol;
      };
      double sp = 0.0, sq = 0.0;
      if (!param(p, sp) || !param(q, sq)) continue;
      const Index ia = coarse.surface_index(cs[0]), ib = coarse.surface_index(cs[1]);
      for (auto [v, s] : {std::pair{fs[0], sp}, std::pair{fs[1], sq}}) {
        const Index si = fine.surface_index(v);
        surface_[si].node = {ia, ib, ia};
        surface_[si].weight = {1.0 - std::clamp(s, 0.0, 1.0), std::clamp(s, 0.0, 1.0), 0.0};
        seen[si] = 1;
      }
      found = true;
      break;
    }
    if (!found) throw ConfigError("meshes", "fine surface segment is not contained in the coarse surface");
  }
  if (std::find(seen.begin(), seen.end(), 0) != seen.end())
    throw ConfigError("meshes", "fine surface node not covered by the coarse surface");
}

std::vector<double> Prolongation::bulk(std::span<const double> c) const {
  if (c.size() != coarse_vertices_) throw Error("prolongation: bulk field length mismatch");
  std::vector<double> out(bulk_.size());
  for (std::size_t i = 0; i < out.size(); ++i)
    for (int k = 0; k < 3; ++k) out[i] += bulk_[i].weight[k] * c[bulk_[i].node[k]];
  return out;
}

std::vector<double> Prolongation::surface(std::span<const double> c) const {
  if (c.size() != coarse_surface_) throw Error("prolongation: surface field length mismatch");
  std::vector<double> out(surface_.size());
  for (std::size_t i = 0; i < out.size(); ++i)
    for (int k = 0; k < 2; ++k) out[i] += surface_[i].weight[k] * c[surface_[i].node[k]];
  return out;
}

double overlap_functional(const Mesh& mesh, std::span<const double> u, std::span<const double> w) {
  const std::vector<double> tu = restrict_to_surface(mesh, u);
  return dot(tu, surface_mass(mesh, MassKind::Consistent).multiply(w));
}

namespace {

const FieldSnapshot& nearest(std::span<const FieldSnapshot> run, double t, double tol, const char* which) {
  if (run.empty()) throw ConfigError(which, "run has no snapshots");
  const FieldSnapshot* best = &run.front();
  for (const FieldSnapshot& s : run)
    if (std::abs(s.time - t) < std::abs(best->time - t)) best = &s;
  if (std::abs(best->time - t) > tol)
    throw ConfigError(which, "no snapshot within " + format_double(tol) + " of t = " + format_double(t));
  return *best;
}

double mass_norm(const SparseMatrix& m, const std::vector<double>& e) { return std::sqrt(std::max(0.0, dot(e, m.multiply(e)))); }

}  // namespace

std::vector<ComparisonEntry> compare_fields(const Mesh& mesh_a, std::span<const FieldSnapshot> run_a,
                                            const Mesh& mesh_b, std::span<const FieldSnapshot> run_b,
                                            std::span<const double> times, const std::string& label,
                                            double time_tol) {
  std::optional<Prolongation> prolong;
  if (!(mesh_a == mesh_b)) prolong.emplace(mesh_a, mesh_b);
  const SparseMatrix mb = bulk_mass(mesh_b, MassKind::Consistent);
  const SparseMatrix sb = surface_mass(mesh_b, MassKind::Consistent);

  std::vector<ComparisonEntry> out;
  for (double t : times) {
    const FieldSnapshot& a = nearest(run_a, t, time_tol, "run_a");
    const FieldSnapshot& b = nearest(run_b, t, time_tol, "run_b");
    if (a.u.size() != mesh_a.num_vertices() || a.w.size() != mesh_a.num_surface_nodes() ||
        b.u.size() != mesh_b.num_vertices() || b.w.size() != mesh_b.num_surface_nodes())
      throw Error("compare_fields: snapshot does not match its mesh");
    std::vector<double> ua = prolong ? prolong->bulk(a.u) : a.u;
    std::vector<double> wa = prolong ? prolong->surface(a.w) : a.w;

    ComparisonEntry e;
    e.label = label;
    e.time = t;
    e.overlap_a = overlap_functional(mesh_a, a.u, a.w);
    e.overlap_b = overlap_functional(mesh_b, b.u, b.w);
    for (std::size_t i = 0; i < ua.size(); ++i) ua[i] -= b.u[i];
    for (std::size_t i = 0; i < wa.size(); ++i) wa[i] -= b.w[i];
    e.l2_omega_u = mass_norm(mb, ua);
    e.l2_gamma_u = mass_norm(sb, restrict_to_surface(mesh_b, ua));
    e.l2_gamma_w = mass_norm(sb, wa);
    out.push_back(std::move(e));
  }
  return out;
}

std::string comparison_csv(std::span<const ComparisonEntry> entries) {
  std::string out = "label,time,l2_omega_u,l2_gamma_u,l2_gamma_w,overlap_a,overlap_b\n";
  for (const auto& e : entries)
    out += e.label + ',' + format_double(e.time) + ',' + format_double(e.l2_omega_u) + ',' +
           format_double(e.l2_gamma_u) + ',' + format_double(e.l2_gamma_w) + ',' + format_double(e.overlap_a) + ',' +
           format_double(e.overlap_b) + '\n';
  return out;
}

std::string summary_csv(std::span<const SweepSummary> summaries) {
  std::string out =
      "label,epsilon,tau,steps,overlap_integral,overlap_bound,reaction_identity_error,minU,maxU,minW,maxW\n";
  for (const auto& s : summaries)
    out += s.label + ',' + format_double(s.epsilon) + ',' + format_double(s.tau) + ',' + std::to_string(s.steps) +
           ',' + format_double(s.overlap_integral) + ',' + format_double(s.overlap_bound) + ',' +
           format_double(s.reaction_identity_error) + ',' + format_double(s.min_u) + ',' + format_double(s.max_u) +
           ',' + format_double(s.min_w) + ',' + format_double(s.max_w) + '\n';
  return out;
}

}  // namespace bsfree
