#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "mesh.hpp"
#include "sparse_matrix.hpp"
#include "warnings.hpp"

namespace testing {

/// Dense Gaussian elimination with partial pivoting.
inline std::vector<double> dense_solve(std::vector<std::vector<double>> a, std::vector<double> b) {
  const std::size_t n = b.size();
  for (std::size_t k = 0; k < n; ++k) {
    std::size_t piv = k;
    for (std::size_t i = k + 1; i < n; ++i)
      if (std::abs(a[i][k]) > std::abs(a[piv][k])) piv = i;
    if (a[piv][k] == 0.0) throw std::runtime_error("singular");
    std::swap(a[k], a[piv]);
    std::swap(b[k], b[piv]);
    for (std::size_t i = k + 1; i < n; ++i) {
      const double f = a[i][k] / a[k][k];
      for (std::size_t j = k; j < n; ++j) a[i][j] -= f * a[k][j];
      b[i] -= f * b[k];
    }
  }
  std::vector<double> x(n);
  for (std::size_t i = n; i-- > 0;) {
    double s = b[i];
    for (std::size_t j = i + 1; j < n; ++j) s -= a[i][j] * x[j];
    x[i] = s / a[i][i];
  }
  return x;
}

inline std::vector<std::vector<double>> to_dense(const bsfree::SparseMatrix& m) {
  std::vector<std::vector<double>> d(m.rows(), std::vector<double>(m.cols(), 0.0));
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t k = m.row_ptr()[i]; k < m.row_ptr()[i + 1]; ++k) d[i][m.col_idx()[k]] = m.values()[k];
  return d;
}

/// [0,3]^2 unit grid with the middle cell removed; every square is split into
/// two unit right triangles. The hole boundary is the surface.
inline bsfree::Mesh square_ring_mesh() {
  using bsfree::Index;
  std::vector<bsfree::Point> v;
  auto id = [](int i, int j) { return static_cast<Index>(j * 4 + i); };
  for (int j = 0; j < 4; ++j)
    for (int i = 0; i < 4; ++i) v.push_back({double(i), double(j)});
  std::vector<std::array<Index, 3>> tris;
  for (int j = 0; j < 3; ++j)
    for (int i = 0; i < 3; ++i) {
      if (i == 1 && j == 1) continue;
      tris.push_back({id(i, j), id(i + 1, j), id(i + 1, j + 1)});
      tris.push_back({id(i, j), id(i + 1, j + 1), id(i, j + 1)});
    }
  std::vector<bsfree::BoundaryEdge> be;
  const Index hole[4] = {id(1, 1), id(2, 1), id(2, 2), id(1, 2)};
  for (int k = 0; k < 4; ++k) be.push_back({{hole[k], hole[(k + 1) % 4]}, bsfree::BoundaryMarker::InnerSurface});
  const Index outer[12] = {id(0, 0), id(1, 0), id(2, 0), id(3, 0), id(3, 1), id(3, 2),
                           id(3, 3), id(2, 3), id(1, 3), id(0, 3), id(0, 2), id(0, 1)};
  for (int k = 0; k < 12; ++k) be.push_back({{outer[k], outer[(k + 1) % 12]}, bsfree::BoundaryMarker::OuterBoundary});
  return bsfree::Mesh(std::move(v), std::move(tris), std::move(be));
}

/// Annulus r in [1, 2] with n_angular around and n_radial layers.
inline bsfree::Mesh annulus(int n_angular, int n_radial) {
  return bsfree::generate_annulus({1.0, 2.0, n_angular, n_radial, 1.0});
}

inline double max_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

/// Collects library warnings for the lifetime of the object.
struct WarningCapture {
  std::vector<std::string> messages;
  WarningCapture() {
    bsfree::set_warning_handler([this](const std::string& m) { messages.push_back(m); });
  }
  ~WarningCapture() { bsfree::set_warning_handler(nullptr); }
  WarningCapture(const WarningCapture&) = delete;
  WarningCapture& operator=(const WarningCapture&) = delete;
};

}  // namespace testing
