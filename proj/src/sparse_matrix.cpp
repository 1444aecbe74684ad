#include "sparse_matrix.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>

#include "error.hpp"

namespace bsfree {

SparseMatrix::SparseMatrix(std::size_t rows, std::size_t cols, std::vector<Index> row_ptr,
                           std::vector<Index> col_idx, std::vector<double> values, bool symmetric)
    : rows_(rows),
      cols_(cols),
      row_ptr_(std::move(row_ptr)),
      col_idx_(std::move(col_idx)),
      values_(std::move(values)),
      symmetric_(symmetric) {
  if (row_ptr_.size() != rows_ + 1 || row_ptr_.back() != col_idx_.size() || col_idx_.size() != values_.size())
    throw Error("SparseMatrix: inconsistent CSR arrays");
  for (std::size_t i = 0; i < rows_; ++i) {
    for (Index k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k) {
      if (col_idx_[k] >= cols_) throw Error("SparseMatrix: column index out of range");
      if (k > row_ptr_[i] && col_idx_[k] <= col_idx_[k - 1])
        throw Error("SparseMatrix: columns must be sorted and unique per row");
    }
  }
  if (symmetric_ && !is_symmetric(1e-14)) throw Error("SparseMatrix: flagged symmetric but A != A^T");
}

SparseMatrix SparseMatrix::from_triplets(std::size_t rows, std::size_t cols, std::vector<Triplet> triplets,
                                         bool symmetric) {
  std::stable_sort(triplets.begin(), triplets.end(), [](const Triplet& a, const Triplet& b) {
    return a.row != b.row ? a.row < b.row : a.col < b.col;
  });
  std::vector<Index> row_ptr(rows + 1, 0);
  std::vector<Index> col_idx;
  std::vector<double> values;
  col_idx.reserve(triplets.size());
  values.reserve(triplets.size());
  for (std::size_t k = 0; k < triplets.size(); ++k) {
    const Triplet& t = triplets[k];
    if (t.row >= rows || t.col >= cols) throw Error("SparseMatrix: triplet out of range");
    if (k > 0 && triplets[k - 1].row == t.row && triplets[k - 1].col == t.col) {
      values.back() += t.value;
    } else {
      col_idx.push_back(t.col);
      values.push_back(t.value);
      ++row_ptr[t.row + 1];
    }
  }
  std::partial_sum(row_ptr.begin(), row_ptr.end(), row_ptr.begin());
  return SparseMatrix(rows, cols, std::move(row_ptr), std::move(col_idx), std::move(values), symmetric);
}

SparseMatrix SparseMatrix::identity(std::size_t n) {
  std::vector<double> ones(n, 1.0);
  return diagonal_matrix(ones);
}

SparseMatrix SparseMatrix::diagonal_matrix(std::span<const double> diag) {
  const std::size_t n = diag.size();
  std::vector<Index> row_ptr(n + 1), col_idx(n);
  std::iota(row_ptr.begin(), row_ptr.end(), Index{0});
  std::iota(col_idx.begin(), col_idx.end(), Index{0});
  return SparseMatrix(n, n, std::move(row_ptr), std::move(col_idx), std::vector<double>(diag.begin(), diag.end()),
                      true);
}

double SparseMatrix::at(Index i, Index j) const {
  auto first = col_idx_.begin() + static_cast<std::ptrdiff_t>(row_ptr_[i]);
  auto last = col_idx_.begin() + static_cast<std::ptrdiff_t>(row_ptr_[i + 1]);
  auto it = std::lower_bound(first, last, j);
  if (it == last || *it != j) return 0.0;
  return values_[static_cast<std::size_t>(it - col_idx_.begin())];
}

void SparseMatrix::multiply(std::span<const double> x, std::span<double> y) const {
  for (std::size_t i = 0; i < rows_; ++i) {
    double s = 0.0;
    for (Index k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k) s += values_[k] * x[col_idx_[k]];
    y[i] = s;
  }
}

std::vector<double> SparseMatrix::multiply(std::span<const double> x) const {
  std::vector<double> y(rows_);
  multiply(x, y);
  return y;
}

std::vector<double> SparseMatrix::multiply_transpose(std::span<const double> x) const {
  std::vector<double> y(cols_, 0.0);
  for (std::size_t i = 0; i < rows_; ++i)
    for (Index k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k) y[col_idx_[k]] += values_[k] * x[i];
  return y;
}

SparseMatrix SparseMatrix::transpose() const {
  std::vector<Triplet> t;
  t.reserve(nnz());
  for (std::size_t i = 0; i < rows_; ++i)
    for (Index k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k) t.push_back({col_idx_[k], i, values_[k]});
  return from_triplets(cols_, rows_, std::move(t), symmetric_);
}

std::vector<double> SparseMatrix::diagonal() const {
  std::vector<double> d(std::min(rows_, cols_), 0.0);
  for (std::size_t i = 0; i < d.size(); ++i) d[i] = at(i, i);
  return d;
}

std::vector<double> SparseMatrix::row_sums() const {
  std::vector<double> s(rows_, 0.0);
  for (std::size_t i = 0; i < rows_; ++i)
    for (Index k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k) s[i] += values_[k];
  return s;
}

std::vector<double> SparseMatrix::column_sums() const {
  std::vector<double> ones(rows_, 1.0);
  return multiply_transpose(ones);
}

bool SparseMatrix::is_symmetric(double tol) const {
  if (rows_ != cols_) return false;
  for (std::size_t i = 0; i < rows_; ++i)
    for (Index k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k)
      if (std::abs(values_[k] - at(col_idx_[k], i)) > tol) return false;
  return true;
}

SparseMatrix SparseMatrix::combine(double a, const SparseMatrix& A, double b, const SparseMatrix& B) {
  if (A.rows_ != B.rows_ || A.cols_ != B.cols_) throw Error("SparseMatrix::combine: shape mismatch");
  std::vector<Index> row_ptr(A.rows_ + 1, 0);
  std::vector<Index> col_idx;
  std::vector<double> values;
  for (std::size_t i = 0; i < A.rows_; ++i) {
    Index ka = A.row_ptr_[i], kb = B.row_ptr_[i];
    const Index ea = A.row_ptr_[i + 1], eb = B.row_ptr_[i + 1];
    while (ka < ea || kb < eb) {
      if (kb >= eb || (ka < ea && A.col_idx_[ka] < B.col_idx_[kb])) {
        col_idx.push_back(A.col_idx_[ka]);
        values.push_back(a * A.values_[ka++]);
      } else if (ka >= ea || B.col_idx_[kb] < A.col_idx_[ka]) {
        col_idx.push_back(B.col_idx_[kb]);
        values.push_back(b * B.values_[kb++]);
      } else {
        col_idx.push_back(A.col_idx_[ka]);
        values.push_back(a * A.values_[ka++] + b * B.values_[kb++]);
      }
    }
    row_ptr[i + 1] = col_idx.size();
  }
  return SparseMatrix(A.rows_, A.cols_, std::move(row_ptr), std::move(col_idx), std::move(values),
                      A.symmetric_ && B.symmetric_);
}

void SparseMatrix::write_matrix_market(std::ostream& out) const {
  out << "%%MatrixMarket matrix coordinate real general\n";
  out << rows_ << ' ' << cols_ << ' ' << nnz() << '\n';
  out.precision(17);
  for (std::size_t i = 0; i < rows_; ++i)
    for (Index k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k)
      out << i + 1 << ' ' << col_idx_[k] + 1 << ' ' << values_[k] << '\n';
}

void DenseMatrix::multiply(std::span<const double> x, std::span<double> y) const {
  for (std::size_t i = 0; i < rows_; ++i) {
    double s = 0.0;
    const double* r = data_.data() + i * cols_;
    for (std::size_t j = 0; j < cols_; ++j) s += r[j] * x[j];
    y[i] = s;
  }
}

std::vector<double> DenseMatrix::multiply(std::span<const double> x) const {
  std::vector<double> y(rows_);
  multiply(x, y);
  return y;
}

double DenseMatrix::max_asymmetry() const {
  double m = 0.0;
  for (std::size_t i = 0; i < rows_; ++i)
    for (std::size_t j = i + 1; j < cols_; ++j) m = std::max(m, std::abs((*this)(i, j) - (*this)(j, i)));
  return m;
}

DenseMatrix DenseMatrix::from_sparse(const SparseMatrix& a) {
  DenseMatrix d(a.rows(), a.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (Index k = a.row_ptr()[i]; k < a.row_ptr()[i + 1]; ++k) d(i, a.col_idx()[k]) = a.values()[k];
  return d;
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

double max_abs(std::span<const double> a) {
  double m = 0.0;
  for (double v : a) m = std::max(m, std::abs(v));
  return m;
}

}  // namespace bsfree
