#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <vector>

#include "mesh.hpp"

namespace bsfree {

struct Triplet {
  Index row;
  Index col;
  double value;
};

/// Compressed sparse row matrix with sorted, unique column indices per row.
class SparseMatrix {
 public:
  SparseMatrix() = default;
  SparseMatrix(std::size_t rows, std::size_t cols, std::vector<Index> row_ptr,
               std::vector<Index> col_idx, std::vector<double> values, bool symmetric);

  /// Duplicate entries are summed in insertion order, so the result does not
  /// depend on anything but the triplet sequence.
  static SparseMatrix from_triplets(std::size_t rows, std::size_t cols, std::vector<Triplet> triplets,
                                    bool symmetric);
  static SparseMatrix identity(std::size_t n);
  static SparseMatrix diagonal_matrix(std::span<const double> diag);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t nnz() const noexcept { return values_.size(); }
  bool symmetric() const noexcept { return symmetric_; }

  const std::vector<Index>& row_ptr() const noexcept { return row_ptr_; }
  const std::vector<Index>& col_idx() const noexcept { return col_idx_; }
  const std::vector<double>& values() const noexcept { return values_; }

  /// Entry (i, j); zero if not stored.
  double at(Index i, Index j) const;

  void multiply(std::span<const double> x, std::span<double> y) const;
  std::vector<double> multiply(std::span<const double> x) const;
  std::vector<double> multiply_transpose(std::span<const double> x) const;

  SparseMatrix transpose() const;
  std::vector<double> diagonal() const;
  std::vector<double> row_sums() const;
  std::vector<double> column_sums() const;

  /// Max |A - A^T| entry is at most `tol` (square matrices only).
  bool is_symmetric(double tol = 1e-14) const;

  /// a*A + b*B over the union sparsity pattern.
  static SparseMatrix combine(double a, const SparseMatrix& A, double b, const SparseMatrix& B);

  void write_matrix_market(std::ostream& out) const;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<Index> row_ptr_{0};
  std::vector<Index> col_idx_;
  std::vector<double> values_;
  bool symmetric_ = false;
};

/// Row-major dense matrix.
class DenseMatrix {
 public:
  DenseMatrix() = default;
  DenseMatrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }
  std::span<const double> row(std::size_t i) const { return {data_.data() + i * cols_, cols_}; }

  void multiply(std::span<const double> x, std::span<double> y) const;
  std::vector<double> multiply(std::span<const double> x) const;
  double max_asymmetry() const;

  static DenseMatrix from_sparse(const SparseMatrix& a);

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

double dot(std::span<const double> a, std::span<const double> b);
double norm2(std::span<const double> a);
double max_abs(std::span<const double> a);

}  // namespace bsfree
