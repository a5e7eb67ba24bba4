#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "lcfn/core.hpp"

namespace lcfn {

// Compressed sparse row binary matrix. Only the pattern is stored; every
// stored entry has value 1. This is the interaction / incidence type: rows
// are users (or hypergraph nodes), columns are items (or hyperedges).
class SparseBinaryMatrix {
 public:
  SparseBinaryMatrix() = default;

  // Builds from (row, col) pairs. Pairs are sorted and deduplicated here, so
  // callers may pass them in any order.
  static SparseBinaryMatrix from_pairs(
      int rows, int cols, std::vector<std::pair<int, int>> pairs);

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  std::int64_t nnz() const { return static_cast<std::int64_t>(col_idx_.size()); }

  // Column indices of row i, ascending.
  std::span<const int> row(int i) const {
    return {col_idx_.data() + row_ptr_[i],
            static_cast<std::size_t>(row_ptr_[i + 1] - row_ptr_[i])};
  }

  SparseBinaryMatrix transpose() const;

  // out[i] = sum of x[j] over the stored columns j of row i.
  void multiply(const Vector& x, Vector& out) const;

  // out[j] = sum of x[i] over rows i that store column j.
  void multiply_transposed(const Vector& x, Vector& out) const;

  Vector row_degrees() const;
  Vector col_degrees() const;

  Matrix to_dense() const;

 private:
  int rows_ = 0;
  int cols_ = 0;
  std::vector<std::int64_t> row_ptr_ = {0};
  std::vector<int> col_idx_;
};

}  // namespace lcfn
