#include "lcfn/sparse.hpp"

#include <algorithm>
#include <stdexcept>

namespace lcfn {

SparseBinaryMatrix SparseBinaryMatrix::from_pairs(
    int rows, int cols, std::vector<std::pair<int, int>> pairs) {
  if (rows < 0 || cols < 0) {
    throw std::invalid_argument("SparseBinaryMatrix: negative dimension");
  }
  for (const auto& [r, c] : pairs) {
    if (r < 0 || r >= rows || c < 0 || c >= cols) {
      throw std::invalid_argument("SparseBinaryMatrix: pair out of range");
    }
  }
  std::sort(pairs.begin(), pairs.end());
  pairs.erase(std::unique(pairs.begin(), pairs.end()), pairs.end());

  SparseBinaryMatrix m;
  m.rows_ = rows;
  m.cols_ = cols;
  m.row_ptr_.assign(static_cast<std::size_t>(rows) + 1, 0);
  m.col_idx_.reserve(pairs.size());
  for (const auto& [r, c] : pairs) {
    m.row_ptr_[static_cast<std::size_t>(r) + 1]++;
    m.col_idx_.push_back(c);
  }
  for (int i = 0; i < rows; ++i) {
    m.row_ptr_[static_cast<std::size_t>(i) + 1] += m.row_ptr_[i];
  }
  return m;
}

SparseBinaryMatrix SparseBinaryMatrix::transpose() const {
  SparseBinaryMatrix t;
  t.rows_ = cols_;
  t.cols_ = rows_;
  t.row_ptr_.assign(static_cast<std::size_t>(cols_) + 1, 0);
  t.col_idx_.resize(col_idx_.size());
  for (int j : col_idx_) {
    t.row_ptr_[static_cast<std::size_t>(j) + 1]++;
  }
  for (int j = 0; j < cols_; ++j) {
    t.row_ptr_[static_cast<std::size_t>(j) + 1] += t.row_ptr_[j];
  }
  std::vector<std::int64_t> fill(t.row_ptr_.begin(), t.row_ptr_.end() - 1);
  for (int i = 0; i < rows_; ++i) {
    for (int j : row(i)) {
      t.col_idx_[static_cast<std::size_t>(fill[j]++)] = i;
    }
  }
  return t;
}

void SparseBinaryMatrix::multiply(const Vector& x, Vector& out) const {
  out.resize(rows_);
  for (int i = 0; i < rows_; ++i) {
    double acc = 0.0;
    for (int j : row(i)) {
      acc += x[j];
    }
    out[i] = acc;
  }
}

void SparseBinaryMatrix::multiply_transposed(const Vector& x, Vector& out) const {
  out.setZero(cols_);
  for (int i = 0; i < rows_; ++i) {
    const double xi = x[i];
    for (int j : row(i)) {
      out[j] += xi;
    }
  }
}

Vector SparseBinaryMatrix::row_degrees() const {
  Vector d(rows_);
  for (int i = 0; i < rows_; ++i) {
    d[i] = static_cast<double>(row_ptr_[i + 1] - row_ptr_[i]);
  }
  return d;
}

Vector SparseBinaryMatrix::col_degrees() const {
  Vector d = Vector::Zero(cols_);
  for (int j : col_idx_) {
    d[j] += 1.0;
  }
  return d;
}

Matrix SparseBinaryMatrix::to_dense() const {
  Matrix m = Matrix::Zero(rows_, cols_);
  for (int i = 0; i < rows_; ++i) {
    for (int j : row(i)) {
      m(i, j) = 1.0;
    }
  }
  return m;
}

}  // namespace lcfn
