#pragma once

#include <cstdint>
#include <functional>
#include <utility>

#include "lcfn/core.hpp"

namespace lcfn::linalg {

// Symmetric positive semi-definite linear map held as a composition of sparse
// factors. y = A x is evaluated factor by factor; the dense matrix is never
// formed. Symmetry is a caller obligation (checked by tests, not at runtime:
// verifying it would require dim applications).
class SparseSymmetricOperator {
 public:
  using ApplyFn = std::function<void(const Vector&, Vector&)>;

  SparseSymmetricOperator(Index dim, std::int64_t nnz_estimate, ApplyFn apply);

  Index dim() const { return dim_; }

  // Count of stored nonzeros across the factors of the composition. Used by
  // cost accounting and benchmarks; one application is O(nnz_estimate).
  std::int64_t nnz_estimate() const { return nnz_estimate_; }

  Vector apply(const Vector& x) const;

  static SparseSymmetricOperator identity(Index dim);
  static SparseSymmetricOperator zero(Index dim);

  // Wraps a dense symmetric matrix. Test and demo construction path.
  static SparseSymmetricOperator from_dense(Matrix a);

 private:
  Index dim_;
  std::int64_t nnz_estimate_;
  ApplyFn apply_;
};

inline Vector apply_operator(const SparseSymmetricOperator& op, const Vector& x) {
  return op.apply(x);
}

// k orthonormal eigenvectors with their eigenvalues, eigenvalues ascending.
// In graph signal terms the eigenvalues are frequencies: small = smooth.
struct SpectralBasis {
  Matrix vectors;      // dim x k, orthonormal columns
  Vector frequencies;  // length k, ascending
};

// k smallest eigenpairs by Lanczos iteration with full reorthogonalization
// against all retained basis vectors. Deterministic given `seed` (start
// vector and any restart injections are drawn from it). max_iters bounds the
// number of matrix applications; 0 means the default of 50 * k. Residuals
// ||A v - lambda v|| of the returned pairs are all below `tol`, otherwise a
// ConvergenceError carrying the achieved residuals is thrown.
SpectralBasis lanczos_smallest(const SparseSymmetricOperator& op, int k,
                               double tol = 1e-8, int max_iters = 0,
                               std::uint64_t seed = 1);

// Full eigendecomposition of a dense symmetric matrix. Oracle counterpart of
// lanczos_smallest, kept on an independent code path; restricted to
// n <= 2000 so nobody reaches for it at scale.
SpectralBasis dense_symmetric_eig(const Matrix& a);

}  // namespace lcfn::linalg
