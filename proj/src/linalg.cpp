#include "lcfn/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "lcfn/errors.hpp"
#include "lcfn/rng.hpp"

namespace lcfn::linalg {

namespace {

constexpr double kZeroClampFloor = -1e-10;
constexpr double kTieGap = 1e-9;

// Shared post-processing for both eigensolver routes, so their outputs are
// directly comparable:
//  * eigenvalues in [-1e-10, 0) are rounding noise on a PSD spectrum -> 0
//  * each vector's sign is fixed: its largest-magnitude entry (lowest index
//    on magnitude ties) is made positive
//  * pairs are sorted by eigenvalue; near-equal eigenvalues (gap <= kTieGap)
//    are ordered by the value of each vector's first nonzero component
void canonicalize(Matrix& vectors, Vector& values) {
  const Index k = values.size();
  for (Index i = 0; i < k; ++i) {
    if (values[i] >= kZeroClampFloor && values[i] < 0.0) {
      values[i] = 0.0;
    }
    Index pivot = 0;
    vectors.col(i).cwiseAbs().maxCoeff(&pivot);
    if (vectors(pivot, i) < 0.0) {
      vectors.col(i) = -vectors.col(i);
    }
  }

  std::vector<Index> order(static_cast<std::size_t>(k));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](Index a, Index b) { return values[a] < values[b]; });

  auto first_nonzero = [&](Index col) {
    for (Index r = 0; r < vectors.rows(); ++r) {
      if (std::abs(vectors(r, col)) > 1e-12) {
        return vectors(r, col);
      }
    }
    return 0.0;
  };

  std::size_t lo = 0;
  while (lo < order.size()) {
    std::size_t hi = lo + 1;
    while (hi < order.size() &&
           values[order[hi]] - values[order[hi - 1]] <= kTieGap) {
      ++hi;
    }
    if (hi - lo > 1) {
      std::stable_sort(order.begin() + lo, order.begin() + hi,
                       [&](Index a, Index b) {
                         return first_nonzero(a) < first_nonzero(b);
                       });
    }
    lo = hi;
  }

  Matrix sorted_vectors(vectors.rows(), k);
  Vector sorted_values(k);
  for (Index i = 0; i < k; ++i) {
    sorted_vectors.col(i) = vectors.col(order[static_cast<std::size_t>(i)]);
    sorted_values[i] = values[order[static_cast<std::size_t>(i)]];
  }
  vectors = std::move(sorted_vectors);
  values = std::move(sorted_values);
}

}  // namespace

SparseSymmetricOperator::SparseSymmetricOperator(Index dim,
                                                 std::int64_t nnz_estimate,
                                                 ApplyFn apply)
    : dim_(dim), nnz_estimate_(nnz_estimate), apply_(std::move(apply)) {
  if (dim < 1) {
    throw std::invalid_argument("operator dimension must be positive");
  }
}

Vector SparseSymmetricOperator::apply(const Vector& x) const {
  if (x.size() != dim_) {
    throw std::invalid_argument("operator/vector dimension mismatch");
  }
  Vector y(dim_);
  apply_(x, y);
  return y;
}

SparseSymmetricOperator SparseSymmetricOperator::identity(Index dim) {
  return SparseSymmetricOperator(
      dim, dim, [](const Vector& x, Vector& y) { y = x; });
}

SparseSymmetricOperator SparseSymmetricOperator::zero(Index dim) {
  return SparseSymmetricOperator(
      dim, 0, [](const Vector& x, Vector& y) { y.setZero(x.size()); });
}

SparseSymmetricOperator SparseSymmetricOperator::from_dense(Matrix a) {
  if (a.rows() != a.cols()) {
    throw std::invalid_argument("from_dense: matrix must be square");
  }
  const Index n = a.rows();
  auto m = std::make_shared<Matrix>(std::move(a));
  return SparseSymmetricOperator(
      n, n * n, [m](const Vector& x, Vector& y) { y.noalias() = (*m) * x; });
}

SpectralBasis dense_symmetric_eig(const Matrix& a) {
  if (a.rows() != a.cols()) {
    throw std::invalid_argument("dense_symmetric_eig: matrix must be square");
  }
  if (a.rows() > 2000) {
    throw std::invalid_argument(
        "dense_symmetric_eig: refusing n > 2000; use lanczos_smallest");
  }
  if (!a.allFinite()) {
    throw std::invalid_argument("dense_symmetric_eig: non-finite entries");
  }
  const double scale = std::max(1.0, a.cwiseAbs().maxCoeff());
  if ((a - a.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale) {
    throw std::invalid_argument("dense_symmetric_eig: matrix not symmetric");
  }

  Eigen::SelfAdjointEigenSolver<Matrix> solver(a);
  if (solver.info() != Eigen::Success) {
    throw ConvergenceError("dense_symmetric_eig: solver failed", {});
  }
  SpectralBasis basis;
  basis.vectors = solver.eigenvectors();
  basis.frequencies = solver.eigenvalues();
  canonicalize(basis.vectors, basis.frequencies);
  return basis;
}

SpectralBasis lanczos_smallest(const SparseSymmetricOperator& op, int k,
                               double tol, int max_iters, std::uint64_t seed) {
  const Index n = op.dim();
  if (k < 1 || k > n) {
    throw std::invalid_argument("lanczos_smallest: k out of range");
  }
  if (tol <= 0.0) {
    throw std::invalid_argument("lanczos_smallest: tol must be positive");
  }
  if (max_iters <= 0) {
    max_iters = 50 * k;
  }
  const Index m_max = std::min<Index>(n, max_iters);

  Rng rng(seed);
  Matrix v_basis(n, m_max);
  std::vector<double> alpha;
  std::vector<double> beta;  // beta[j] couples columns j and j+1
  alpha.reserve(static_cast<std::size_t>(m_max));
  beta.reserve(static_cast<std::size_t>(m_max));

  auto random_unit_orthogonal = [&](Index span) {
    // Fresh direction orthogonal to the first `span` columns. Used for the
    // start vector (span = 0) and after an invariant-subspace breakdown.
    for (int attempt = 0; attempt < 100; ++attempt) {
      Vector f(n);
      for (Index i = 0; i < n; ++i) {
        f[i] = rng.normal();
      }
      for (int pass = 0; pass < 2 && span > 0; ++pass) {
        f.noalias() -= v_basis.leftCols(span) *
                       (v_basis.leftCols(span).transpose() * f).eval();
      }
      const double norm = f.norm();
      if (norm > 1e-8) {
        return Vector(f / norm);
      }
    }
    throw ConvergenceError("lanczos_smallest: could not draw a new direction",
                           {});
  };

  v_basis.col(0) = random_unit_orthogonal(0);

  double scale_estimate = 1.0;
  Index next_check = std::min<Index>(m_max, k + std::max<Index>(10, k / 2));
  Vector prev_ritz;
  const double stabilization_tol = std::max(1e-3 * tol, 1e-14);

  // Outputs of the expensive verification step.
  Matrix out_vectors;
  Vector out_values;
  std::vector<double> achieved_residuals;
  bool converged = false;

  auto verify = [&](Index m) {
    // Full eigensolve of the projected tridiagonal block, then true residual
    // norms of the k smallest Ritz pairs against the operator itself.
    Eigen::VectorXd diag =
        Eigen::Map<const Eigen::VectorXd>(alpha.data(), static_cast<Index>(m));
    Eigen::VectorXd sub(m - 1);
    for (Index i = 0; i + 1 < m; ++i) {
      sub[i] = beta[static_cast<std::size_t>(i)];
    }
    Eigen::SelfAdjointEigenSolver<Matrix> solver;
    solver.computeFromTridiagonal(diag, sub, Eigen::ComputeEigenvectors);
    if (solver.info() != Eigen::Success) {
      return false;
    }
    Matrix ritz_vectors =
        v_basis.leftCols(m) * solver.eigenvectors().leftCols(k);
    Vector ritz_values = solver.eigenvalues().head(k);
    achieved_residuals.assign(static_cast<std::size_t>(k), 0.0);
    bool ok = true;
    for (int i = 0; i < k; ++i) {
      const Vector residual =
          op.apply(ritz_vectors.col(i)) - ritz_values[i] * ritz_vectors.col(i);
      achieved_residuals[static_cast<std::size_t>(i)] = residual.norm();
      ok = ok && achieved_residuals[static_cast<std::size_t>(i)] < tol;
    }
    if (ok) {
      out_vectors = std::move(ritz_vectors);
      out_values = std::move(ritz_values);
    }
    return ok;
  };

  for (Index m = 1; m <= m_max && !converged; ++m) {
    Vector w = op.apply(v_basis.col(m - 1));
    const double a = v_basis.col(m - 1).dot(w);
    alpha.push_back(a);
    scale_estimate = std::max(scale_estimate, std::abs(a));

    w.noalias() -= a * v_basis.col(m - 1);
    if (m >= 2 && beta[static_cast<std::size_t>(m - 2)] != 0.0) {
      w.noalias() -= beta[static_cast<std::size_t>(m - 2)] * v_basis.col(m - 2);
    }
    // Full reorthogonalization against every retained vector, two passes.
    for (int pass = 0; pass < 2; ++pass) {
      w.noalias() -= v_basis.leftCols(m) *
                     (v_basis.leftCols(m).transpose() * w).eval();
    }
    const double b = w.norm();
    const bool breakdown = b <= 1e-12 * scale_estimate;
    if (!breakdown) {
      scale_estimate = std::max(scale_estimate, b);
    }

    if (m < m_max) {
      if (breakdown) {
        // Exact invariant subspace found. For a symmetric operator its
        // orthogonal complement is invariant too, so continuing from a fresh
        // orthogonal direction keeps the projected matrix tridiagonal.
        beta.push_back(0.0);
        v_basis.col(m) = random_unit_orthogonal(m);
      } else {
        beta.push_back(b);
        v_basis.col(m) = w / b;
      }
    } else {
      beta.push_back(breakdown ? 0.0 : b);
    }

    if (m >= k && (m == next_check || m == m_max)) {
      next_check = std::min<Index>(
          m_max, std::max<Index>(m + 1, static_cast<Index>(m * 1.4)));
      // Cheap eigenvalues-only pass first; the full verification with Ritz
      // vectors only runs once the k target eigenvalues stop moving.
      Eigen::VectorXd diag = Eigen::Map<const Eigen::VectorXd>(
          alpha.data(), static_cast<Index>(m));
      Eigen::VectorXd sub(std::max<Index>(m - 1, 0));
      for (Index i = 0; i + 1 < m; ++i) {
        sub[i] = beta[static_cast<std::size_t>(i)];
      }
      Eigen::SelfAdjointEigenSolver<Matrix> solver;
      solver.computeFromTridiagonal(diag, sub, Eigen::EigenvaluesOnly);
      Vector ritz = solver.eigenvalues().head(k);
      const bool stabilized =
          prev_ritz.size() == k &&
          (ritz - prev_ritz).cwiseAbs().maxCoeff() < stabilization_tol;
      prev_ritz = ritz;
      if (stabilized || m == m_max) {
        converged = verify(m);
      }
    }
  }

  if (!converged) {
    throw ConvergenceError(
        "lanczos_smallest: residual bound not reached within max_iters",
        achieved_residuals);
  }

  SpectralBasis basis;
  basis.vectors = std::move(out_vectors);
  basis.frequencies = std::move(out_values);
  canonicalize(basis.vectors, basis.frequencies);
  return basis;
}

}  // namespace lcfn::linalg
