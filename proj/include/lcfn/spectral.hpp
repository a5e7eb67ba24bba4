#pragma once

#include <utility>

#include "lcfn/linalg.hpp"

namespace lcfn::spectral {

// Number of retained basis vectors for each side under cutoff ratio f:
// ceil(f * m) users, ceil(f * n) items, at least 1 each. f in (0, 1].
std::pair<int, int> cutoff_counts(double f, int m, int n);

// The lowest-frequency eigenvectors of the user and item Laplacians,
// i.e. the smoothest directions of both graphs.
struct TruncatedBases {
  linalg::SpectralBasis user_basis;  // m x phi
  linalg::SpectralBasis item_basis;  // n x psi
  double cutoff_ratio = 0.0;

  int phi() const { return static_cast<int>(user_basis.frequencies.size()); }
  int psi() const { return static_cast<int>(item_basis.frequencies.size()); }
};

// Keeps the first ceil(f * dim) columns of each full basis.
TruncatedBases truncate_bases(const linalg::SpectralBasis& user_full,
                              const linalg::SpectralBasis& item_full, double f);

// Two-dimensional graph Fourier transform of a rating-like matrix:
// r_hat = P^T r Q, where the bases' columns are graph eigenvectors. With
// full bases this is unitary; with truncated bases it keeps the low band.
Matrix gft_2d(const Matrix& r, const Matrix& user_basis,
              const Matrix& item_basis);

// Inverse transform: P r_hat Q^T.
Matrix igft_2d(const Matrix& r_hat, const Matrix& user_basis,
               const Matrix& item_basis);

// Transfer function on the retained band, one gain per frequency pair.
struct SpectralKernel2D {
  Matrix values;  // phi x psi

  static SpectralKernel2D ones(int phi, int psi) {
    return {Matrix::Ones(phi, psi)};
  }
};

// Low-pass graph convolution: P ((P^T r Q) .* kernel) Q^T. The cost is
// O(phi * psi) on the band plus the two projections; no m x n spectrum is
// formed beyond the band.
Matrix lowpass_conv_2d(const Matrix& r, const TruncatedBases& bases,
                       const SpectralKernel2D& kernel);

// Band-limiting filter: transform, truncate, transform back. Identical to
// lowpass_conv_2d with an all-ones kernel (it delegates to it).
Matrix lcf_filter(const Matrix& r, const TruncatedBases& bases);

// One-sided factored convolution used on embedding matrices:
// basis * diag(kernel) * basis^T * x, evaluated right to left so only
// band x K and n x K intermediates exist. Never forms an n x n matrix.
Matrix lowpass_conv_embedding(const Matrix& x, const Matrix& basis,
                              const Vector& kernel);

// One-dimensional transform of a single graph signal; returns the spectrum.
Vector gft_1d(const Vector& signal, const linalg::SpectralBasis& basis);

// Normalized Laplacian of the n-cycle, I - A/2. Demo graph: its spectrum is
// 1 - cos(2 pi j / n), so pure sinusoids are (pairs of) eigenvectors.
Matrix cycle_normalized_laplacian(int n);

}  // namespace lcfn::spectral
