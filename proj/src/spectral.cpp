#include "lcfn/spectral.hpp"

#include <cmath>
#include <stdexcept>

namespace lcfn::spectral {

std::pair<int, int> cutoff_counts(double f, int m, int n) {
  if (!(f > 0.0) || f > 1.0) {
    throw std::invalid_argument("cutoff ratio must be in (0, 1]");
  }
  if (m < 1 || n < 1) {
    throw std::invalid_argument("cutoff_counts: dimensions must be positive");
  }
  const int phi = std::max(1, static_cast<int>(std::ceil(f * m)));
  const int psi = std::max(1, static_cast<int>(std::ceil(f * n)));
  return {phi, psi};
}

TruncatedBases truncate_bases(const linalg::SpectralBasis& user_full,
                              const linalg::SpectralBasis& item_full,
                              double f) {
  const auto [phi, psi] =
      cutoff_counts(f, static_cast<int>(user_full.vectors.rows()),
                    static_cast<int>(item_full.vectors.rows()));
  if (phi > user_full.frequencies.size() ||
      psi > item_full.frequencies.size()) {
    throw std::invalid_argument("truncate_bases: basis has too few columns");
  }
  TruncatedBases t;
  t.user_basis.vectors = user_full.vectors.leftCols(phi);
  t.user_basis.frequencies = user_full.frequencies.head(phi);
  t.item_basis.vectors = item_full.vectors.leftCols(psi);
  t.item_basis.frequencies = item_full.frequencies.head(psi);
  t.cutoff_ratio = f;
  return t;
}

Matrix gft_2d(const Matrix& r, const Matrix& user_basis,
              const Matrix& item_basis) {
  if (r.rows() != user_basis.rows() || r.cols() != item_basis.rows()) {
    throw std::invalid_argument("gft_2d: dimension mismatch");
  }
  return user_basis.transpose() * r * item_basis;
}

Matrix igft_2d(const Matrix& r_hat, const Matrix& user_basis,
               const Matrix& item_basis) {
  if (r_hat.rows() != user_basis.cols() || r_hat.cols() != item_basis.cols()) {
    throw std::invalid_argument("igft_2d: dimension mismatch");
  }
  return user_basis * r_hat * item_basis.transpose();
}

Matrix lowpass_conv_2d(const Matrix& r, const TruncatedBases& bases,
                       const SpectralKernel2D& kernel) {
  if (kernel.values.rows() != bases.phi() ||
      kernel.values.cols() != bases.psi()) {
    throw std::invalid_argument("lowpass_conv_2d: kernel shape mismatch");
  }
  Matrix band = gft_2d(r, bases.user_basis.vectors, bases.item_basis.vectors);
  band.array() *= kernel.values.array();
  return igft_2d(band, bases.user_basis.vectors, bases.item_basis.vectors);
}

Matrix lcf_filter(const Matrix& r, const TruncatedBases& bases) {
  return lowpass_conv_2d(r, bases,
                         SpectralKernel2D::ones(bases.phi(), bases.psi()));
}

Matrix lowpass_conv_embedding(const Matrix& x, const Matrix& basis,
                              const Vector& kernel) {
  if (x.rows() != basis.rows() || kernel.size() != basis.cols()) {
    throw std::invalid_argument("lowpass_conv_embedding: shape mismatch");
  }
  Matrix band = basis.transpose() * x;          // band x K
  band.array().colwise() *= kernel.array();     // gain per frequency
  return basis * band;                          // n x K
}

Vector gft_1d(const Vector& signal, const linalg::SpectralBasis& basis) {
  if (signal.size() != basis.vectors.rows()) {
    throw std::invalid_argument("gft_1d: dimension mismatch");
  }
  return basis.vectors.transpose() * signal;
}

Matrix cycle_normalized_laplacian(int n) {
  if (n < 3) {
    throw std::invalid_argument("cycle graph needs at least 3 nodes");
  }
  Matrix l = Matrix::Identity(n, n);
  for (int i = 0; i < n; ++i) {
    const int next = (i + 1) % n;
    l(i, next) -= 0.5;
    l(next, i) -= 0.5;
  }
  return l;
}

}  // namespace lcfn::spectral
