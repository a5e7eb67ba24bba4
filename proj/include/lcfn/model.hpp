#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <utility>
#include <vector>

#include "lcfn/spectral.hpp"

namespace lcfn::model {

// One propagation layer: spectral gains for each side plus the shared
// feature transform applied to both sides.
struct LayerParams {
  Vector kernel_user;  // phi
  Vector kernel_item;  // psi
  Matrix transform;    // K x K
};

struct ModelParams {
  Matrix user_embed;  // M x K, layer-0 user embeddings
  Matrix item_embed;  // N x K
  std::vector<LayerParams> layers;

  int layer_count() const { return static_cast<int>(layers.size()); }
  int embed_dim() const { return static_cast<int>(user_embed.cols()); }
};

// Layer-0 embeddings: random normal(0, 0.01^2), or carried over from a
// pretrained plain matrix-factorization model.
struct InitSpec {
  std::optional<std::pair<Matrix, Matrix>> pretrained;
};

// Fresh parameters. Spectral gains start at all-ones (identity filter) and
// transforms at identity plus normal(0, 0.01^2) perturbation. Deterministic
// given seed; draw order is user_embed, item_embed, then each transform
// row-major.
ModelParams init_params(int users, int items, int embed_dim, int layer_count,
                        const spectral::TruncatedBases& bases,
                        std::uint64_t seed, const InitSpec& init = {});

// Per-layer activations kept for prediction and for the backward pass.
// Layer l >= 1 of each side is
//   sigmoid( basis * diag(kernel) * basis^T * previous * transform )
// and `proj` / `conv` hold the two inner intermediates of that product.
struct ForwardCache {
  std::vector<Matrix> user_layers;  // L+1 entries, M x K each
  std::vector<Matrix> item_layers;  // L+1 entries, N x K
  std::vector<Matrix> user_proj;    // L entries, phi x K: basis^T * previous
  std::vector<Matrix> item_proj;    // L entries, psi x K
  std::vector<Matrix> user_conv;    // L entries, M x K: basis * diag(k) * proj
  std::vector<Matrix> item_conv;    // L entries, N x K

  int layer_count() const {
    return static_cast<int>(user_layers.size()) - 1;
  }
};

// Runs all layers. Throws NumericOverflowError naming the first layer that
// produces a non-finite value.
ForwardCache lcfn_forward(const ModelParams& params,
                          const spectral::TruncatedBases& bases);

// Scores are inner products of the layer-wise concatenated embeddings.
Matrix predict_matrix(const ForwardCache& cache);
Vector predict_user(const ForwardCache& cache, int user);

// Concatenated embeddings packed once so per-user scoring is one matvec.
struct Scorer {
  Matrix user_concat;  // M x (L+1)K
  Matrix item_concat;  // N x (L+1)K

  Vector scores(int user) const {
    return item_concat * user_concat.row(user).transpose();
  }
};
Scorer make_scorer(const ForwardCache& cache);

// Checkpoint file: one text header line
//   LCFN1 M N K L phi psi
// followed by raw little-endian doubles, row-major: user_embed, item_embed,
// then per layer kernel_user, kernel_item, transform. Round-trips bit-exactly.
void save_checkpoint(const std::filesystem::path& path,
                     const ModelParams& params);
ModelParams load_checkpoint(const std::filesystem::path& path);

}  // namespace lcfn::model
