#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <utility>
#include <vector>

#include "lcfn/errors.hpp"
#include "lcfn/hypergraph.hpp"
#include "lcfn/model.hpp"
#include "lcfn/rng.hpp"

using lcfn::Matrix;
using lcfn::NumericOverflowError;
using lcfn::Rng;
using lcfn::Vector;
namespace md = lcfn::model;
namespace sp = lcfn::spectral;

namespace {

sp::TruncatedBases toy_bases(int users, int items, double f,
                             std::uint64_t seed) {
  Rng rng(seed);
  std::vector<std::pair<int, int>> pairs;
  for (int u = 0; u < users; ++u) {
    pairs.emplace_back(u, static_cast<int>(rng.below(items)));
    pairs.emplace_back(u, static_cast<int>(rng.below(items)));
  }
  for (int i = 0; i < items; ++i) {
    pairs.emplace_back(static_cast<int>(rng.below(users)), i);
  }
  const auto r = lcfn::SparseBinaryMatrix::from_pairs(users, items, pairs);
  const auto user_basis = lcfn::linalg::dense_symmetric_eig(
      lcfn::hypergraph::laplacian_dense(lcfn::hypergraph::make_hypergraph(r)));
  const auto item_basis =
      lcfn::linalg::dense_symmetric_eig(lcfn::hypergraph::laplacian_dense(
          lcfn::hypergraph::make_hypergraph(r.transpose())));
  return sp::truncate_bases(user_basis, item_basis, f);
}

struct TempDir {
  std::filesystem::path path;
  TempDir() {
    path = std::filesystem::temp_directory_path() /
           ("lcfn_model_test_" + std::to_string(::getpid()) + "_" +
            std::to_string(counter()++));
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
  static int& counter() {
    static int c = 0;
    return c;
  }
};

}  // namespace

TEST_CASE("init_params is deterministic and shaped correctly") {
  const auto bases = toy_bases(8, 6, 0.5, 1);
  const auto a = md::init_params(8, 6, 4, 2, bases, 42);
  const auto b = md::init_params(8, 6, 4, 2, bases, 42);
  CHECK(a.user_embed == b.user_embed);
  CHECK(a.item_embed == b.item_embed);
  CHECK(a.layers[0].transform == b.layers[0].transform);

  const auto c = md::init_params(8, 6, 4, 2, bases, 43);
  CHECK(a.user_embed != c.user_embed);

  CHECK(a.user_embed.rows() == 8);
  CHECK(a.item_embed.rows() == 6);
  CHECK(a.embed_dim() == 4);
  REQUIRE(a.layer_count() == 2);
  CHECK(a.layers[0].kernel_user == Vector::Ones(bases.phi()));
  CHECK(a.layers[0].kernel_item == Vector::Ones(bases.psi()));
  // Transforms start near the identity.
  CHECK((a.layers[0].transform - Matrix::Identity(4, 4))
            .cwiseAbs()
            .maxCoeff() < 0.1);
  // Embeddings are small.
  CHECK(a.user_embed.cwiseAbs().maxCoeff() < 0.1);
}

TEST_CASE("init_params accepts pretrained embeddings and checks shapes") {
  const auto bases = toy_bases(5, 4, 0.5, 2);
  Matrix u0 = Matrix::Constant(5, 3, 0.25);
  Matrix v0 = Matrix::Constant(4, 3, -0.5);
  md::InitSpec init;
  init.pretrained = {u0, v0};
  const auto params = md::init_params(5, 4, 3, 1, bases, 7, init);
  CHECK(params.user_embed == u0);
  CHECK(params.item_embed == v0);

  init.pretrained = {Matrix::Zero(6, 3), v0};
  CHECK_THROWS_AS((void)md::init_params(5, 4, 3, 1, bases, 7, init),
                  std::invalid_argument);
}

TEST_CASE("zero layers reduces to plain matrix factorization") {
  const auto bases = sp::TruncatedBases{};
  const auto params = md::init_params(6, 5, 3, 0, bases, 11);
  const auto cache = md::lcfn_forward(params, bases);
  CHECK(cache.layer_count() == 0);
  const Matrix scores = md::predict_matrix(cache);
  const Matrix expected = params.user_embed * params.item_embed.transpose();
  CHECK((scores - expected).cwiseAbs().maxCoeff() < 1e-14);
}

// Straight-line recomputation of the whole forward pass with no shared
// helper code: explicit loops for the convolution, transform and sigmoid.
TEST_CASE("forward pass matches an elementwise recomputation") {
  const int m = 7, n = 6, k = 3, layers = 2;
  const auto bases = toy_bases(m, n, 0.6, 3);
  const auto params = md::init_params(m, n, k, layers, bases, 5);
  const auto cache = md::lcfn_forward(params, bases);

  REQUIRE(cache.user_layers.size() == layers + 1);
  CHECK(cache.user_layers[0] == params.user_embed);

  Matrix u_prev = params.user_embed;
  Matrix v_prev = params.item_embed;
  for (int l = 0; l < layers; ++l) {
    const auto& lay = params.layers[static_cast<std::size_t>(l)];
    const auto& p = bases.user_basis.vectors;
    const auto& q = bases.item_basis.vectors;

    auto propagate = [&](const Matrix& prev, const Matrix& basis,
                         const Vector& kernel) {
      const int rows = static_cast<int>(prev.rows());
      Matrix out(rows, k);
      for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < k; ++c) {
          double conv = 0.0;
          for (int a = 0; a < kernel.size(); ++a) {
            double proj = 0.0;
            for (int s = 0; s < rows; ++s) {
              proj += basis(s, a) * prev(s, c);
            }
            conv += basis(r, a) * kernel[a] * proj;
          }
          out(r, c) = conv;
        }
      }
      Matrix transformed(rows, k);
      for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < k; ++c) {
          double acc = 0.0;
          for (int d = 0; d < k; ++d) {
            acc += out(r, d) * lay.transform(d, c);
          }
          transformed(r, c) = 1.0 / (1.0 + std::exp(-acc));
        }
      }
      return transformed;
    };

    const Matrix u_next = propagate(u_prev, p, lay.kernel_user);
    const Matrix v_next = propagate(v_prev, q, lay.kernel_item);
    CHECK((cache.user_layers[static_cast<std::size_t>(l) + 1] - u_next)
              .cwiseAbs()
              .maxCoeff() < 1e-12);
    CHECK((cache.item_layers[static_cast<std::size_t>(l) + 1] - v_next)
              .cwiseAbs()
              .maxCoeff() < 1e-12);
    u_prev = u_next;
    v_prev = v_next;
  }

  // Prediction sums the per-level inner products.
  const Matrix scores = md::predict_matrix(cache);
  Matrix expected = params.user_embed * params.item_embed.transpose();
  expected += cache.user_layers[1] * cache.item_layers[1].transpose();
  expected += cache.user_layers[2] * cache.item_layers[2].transpose();
  CHECK((scores - expected).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("zero kernels give the sigmoid-of-zero plateau") {
  const auto bases = toy_bases(6, 5, 0.5, 4);
  auto params = md::init_params(6, 5, 3, 1, bases, 9);
  params.layers[0].kernel_user.setZero();
  params.layers[0].kernel_item.setZero();
  const auto cache = md::lcfn_forward(params, bases);
  CHECK((cache.user_layers[1].array() - 0.5).abs().maxCoeff() < 1e-15);
  CHECK((cache.item_layers[1].array() - 0.5).abs().maxCoeff() < 1e-15);
}

TEST_CASE("per-user prediction and the scorer agree with the full matrix") {
  const auto bases = toy_bases(9, 7, 0.4, 5);
  const auto params = md::init_params(9, 7, 4, 1, bases, 13);
  const auto cache = md::lcfn_forward(params, bases);
  const Matrix scores = md::predict_matrix(cache);
  const auto scorer = md::make_scorer(cache);
  for (int u = 0; u < 9; ++u) {
    CHECK((md::predict_user(cache, u) - scores.row(u).transpose())
              .cwiseAbs()
              .maxCoeff() < 1e-12);
    CHECK((scorer.scores(u) - scores.row(u).transpose())
              .cwiseAbs()
              .maxCoeff() < 1e-12);
  }
  CHECK_THROWS_AS((void)md::predict_user(cache, 9), std::invalid_argument);
}

TEST_CASE("forward pass reports non-finite values with the layer") {
  const auto bases = toy_bases(6, 5, 0.5, 6);
  auto params = md::init_params(6, 5, 3, 2, bases, 15);
  params.layers[1].transform(0, 0) = std::nan("");
  try {
    (void)md::lcfn_forward(params, bases);
    FAIL("expected NumericOverflowError");
  } catch (const NumericOverflowError& e) {
    CHECK(e.layer() == 2);
  }

  params = md::init_params(6, 5, 3, 2, bases, 15);
  params.user_embed(0, 0) = std::nan("");
  try {
    (void)md::lcfn_forward(params, bases);
    FAIL("expected NumericOverflowError");
  } catch (const NumericOverflowError& e) {
    CHECK(e.layer() == 0);
  }
}

TEST_CASE("checkpoints round-trip bit-exactly") {
  TempDir tmp;
  const auto bases = toy_bases(8, 6, 0.5, 7);
  auto params = md::init_params(8, 6, 4, 2, bases, 21);
  // Perturb so nothing is at its initialization value.
  Rng rng(3);
  params.layers[1].kernel_user[0] = rng.normal();
  params.layers[0].transform(2, 1) = rng.normal();

  const auto path = tmp.path / "model.lcfn";
  md::save_checkpoint(path, params);
  const auto loaded = md::load_checkpoint(path);

  CHECK(loaded.user_embed == params.user_embed);
  CHECK(loaded.item_embed == params.item_embed);
  REQUIRE(loaded.layer_count() == 2);
  for (int l = 0; l < 2; ++l) {
    CHECK(loaded.layers[l].kernel_user == params.layers[l].kernel_user);
    CHECK(loaded.layers[l].kernel_item == params.layers[l].kernel_item);
    CHECK(loaded.layers[l].transform == params.layers[l].transform);
  }

  // Zero-layer model round-trips too.
  const auto mf = md::init_params(5, 4, 3, 0, sp::TruncatedBases{}, 1);
  md::save_checkpoint(tmp.path / "mf.lcfn", mf);
  const auto mf_loaded = md::load_checkpoint(tmp.path / "mf.lcfn");
  CHECK(mf_loaded.user_embed == mf.user_embed);
  CHECK(mf_loaded.layer_count() == 0);
}

TEST_CASE("checkpoint loader rejects damaged files") {
  TempDir tmp;
  const auto params = md::init_params(4, 3, 2, 0, sp::TruncatedBases{}, 2);
  const auto path = tmp.path / "model.lcfn";
  md::save_checkpoint(path, params);

  CHECK_THROWS_AS((void)md::load_checkpoint(tmp.path / "missing.lcfn"),
                  lcfn::CacheError);

  // Truncate the payload.
  const auto size = std::filesystem::file_size(path);
  std::filesystem::resize_file(path, size - 8);
  CHECK_THROWS_AS((void)md::load_checkpoint(path), lcfn::CacheError);

  // Trailing garbage.
  md::save_checkpoint(path, params);
  {
    std::ofstream out(path, std::ios::binary | std::ios::app);
    const double junk = 0.0;
    out.write(reinterpret_cast<const char*>(&junk), sizeof(junk));
  }
  CHECK_THROWS_AS((void)md::load_checkpoint(path), lcfn::CacheError);

  // Wrong magic.
  {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << "WRONG 1 1 1 0 0 0\n";
  }
  CHECK_THROWS_AS((void)md::load_checkpoint(path), lcfn::CacheError);
}
