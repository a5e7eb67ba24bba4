#include "lcfn/model.hpp"

#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

#include "lcfn/errors.hpp"
#include "lcfn/rng.hpp"

namespace lcfn::model {

namespace {

void fill_normal(Matrix& m, Rng& rng, double stddev) {
  for (Index r = 0; r < m.rows(); ++r) {
    for (Index c = 0; c < m.cols(); ++c) {
      m(r, c) = rng.normal(0.0, stddev);
    }
  }
}

Matrix sigmoid(const Matrix& z) {
  return 1.0 / (1.0 + (-z.array()).exp());
}

}  // namespace

ModelParams init_params(int users, int items, int embed_dim, int layer_count,
                        const spectral::TruncatedBases& bases,
                        std::uint64_t seed, const InitSpec& init) {
  if (users < 1 || items < 1 || embed_dim < 1 || layer_count < 0) {
    throw std::invalid_argument("init_params: bad dimensions");
  }
  if (layer_count > 0 &&
      (bases.user_basis.vectors.rows() != users ||
       bases.item_basis.vectors.rows() != items)) {
    throw std::invalid_argument("init_params: bases do not match dimensions");
  }

  ModelParams params;
  Rng rng = Rng::substream(seed, "init");
  if (init.pretrained.has_value()) {
    const auto& [u0, v0] = *init.pretrained;
    if (u0.rows() != users || u0.cols() != embed_dim || v0.rows() != items ||
        v0.cols() != embed_dim) {
      throw std::invalid_argument(
          "init_params: pretrained embedding shape mismatch");
    }
    params.user_embed = u0;
    params.item_embed = v0;
  } else {
    params.user_embed.resize(users, embed_dim);
    params.item_embed.resize(items, embed_dim);
    fill_normal(params.user_embed, rng, 0.01);
    fill_normal(params.item_embed, rng, 0.01);
  }

  params.layers.resize(static_cast<std::size_t>(layer_count));
  for (auto& layer : params.layers) {
    layer.kernel_user = Vector::Ones(bases.phi());
    layer.kernel_item = Vector::Ones(bases.psi());
    Matrix noise(embed_dim, embed_dim);
    fill_normal(noise, rng, 0.01);
    layer.transform = Matrix::Identity(embed_dim, embed_dim) + noise;
  }
  return params;
}

ForwardCache lcfn_forward(const ModelParams& params,
                          const spectral::TruncatedBases& bases) {
  const int layer_count = params.layer_count();
  ForwardCache cache;
  cache.user_layers.reserve(static_cast<std::size_t>(layer_count) + 1);
  cache.item_layers.reserve(static_cast<std::size_t>(layer_count) + 1);
  cache.user_layers.push_back(params.user_embed);
  cache.item_layers.push_back(params.item_embed);

  if (!params.user_embed.allFinite() || !params.item_embed.allFinite()) {
    throw NumericOverflowError("non-finite embedding at layer 0", 0);
  }

  for (int l = 1; l <= layer_count; ++l) {
    const LayerParams& layer = params.layers[static_cast<std::size_t>(l - 1)];
    const Matrix& p = bases.user_basis.vectors;
    const Matrix& q = bases.item_basis.vectors;

    Matrix user_proj = p.transpose() * cache.user_layers.back();
    Matrix user_conv =
        p * (layer.kernel_user.asDiagonal() * user_proj).eval();
    Matrix user_out = sigmoid(user_conv * layer.transform);

    Matrix item_proj = q.transpose() * cache.item_layers.back();
    Matrix item_conv =
        q * (layer.kernel_item.asDiagonal() * item_proj).eval();
    Matrix item_out = sigmoid(item_conv * layer.transform);

    if (!user_out.allFinite() || !item_out.allFinite()) {
      throw NumericOverflowError(
          "non-finite activation at layer " + std::to_string(l), l);
    }

    cache.user_proj.push_back(std::move(user_proj));
    cache.user_conv.push_back(std::move(user_conv));
    cache.user_layers.push_back(std::move(user_out));
    cache.item_proj.push_back(std::move(item_proj));
    cache.item_conv.push_back(std::move(item_conv));
    cache.item_layers.push_back(std::move(item_out));
  }
  return cache;
}

Matrix predict_matrix(const ForwardCache& cache) {
  const Index m = cache.user_layers.front().rows();
  const Index n = cache.item_layers.front().rows();
  Matrix scores = Matrix::Zero(m, n);
  for (std::size_t l = 0; l < cache.user_layers.size(); ++l) {
    scores.noalias() +=
        cache.user_layers[l] * cache.item_layers[l].transpose();
  }
  return scores;
}

Vector predict_user(const ForwardCache& cache, int user) {
  if (user < 0 || user >= cache.user_layers.front().rows()) {
    throw std::invalid_argument("predict_user: user index out of range");
  }
  const Index n = cache.item_layers.front().rows();
  Vector scores = Vector::Zero(n);
  for (std::size_t l = 0; l < cache.user_layers.size(); ++l) {
    scores.noalias() +=
        cache.item_layers[l] * cache.user_layers[l].row(user).transpose();
  }
  return scores;
}

Scorer make_scorer(const ForwardCache& cache) {
  const int levels = static_cast<int>(cache.user_layers.size());
  const Index k = cache.user_layers.front().cols();
  Scorer s;
  s.user_concat.resize(cache.user_layers.front().rows(), levels * k);
  s.item_concat.resize(cache.item_layers.front().rows(), levels * k);
  for (int l = 0; l < levels; ++l) {
    s.user_concat.middleCols(l * k, k) =
        cache.user_layers[static_cast<std::size_t>(l)];
    s.item_concat.middleCols(l * k, k) =
        cache.item_layers[static_cast<std::size_t>(l)];
  }
  return s;
}

namespace {

void write_block(std::ofstream& out, const Matrix& m) {
  // Row-major on disk; Eigen stores column-major, so stage row by row.
  std::vector<double> row(static_cast<std::size_t>(m.cols()));
  for (Index r = 0; r < m.rows(); ++r) {
    for (Index c = 0; c < m.cols(); ++c) {
      row[static_cast<std::size_t>(c)] = m(r, c);
    }
    out.write(reinterpret_cast<const char*>(row.data()),
              static_cast<std::streamsize>(row.size() * sizeof(double)));
  }
}

void write_block(std::ofstream& out, const Vector& v) {
  out.write(reinterpret_cast<const char*>(v.data()),
            static_cast<std::streamsize>(v.size() * sizeof(double)));
}

void read_block(std::ifstream& in, Matrix& m) {
  std::vector<double> row(static_cast<std::size_t>(m.cols()));
  for (Index r = 0; r < m.rows(); ++r) {
    in.read(reinterpret_cast<char*>(row.data()),
            static_cast<std::streamsize>(row.size() * sizeof(double)));
    for (Index c = 0; c < m.cols(); ++c) {
      m(r, c) = row[static_cast<std::size_t>(c)];
    }
  }
}

void read_block(std::ifstream& in, Vector& v) {
  in.read(reinterpret_cast<char*>(v.data()),
          static_cast<std::streamsize>(v.size() * sizeof(double)));
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path,
                     const ModelParams& params) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw CacheError("cannot open checkpoint for writing: " + path.string());
  }
  const int layer_count = params.layer_count();
  const int phi =
      layer_count > 0 ? static_cast<int>(params.layers[0].kernel_user.size())
                      : 0;
  const int psi =
      layer_count > 0 ? static_cast<int>(params.layers[0].kernel_item.size())
                      : 0;
  out << "LCFN1 " << params.user_embed.rows() << ' '
      << params.item_embed.rows() << ' ' << params.embed_dim() << ' '
      << layer_count << ' ' << phi << ' ' << psi << '\n';
  write_block(out, params.user_embed);
  write_block(out, params.item_embed);
  for (const auto& layer : params.layers) {
    write_block(out, layer.kernel_user);
    write_block(out, layer.kernel_item);
    write_block(out, layer.transform);
  }
  if (!out) {
    throw CacheError("short write on checkpoint: " + path.string());
  }
}

ModelParams load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw CacheError("cannot open checkpoint: " + path.string());
  }
  std::string header;
  std::getline(in, header);
  std::istringstream hs(header);
  std::string magic;
  long m = 0, n = 0, k = 0, l = 0, phi = 0, psi = 0;
  hs >> magic >> m >> n >> k >> l >> phi >> psi;
  if (!hs || magic != "LCFN1" || m < 1 || n < 1 || k < 1 || l < 0) {
    throw CacheError("bad checkpoint header: " + path.string());
  }
  ModelParams params;
  params.user_embed.resize(m, k);
  params.item_embed.resize(n, k);
  read_block(in, params.user_embed);
  read_block(in, params.item_embed);
  params.layers.resize(static_cast<std::size_t>(l));
  for (auto& layer : params.layers) {
    layer.kernel_user.resize(phi);
    layer.kernel_item.resize(psi);
    layer.transform.resize(k, k);
    read_block(in, layer.kernel_user);
    read_block(in, layer.kernel_item);
    read_block(in, layer.transform);
  }
  if (!in) {
    throw CacheError("truncated checkpoint: " + path.string());
  }
  // Exactly at end of payload?
  in.peek();
  if (!in.eof()) {
    throw CacheError("trailing bytes in checkpoint: " + path.string());
  }
  return params;
}

}  // namespace lcfn::model
