#include "lcfn/hypergraph.hpp"

#include <algorithm>
#include <map>
#include <memory>
#include <stdexcept>

#include "lcfn/errors.hpp"

namespace lcfn::hypergraph {

InteractionSet make_interaction_set(
    const std::vector<std::pair<std::string, std::string>>& raw) {
  if (raw.empty()) {
    throw EmptyDatasetError("interaction set is empty");
  }
  std::map<std::string, int> user_index;
  std::map<std::string, int> item_index;
  for (const auto& [u, i] : raw) {
    user_index.emplace(u, 0);
    item_index.emplace(i, 0);
  }
  InteractionSet set;
  set.user_ids.reserve(user_index.size());
  for (auto& [id, idx] : user_index) {
    idx = static_cast<int>(set.user_ids.size());
    set.user_ids.push_back(id);
  }
  set.item_ids.reserve(item_index.size());
  for (auto& [id, idx] : item_index) {
    idx = static_cast<int>(set.item_ids.size());
    set.item_ids.push_back(id);
  }
  set.pairs.reserve(raw.size());
  for (const auto& [u, i] : raw) {
    set.pairs.emplace_back(user_index[u], item_index[i]);
  }
  std::sort(set.pairs.begin(), set.pairs.end());
  set.pairs.erase(std::unique(set.pairs.begin(), set.pairs.end()),
                  set.pairs.end());
  return set;
}

InteractionSet interaction_set_from_indexed(
    std::vector<std::pair<int, int>> pairs, std::vector<std::string> user_ids,
    std::vector<std::string> item_ids) {
  const int m = static_cast<int>(user_ids.size());
  const int n = static_cast<int>(item_ids.size());
  for (const auto& [u, i] : pairs) {
    if (u < 0 || u >= m || i < 0 || i >= n) {
      throw std::invalid_argument("interaction pair index out of range");
    }
  }
  std::sort(pairs.begin(), pairs.end());
  pairs.erase(std::unique(pairs.begin(), pairs.end()), pairs.end());
  InteractionSet set;
  set.pairs = std::move(pairs);
  set.user_ids = std::move(user_ids);
  set.item_ids = std::move(item_ids);
  return set;
}

CompactedSet interaction_set_from_matrix(const SparseBinaryMatrix& r) {
  std::vector<char> user_seen(static_cast<std::size_t>(r.rows()), 0);
  std::vector<char> item_seen(static_cast<std::size_t>(r.cols()), 0);
  for (int u = 0; u < r.rows(); ++u) {
    for (int i : r.row(u)) {
      user_seen[static_cast<std::size_t>(u)] = 1;
      item_seen[static_cast<std::size_t>(i)] = 1;
    }
  }
  CompactedSet out;
  std::vector<int> user_map(static_cast<std::size_t>(r.rows()), -1);
  std::vector<int> item_map(static_cast<std::size_t>(r.cols()), -1);
  for (int u = 0; u < r.rows(); ++u) {
    if (user_seen[static_cast<std::size_t>(u)]) {
      user_map[static_cast<std::size_t>(u)] =
          static_cast<int>(out.kept_users.size());
      out.kept_users.push_back(u);
      out.set.user_ids.push_back(std::to_string(u));
    }
  }
  for (int i = 0; i < r.cols(); ++i) {
    if (item_seen[static_cast<std::size_t>(i)]) {
      item_map[static_cast<std::size_t>(i)] =
          static_cast<int>(out.kept_items.size());
      out.kept_items.push_back(i);
      out.set.item_ids.push_back(std::to_string(i));
    }
  }
  if (out.kept_users.empty()) {
    throw EmptyDatasetError("interaction matrix has no nonzeros");
  }
  for (int u = 0; u < r.rows(); ++u) {
    for (int i : r.row(u)) {
      out.set.pairs.emplace_back(user_map[static_cast<std::size_t>(u)],
                                 item_map[static_cast<std::size_t>(i)]);
    }
  }
  std::sort(out.set.pairs.begin(), out.set.pairs.end());
  return out;
}

InteractionSet ncore_filter(const InteractionSet& set, int user_core,
                            int item_core) {
  if (user_core < 0 || item_core < 0) {
    throw std::invalid_argument("core thresholds must be non-negative");
  }
  std::vector<char> user_alive(static_cast<std::size_t>(set.user_count()), 1);
  std::vector<char> item_alive(static_cast<std::size_t>(set.item_count()), 1);

  // Fixed-point loop: one sweep recounts degrees over surviving pairs and
  // drops everything below threshold; repeat until a sweep changes nothing.
  bool changed = true;
  while (changed) {
    changed = false;
    std::vector<int> user_deg(static_cast<std::size_t>(set.user_count()), 0);
    std::vector<int> item_deg(static_cast<std::size_t>(set.item_count()), 0);
    for (const auto& [u, i] : set.pairs) {
      if (user_alive[static_cast<std::size_t>(u)] &&
          item_alive[static_cast<std::size_t>(i)]) {
        user_deg[static_cast<std::size_t>(u)]++;
        item_deg[static_cast<std::size_t>(i)]++;
      }
    }
    for (int u = 0; u < set.user_count(); ++u) {
      if (user_alive[static_cast<std::size_t>(u)] &&
          user_deg[static_cast<std::size_t>(u)] < user_core) {
        user_alive[static_cast<std::size_t>(u)] = 0;
        changed = true;
      }
    }
    for (int i = 0; i < set.item_count(); ++i) {
      if (item_alive[static_cast<std::size_t>(i)] &&
          item_deg[static_cast<std::size_t>(i)] < item_core) {
        item_alive[static_cast<std::size_t>(i)] = 0;
        changed = true;
      }
    }
  }

  // Anything left with degree zero (possible when cores are 0) is dropped in
  // the reindex pass below, since indices must stay contiguous and covered.
  std::vector<int> user_deg(static_cast<std::size_t>(set.user_count()), 0);
  std::vector<int> item_deg(static_cast<std::size_t>(set.item_count()), 0);
  for (const auto& [u, i] : set.pairs) {
    if (user_alive[static_cast<std::size_t>(u)] &&
        item_alive[static_cast<std::size_t>(i)]) {
      user_deg[static_cast<std::size_t>(u)]++;
      item_deg[static_cast<std::size_t>(i)]++;
    }
  }

  InteractionSet out;
  std::vector<int> user_map(static_cast<std::size_t>(set.user_count()), -1);
  std::vector<int> item_map(static_cast<std::size_t>(set.item_count()), -1);
  for (int u = 0; u < set.user_count(); ++u) {
    if (user_alive[static_cast<std::size_t>(u)] &&
        user_deg[static_cast<std::size_t>(u)] > 0) {
      user_map[static_cast<std::size_t>(u)] =
          static_cast<int>(out.user_ids.size());
      out.user_ids.push_back(set.user_ids[static_cast<std::size_t>(u)]);
    }
  }
  for (int i = 0; i < set.item_count(); ++i) {
    if (item_alive[static_cast<std::size_t>(i)] &&
        item_deg[static_cast<std::size_t>(i)] > 0) {
      item_map[static_cast<std::size_t>(i)] =
          static_cast<int>(out.item_ids.size());
      out.item_ids.push_back(set.item_ids[static_cast<std::size_t>(i)]);
    }
  }
  if (out.user_ids.empty() || out.item_ids.empty()) {
    throw EmptyDatasetError("core filter removed every interaction");
  }
  for (const auto& [u, i] : set.pairs) {
    const int mu = user_map[static_cast<std::size_t>(u)];
    const int mi = item_map[static_cast<std::size_t>(i)];
    if (mu >= 0 && mi >= 0) {
      out.pairs.emplace_back(mu, mi);
    }
  }
  return out;
}

SparseBinaryMatrix build_interaction_matrix(const InteractionSet& set) {
  return SparseBinaryMatrix::from_pairs(set.user_count(), set.item_count(),
                                        set.pairs);
}

HypergraphSpec make_hypergraph(SparseBinaryMatrix incidence) {
  HypergraphSpec spec;
  spec.node_degrees = incidence.row_degrees();
  spec.edge_degrees = incidence.col_degrees();
  spec.edge_weights = Vector::Ones(incidence.cols());

  std::vector<int> dead_nodes;
  for (int i = 0; i < incidence.rows(); ++i) {
    if (spec.node_degrees[i] == 0.0) {
      dead_nodes.push_back(i);
    }
  }
  if (!dead_nodes.empty()) {
    throw DegenerateGraphError("hypergraph has zero-degree nodes", dead_nodes);
  }
  std::vector<int> dead_edges;
  for (int j = 0; j < incidence.cols(); ++j) {
    if (spec.edge_degrees[j] == 0.0) {
      dead_edges.push_back(j);
    }
  }
  if (!dead_edges.empty()) {
    throw DegenerateGraphError("hypergraph has empty hyperedges", dead_edges);
  }
  spec.incidence = std::move(incidence);
  return spec;
}

linalg::SparseSymmetricOperator laplacian_operator(const HypergraphSpec& spec) {
  struct Factors {
    SparseBinaryMatrix h;
    Vector dinv_sqrt;   // nodes
    Vector edge_scale;  // w / delta, hyperedges
  };
  auto f = std::make_shared<Factors>();
  f->h = spec.incidence;
  f->dinv_sqrt = spec.node_degrees.cwiseSqrt().cwiseInverse();
  f->edge_scale =
      spec.edge_weights.cwiseQuotient(spec.edge_degrees);

  const Index dim = f->h.rows();
  const std::int64_t nnz =
      2 * f->h.nnz() + f->h.rows() + f->h.cols();
  return linalg::SparseSymmetricOperator(
      dim, nnz, [f](const Vector& x, Vector& y) {
        Vector t = f->dinv_sqrt.cwiseProduct(x);
        Vector s;
        f->h.multiply_transposed(t, s);
        s.array() *= f->edge_scale.array();
        f->h.multiply(s, y);
        y.array() *= f->dinv_sqrt.array();
        y = x - y;
      });
}

Matrix laplacian_dense(const HypergraphSpec& spec) {
  const Index dim = spec.incidence.rows();
  if (dim > 2000) {
    throw std::invalid_argument("laplacian_dense: refusing dim > 2000");
  }
  Matrix h = spec.incidence.to_dense();
  Vector dinv_sqrt = spec.node_degrees.cwiseSqrt().cwiseInverse();
  Vector edge_scale = spec.edge_weights.cwiseQuotient(spec.edge_degrees);
  Matrix inner = h * edge_scale.asDiagonal() * h.transpose();
  return Matrix::Identity(dim, dim) -
         dinv_sqrt.asDiagonal() * inner * dinv_sqrt.asDiagonal();
}

std::pair<linalg::SparseSymmetricOperator, linalg::SparseSymmetricOperator>
user_item_laplacians(const SparseBinaryMatrix& r) {
  HypergraphSpec user_side = make_hypergraph(r);
  HypergraphSpec item_side = make_hypergraph(r.transpose());
  return {laplacian_operator(user_side), laplacian_operator(item_side)};
}

}  // namespace lcfn::hypergraph
