#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "lcfn/linalg.hpp"
#include "lcfn/sparse.hpp"

namespace lcfn::hypergraph {

// Deduplicated implicit-feedback log with contiguous integer ids. pairs are
// sorted by (user, item). user_ids/item_ids map index -> external id; the
// construction helpers guarantee every index occurs in at least one pair,
// but split outputs reuse the maps of the parent set and may leave some
// users or items untouched.
struct InteractionSet {
  std::vector<std::pair<int, int>> pairs;
  std::vector<std::string> user_ids;
  std::vector<std::string> item_ids;

  int user_count() const { return static_cast<int>(user_ids.size()); }
  int item_count() const { return static_cast<int>(item_ids.size()); }
};

// Builds a set from raw (user, item) id pairs as parsed from a log file.
// External ids are assigned contiguous indices in lexicographic order, so
// the result does not depend on input order. Duplicates collapse.
InteractionSet make_interaction_set(
    const std::vector<std::pair<std::string, std::string>>& raw);

// Loader path: pairs already carry indices and the id maps are given.
// Validates ranges and deduplicates; does not drop empty users/items.
InteractionSet interaction_set_from_indexed(
    std::vector<std::pair<int, int>> pairs, std::vector<std::string> user_ids,
    std::vector<std::string> item_ids);

// Builds a set from a binary matrix, dropping empty rows and columns.
// kept_users/kept_items record which original indices survived; external
// ids are the originals rendered in decimal.
struct CompactedSet {
  InteractionSet set;
  std::vector<int> kept_users;
  std::vector<int> kept_items;
};
CompactedSet interaction_set_from_matrix(const SparseBinaryMatrix& r);

// Repeatedly removes users with degree < user_core and items with degree <
// item_core until neither rule fires, then reindexes. A core of 0 (or 1)
// keeps everything. Throws EmptyDatasetError if nothing survives.
InteractionSet ncore_filter(const InteractionSet& set, int user_core,
                            int item_core);

SparseBinaryMatrix build_interaction_matrix(const InteractionSet& set);

// One side of the hypergraph: incidence H (nodes x hyperedges), unit edge
// weights, node degrees D and hyperedge degrees. For the user graph H is the
// interaction matrix (items act as hyperedges); for the item graph it is the
// transpose.
struct HypergraphSpec {
  SparseBinaryMatrix incidence;
  Vector node_degrees;
  Vector edge_weights;
  Vector edge_degrees;
};

// Throws DegenerateGraphError (naming the offending indices) if any node or
// hyperedge has degree zero.
HypergraphSpec make_hypergraph(SparseBinaryMatrix incidence);

// Normalized hypergraph Laplacian as a factored operator:
//   L = I - D^{-1/2} H W Delta^{-1} H^T D^{-1/2}
// with W = I. Symmetric PSD; the constant-degree direction D^{1/2} 1 has
// frequency 0. One application costs O(nnz(H)).
linalg::SparseSymmetricOperator laplacian_operator(const HypergraphSpec& spec);

// Dense assembly of the same Laplacian. Test gate only; refuses dim > 2000.
Matrix laplacian_dense(const HypergraphSpec& spec);

// User-side and item-side Laplacians of an interaction matrix.
std::pair<linalg::SparseSymmetricOperator, linalg::SparseSymmetricOperator>
user_item_laplacians(const SparseBinaryMatrix& r);

}  // namespace lcfn::hypergraph
