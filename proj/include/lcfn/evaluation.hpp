#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "lcfn/hypergraph.hpp"

namespace lcfn::evaluation {

// Train / validation / test partition of one interaction set. The three
// parts share the parent's id maps, so user u means the same person in all
// of them; validation and test may leave some users untouched, train covers
// every user and item (the split repairs itself to guarantee that).
struct SplitData {
  hypergraph::InteractionSet train;
  hypergraph::InteractionSet validation;
  hypergraph::InteractionSet test;
  std::uint64_t seed = 0;
  std::array<double, 3> ratios{0.8, 0.1, 0.1};
};

// Shuffles pairs with the "split" sub-stream of `seed` and cuts them at
// round(ratio * count) boundaries. A repair pass then moves one pair back to
// train for every user or item that lost all of its training interactions.
// Throws SplitError if validation or test ends up empty.
SplitData split(const hypergraph::InteractionSet& set,
                const std::array<double, 3>& ratios, std::uint64_t seed);

// Synthetic implicit-feedback generator. Users and items fall into
// `communities` contiguous blocks and true preferences are rank-1 within
// each block: r0(u, i) = clamp(mean * strength(u) * appeal(i), 0, 1), where
// the mean is in_block_mean on the diagonal blocks and out_block_mean off
// them and both factors are uniform on [1 - rating_spread, 1 + rating_spread].
// Observation drops each entry with probability 1 - exposure_rate, then
// thresholds r0 plus gaussian jitter of stddev quantize_noise at
// quantize_threshold. The jitter makes the binarization residual a real
// noise source: borderline preferences sometimes flip sides of the cut.
struct SyntheticConfig {
  int users = 0;
  int items = 0;
  int communities = 1;
  double in_block_mean = 0.8;
  double out_block_mean = 0.2;
  double rating_spread = 0.25;
  double exposure_rate = 1.0;
  double quantize_noise = 0.2;
  double quantize_threshold = 0.5;
  std::uint64_t seed = 1;
};

struct SyntheticData {
  Matrix r0;             // users x items, true preferences in [0, 1]
  SparseBinaryMatrix r;  // observed binarized interactions
};

// Retries with derived seeds if the observation comes out all-zero; throws
// EmptyDatasetError after 5 attempts.
SyntheticData generate_synthetic(const SyntheticConfig& cfg);

// Top-k by score, descending; score ties broken toward the smaller item
// index. Items in `exclude` never appear. If fewer than k candidates exist,
// everything is returned and `truncated` is set.
struct TopK {
  std::vector<int> items;
  bool truncated = false;
};
TopK rank_topk(const Vector& scores, const std::vector<int>& exclude, int k);

// Precision is hits / k, recall is hits / |relevant|; zero hits gives 0.
// `relevant` must be non-empty (callers exclude such users beforehand).
double f1_at_k(const std::vector<int>& recommended,
               const std::vector<int>& relevant, int k);

// Binary-gain NDCG: DCG sums 1/log2(position + 1) over hit positions
// (1-based); the ideal DCG places min(k, |relevant|) hits on top.
double ndcg_at_k(const std::vector<int>& recommended,
                 const std::vector<int>& relevant, int k);

enum class Phase { kValidation, kTest };

// Averaged ranking quality over all users with at least one relevant item in
// the phase. Candidate items exclude the user's training positives, and at
// test time also the validation positives. seed/config_digest are filled by
// the caller; they ride along into the serialized report.
struct MetricsReport {
  std::string phase;
  std::vector<int> ks;
  std::map<int, double> f1;
  std::map<int, double> ndcg;
  int users_included = 0;
  std::uint64_t seed = 0;
  std::string config_digest;
};

using ScoreFn = std::function<Vector(int user)>;

MetricsReport evaluate(const ScoreFn& scores, const SplitData& split,
                       Phase phase, const std::vector<int>& ks,
                       int threads = 1);

}  // namespace lcfn::evaluation
