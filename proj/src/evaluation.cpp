#include "lcfn/evaluation.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <thread>
#include <unordered_set>

#include "lcfn/errors.hpp"
#include "lcfn/rng.hpp"

namespace lcfn::evaluation {

SplitData split(const hypergraph::InteractionSet& set,
                const std::array<double, 3>& ratios, std::uint64_t seed) {
  for (double r : ratios) {
    if (!(r > 0.0)) {
      throw std::invalid_argument("split ratios must be positive");
    }
  }
  if (std::abs(ratios[0] + ratios[1] + ratios[2] - 1.0) > 1e-9) {
    throw std::invalid_argument("split ratios must sum to 1");
  }
  if (set.pairs.empty()) {
    throw EmptyDatasetError("cannot split an empty interaction set");
  }

  const std::size_t count = set.pairs.size();
  std::vector<std::size_t> order(count);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng = Rng::substream(seed, "split");
  rng.shuffle(order);

  std::size_t n_train = static_cast<std::size_t>(
      std::llround(ratios[0] * static_cast<double>(count)));
  std::size_t n_val = static_cast<std::size_t>(
      std::llround(ratios[1] * static_cast<double>(count)));
  n_train = std::min(n_train, count);
  n_val = std::min(n_val, count - n_train);

  // 0 = train, 1 = validation, 2 = test
  std::vector<int> assign(count, 2);
  for (std::size_t i = 0; i < n_train; ++i) {
    assign[order[i]] = 0;
  }
  for (std::size_t i = n_train; i < n_train + n_val; ++i) {
    assign[order[i]] = 1;
  }

  // Repair: every user and item must keep at least one training pair, or
  // the training graph would be degenerate. Scan ascending so the move is
  // deterministic; pulling pairs into train can never break another user.
  std::vector<std::vector<std::size_t>> by_user(
      static_cast<std::size_t>(set.user_count()));
  std::vector<std::vector<std::size_t>> by_item(
      static_cast<std::size_t>(set.item_count()));
  for (std::size_t p = 0; p < count; ++p) {
    by_user[static_cast<std::size_t>(set.pairs[p].first)].push_back(p);
    by_item[static_cast<std::size_t>(set.pairs[p].second)].push_back(p);
  }
  auto repair = [&](const std::vector<std::vector<std::size_t>>& groups) {
    for (const auto& group : groups) {
      bool covered = false;
      for (std::size_t p : group) {
        covered = covered || assign[p] == 0;
      }
      if (!covered) {
        assign[group.front()] = 0;  // pairs are sorted, so this is the
                                    // smallest (user, item) of the group
      }
    }
  };
  repair(by_user);
  repair(by_item);

  SplitData out;
  out.seed = seed;
  out.ratios = ratios;
  auto part = [&](int which) {
    hypergraph::InteractionSet s;
    s.user_ids = set.user_ids;
    s.item_ids = set.item_ids;
    for (std::size_t p = 0; p < count; ++p) {
      if (assign[p] == which) {
        s.pairs.push_back(set.pairs[p]);
      }
    }
    return s;
  };
  out.train = part(0);
  out.validation = part(1);
  out.test = part(2);
  if (out.validation.pairs.empty() || out.test.pairs.empty()) {
    throw SplitError(
        "dataset too small: validation or test empty after repair");
  }
  return out;
}

SyntheticData generate_synthetic(const SyntheticConfig& cfg) {
  if (cfg.users < 1 || cfg.items < 1) {
    throw std::invalid_argument("synthetic: dimensions must be positive");
  }
  if (cfg.communities < 1 ||
      cfg.communities > std::min(cfg.users, cfg.items)) {
    throw std::invalid_argument("synthetic: bad community count");
  }
  auto in_unit = [](double v) { return v >= 0.0 && v <= 1.0; };
  if (!in_unit(cfg.in_block_mean) || !in_unit(cfg.out_block_mean) ||
      !in_unit(cfg.rating_spread) || !in_unit(cfg.exposure_rate) ||
      !in_unit(cfg.quantize_threshold)) {
    throw std::invalid_argument("synthetic: rates must lie in [0, 1]");
  }
  if (cfg.quantize_noise < 0.0) {
    throw std::invalid_argument("synthetic: quantize_noise must be >= 0");
  }

  SyntheticData data;
  data.r0.resize(cfg.users, cfg.items);
  const int c = cfg.communities;
  auto user_block = [&](int u) {
    return static_cast<int>(static_cast<std::int64_t>(u) * c / cfg.users);
  };
  auto item_block = [&](int i) {
    return static_cast<int>(static_cast<std::int64_t>(i) * c / cfg.items);
  };

  for (int attempt = 0; attempt < 5; ++attempt) {
    Rng rng = Rng::substream(cfg.seed, "synthetic",
                             static_cast<std::uint64_t>(attempt));
    std::vector<double> strength(cfg.users);
    std::vector<double> appeal(cfg.items);
    for (double& v : strength) {
      v = 1.0 + cfg.rating_spread * (2.0 * rng.uniform() - 1.0);
    }
    for (double& v : appeal) {
      v = 1.0 + cfg.rating_spread * (2.0 * rng.uniform() - 1.0);
    }
    std::vector<std::pair<int, int>> pairs;
    for (int u = 0; u < cfg.users; ++u) {
      for (int i = 0; i < cfg.items; ++i) {
        const double mean = user_block(u) == item_block(i)
                                ? cfg.in_block_mean
                                : cfg.out_block_mean;
        data.r0(u, i) =
            std::clamp(mean * strength[u] * appeal[i], 0.0, 1.0);
        const double jitter = rng.normal(0.0, cfg.quantize_noise);
        const bool exposed = rng.uniform() < cfg.exposure_rate;
        if (exposed && data.r0(u, i) + jitter > cfg.quantize_threshold) {
          pairs.emplace_back(u, i);
        }
      }
    }
    if (!pairs.empty()) {
      data.r = SparseBinaryMatrix::from_pairs(cfg.users, cfg.items,
                                              std::move(pairs));
      return data;
    }
  }
  throw EmptyDatasetError(
      "synthetic observation came out all-zero in 5 attempts");
}

TopK rank_topk(const Vector& scores, const std::vector<int>& exclude, int k) {
  if (k < 1) {
    throw std::invalid_argument("rank_topk: k must be positive");
  }
  std::vector<char> excluded(static_cast<std::size_t>(scores.size()), 0);
  for (int i : exclude) {
    if (i < 0 || i >= scores.size()) {
      throw std::invalid_argument("rank_topk: excluded index out of range");
    }
    excluded[static_cast<std::size_t>(i)] = 1;
  }
  std::vector<int> candidates;
  candidates.reserve(static_cast<std::size_t>(scores.size()));
  for (int i = 0; i < scores.size(); ++i) {
    if (!excluded[static_cast<std::size_t>(i)]) {
      candidates.push_back(i);
    }
  }
  TopK out;
  auto better = [&](int a, int b) {
    if (scores[a] != scores[b]) {
      return scores[a] > scores[b];
    }
    return a < b;
  };
  if (static_cast<std::size_t>(k) >= candidates.size()) {
    std::sort(candidates.begin(), candidates.end(), better);
    out.items = std::move(candidates);
    out.truncated = static_cast<std::size_t>(k) > out.items.size();
    return out;
  }
  std::partial_sort(candidates.begin(), candidates.begin() + k,
                    candidates.end(), better);
  candidates.resize(static_cast<std::size_t>(k));
  out.items = std::move(candidates);
  return out;
}

namespace {

int count_hits(const std::vector<int>& recommended,
               const std::vector<int>& relevant, int k) {
  std::unordered_set<int> rel(relevant.begin(), relevant.end());
  int hits = 0;
  const int limit = std::min<int>(k, static_cast<int>(recommended.size()));
  for (int p = 0; p < limit; ++p) {
    hits += rel.count(recommended[static_cast<std::size_t>(p)]) ? 1 : 0;
  }
  return hits;
}

}  // namespace

double f1_at_k(const std::vector<int>& recommended,
               const std::vector<int>& relevant, int k) {
  if (k < 1) {
    throw std::invalid_argument("f1_at_k: k must be positive");
  }
  if (relevant.empty()) {
    throw std::invalid_argument("f1_at_k: relevant set is empty");
  }
  const int hits = count_hits(recommended, relevant, k);
  if (hits == 0) {
    return 0.0;
  }
  const double precision = static_cast<double>(hits) / k;
  const double recall =
      static_cast<double>(hits) / static_cast<double>(relevant.size());
  return 2.0 * precision * recall / (precision + recall);
}

double ndcg_at_k(const std::vector<int>& recommended,
                 const std::vector<int>& relevant, int k) {
  if (k < 1) {
    throw std::invalid_argument("ndcg_at_k: k must be positive");
  }
  if (relevant.empty()) {
    throw std::invalid_argument("ndcg_at_k: relevant set is empty");
  }
  std::unordered_set<int> rel(relevant.begin(), relevant.end());
  double dcg = 0.0;
  const int limit = std::min<int>(k, static_cast<int>(recommended.size()));
  for (int p = 0; p < limit; ++p) {
    if (rel.count(recommended[static_cast<std::size_t>(p)])) {
      dcg += 1.0 / std::log2(static_cast<double>(p) + 2.0);
    }
  }
  double idcg = 0.0;
  const int ideal = std::min<int>(k, static_cast<int>(relevant.size()));
  for (int p = 0; p < ideal; ++p) {
    idcg += 1.0 / std::log2(static_cast<double>(p) + 2.0);
  }
  return dcg / idcg;
}

MetricsReport evaluate(const ScoreFn& scores, const SplitData& split,
                       Phase phase, const std::vector<int>& ks, int threads) {
  if (ks.empty()) {
    throw std::invalid_argument("evaluate: no cutoffs given");
  }
  for (int k : ks) {
    if (k < 1) {
      throw std::invalid_argument("evaluate: cutoffs must be positive");
    }
  }
  const hypergraph::InteractionSet& phase_set =
      phase == Phase::kValidation ? split.validation : split.test;
  if (phase_set.pairs.empty()) {
    throw EvaluationError("evaluate: phase has no interactions");
  }

  const int users = phase_set.user_count();
  std::vector<std::vector<int>> relevant(static_cast<std::size_t>(users));
  for (const auto& [u, i] : phase_set.pairs) {
    relevant[static_cast<std::size_t>(u)].push_back(i);
  }
  std::vector<std::vector<int>> exclude(static_cast<std::size_t>(users));
  for (const auto& [u, i] : split.train.pairs) {
    exclude[static_cast<std::size_t>(u)].push_back(i);
  }
  if (phase == Phase::kTest) {
    for (const auto& [u, i] : split.validation.pairs) {
      exclude[static_cast<std::size_t>(u)].push_back(i);
    }
  }

  const int k_max = *std::max_element(ks.begin(), ks.end());
  struct UserRow {
    bool included = false;
    std::vector<double> f1;
    std::vector<double> ndcg;
  };
  std::vector<UserRow> rows(static_cast<std::size_t>(users));

  auto score_user = [&](int u) {
    UserRow& row = rows[static_cast<std::size_t>(u)];
    const auto& rel = relevant[static_cast<std::size_t>(u)];
    if (rel.empty()) {
      return;
    }
    row.included = true;
    const TopK top = rank_topk(scores(u), exclude[static_cast<std::size_t>(u)],
                               k_max);
    row.f1.reserve(ks.size());
    row.ndcg.reserve(ks.size());
    for (int k : ks) {
      row.f1.push_back(f1_at_k(top.items, rel, k));
      row.ndcg.push_back(ndcg_at_k(top.items, rel, k));
    }
  };

  if (threads <= 1) {
    for (int u = 0; u < users; ++u) {
      score_user(u);
    }
  } else {
    // Static slicing into per-user slots; the reduction below runs in a
    // fixed order, so thread count does not change the result.
    std::vector<std::thread> pool;
    std::atomic<int> next{0};
    for (int t = 0; t < threads; ++t) {
      pool.emplace_back([&]() {
        for (int u = next.fetch_add(1); u < users; u = next.fetch_add(1)) {
          score_user(u);
        }
      });
    }
    for (auto& th : pool) {
      th.join();
    }
  }

  MetricsReport report;
  report.phase = phase == Phase::kValidation ? "validation" : "test";
  report.ks = ks;
  std::vector<double> f1_sum(ks.size(), 0.0);
  std::vector<double> ndcg_sum(ks.size(), 0.0);
  for (const UserRow& row : rows) {
    if (!row.included) {
      continue;
    }
    report.users_included++;
    for (std::size_t j = 0; j < ks.size(); ++j) {
      f1_sum[j] += row.f1[j];
      ndcg_sum[j] += row.ndcg[j];
    }
  }
  if (report.users_included == 0) {
    throw EvaluationError("evaluate: every user was excluded");
  }
  for (std::size_t j = 0; j < ks.size(); ++j) {
    report.f1[ks[j]] = f1_sum[j] / report.users_included;
    report.ndcg[ks[j]] = ndcg_sum[j] / report.users_included;
  }
  return report;
}

}  // namespace lcfn::evaluation
