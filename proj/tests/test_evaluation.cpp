#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "lcfn/errors.hpp"
#include "lcfn/evaluation.hpp"
#include "lcfn/rng.hpp"

using lcfn::EmptyDatasetError;
using lcfn::EvaluationError;
using lcfn::Rng;
using lcfn::SplitError;
using lcfn::Vector;
namespace ev = lcfn::evaluation;
namespace hg = lcfn::hypergraph;

namespace {

hg::InteractionSet random_interactions(int users, int items, double density,
                                       std::uint64_t seed) {
  Rng rng(seed);
  std::vector<std::pair<int, int>> pairs;
  for (int u = 0; u < users; ++u) {
    for (int i = 0; i < items; ++i) {
      if (rng.uniform() < density) {
        pairs.emplace_back(u, i);
      }
    }
    pairs.emplace_back(u, static_cast<int>(rng.below(items)));
  }
  for (int i = 0; i < items; ++i) {
    pairs.emplace_back(static_cast<int>(rng.below(users)), i);
  }
  std::vector<std::string> user_ids, item_ids;
  for (int u = 0; u < users; ++u) user_ids.push_back("u" + std::to_string(u));
  for (int i = 0; i < items; ++i) item_ids.push_back("i" + std::to_string(i));
  return hg::interaction_set_from_indexed(std::move(pairs),
                                          std::move(user_ids),
                                          std::move(item_ids));
}

}  // namespace

TEST_CASE("split partitions at the requested fractions") {
  const auto set = random_interactions(40, 30, 0.25, 1);
  const auto count = set.pairs.size();
  const auto split = ev::split(set, {0.8, 0.1, 0.1}, 42);

  CHECK(split.seed == 42);
  CHECK(split.train.pairs.size() + split.validation.pairs.size() +
            split.test.pairs.size() == count);
  // Repair only ever moves pairs into train.
  CHECK(split.train.pairs.size() >=
        static_cast<std::size_t>(std::llround(0.8 * count)));
  CHECK(split.validation.pairs.size() <=
        static_cast<std::size_t>(std::llround(0.1 * count)));
  CHECK(split.test.pairs.size() > 0);

  // The three parts are disjoint and recompose the input exactly.
  std::vector<std::pair<int, int>> all;
  for (const auto* part :
       {&split.train, &split.validation, &split.test}) {
    all.insert(all.end(), part->pairs.begin(), part->pairs.end());
  }
  std::sort(all.begin(), all.end());
  CHECK(all == set.pairs);

  // Id maps are shared.
  CHECK(split.train.user_ids == set.user_ids);
  CHECK(split.test.item_ids == set.item_ids);
}

TEST_CASE("split keeps every user and item in training") {
  for (std::uint64_t seed : {1, 2, 3, 4, 5}) {
    const auto set = random_interactions(30, 25, 0.15, seed + 10);
    const auto split = ev::split(set, {0.8, 0.1, 0.1}, seed);
    std::set<int> users, items;
    for (const auto& [u, i] : split.train.pairs) {
      users.insert(u);
      items.insert(i);
    }
    CHECK(static_cast<int>(users.size()) == set.user_count());
    CHECK(static_cast<int>(items.size()) == set.item_count());
  }
}

TEST_CASE("split is deterministic in the seed") {
  const auto set = random_interactions(25, 20, 0.2, 3);
  const auto a = ev::split(set, {0.8, 0.1, 0.1}, 7);
  const auto b = ev::split(set, {0.8, 0.1, 0.1}, 7);
  CHECK(a.train.pairs == b.train.pairs);
  CHECK(a.validation.pairs == b.validation.pairs);
  CHECK(a.test.pairs == b.test.pairs);
  const auto c = ev::split(set, {0.8, 0.1, 0.1}, 8);
  CHECK(a.validation.pairs != c.validation.pairs);
}

TEST_CASE("split validates ratios and fails loudly on tiny data") {
  const auto set = random_interactions(10, 10, 0.3, 4);
  CHECK_THROWS_AS((void)ev::split(set, {0.8, 0.2, 0.0}, 1),
                  std::invalid_argument);
  CHECK_THROWS_AS((void)ev::split(set, {0.5, 0.2, 0.2}, 1),
                  std::invalid_argument);

  const auto tiny = hg::interaction_set_from_indexed(
      {{0, 0}, {1, 0}, {1, 1}}, {"a", "b"}, {"x", "y"});
  CHECK_THROWS_AS((void)ev::split(tiny, {0.8, 0.1, 0.1}, 1), SplitError);
}

TEST_CASE("synthetic preferences without spread or jitter are block cuts") {
  // rating_spread 0 and quantize_noise 0 collapse the generator to its
  // deterministic core: block-constant preferences, observations on the
  // diagonal blocks at exactly the exposure rate.
  ev::SyntheticConfig cfg;
  cfg.users = 60;
  cfg.items = 50;
  cfg.communities = 2;
  cfg.rating_spread = 0.0;
  cfg.quantize_noise = 0.0;
  cfg.exposure_rate = 0.3;
  cfg.seed = 5;
  const auto data = ev::generate_synthetic(cfg);

  CHECK(data.r0.rows() == 60);
  CHECK(data.r0.cols() == 50);
  // First half of users x first half of items is one block.
  CHECK(data.r0(0, 0) == 0.8);
  CHECK(data.r0(29, 24) == 0.8);
  CHECK(data.r0(0, 25) == 0.2);
  CHECK(data.r0(30, 0) == 0.2);
  CHECK(data.r0(30, 25) == 0.8);

  // Only in-block cells clear the 0.5 threshold, so observations live on
  // the diagonal blocks and appear at the exposure rate.
  std::int64_t in_block = 0;
  for (int u = 0; u < 60; ++u) {
    for (int i : data.r.row(u)) {
      CHECK(data.r0(u, i) == 0.8);
      ++in_block;
    }
  }
  CHECK(in_block == data.r.nnz());
  // 1500 in-block cells at rate 0.3: five sigma is about +-89.
  CHECK(data.r.nnz() > 360);
  CHECK(data.r.nnz() < 540);

  // Deterministic.
  const auto again = ev::generate_synthetic(cfg);
  CHECK(again.r.nnz() == data.r.nnz());
}

TEST_CASE("synthetic preferences are rank-1 blocks with threshold noise") {
  ev::SyntheticConfig cfg;
  cfg.users = 60;
  cfg.items = 50;
  cfg.communities = 2;
  cfg.exposure_rate = 0.3;
  cfg.seed = 5;
  const auto data = ev::generate_synthetic(cfg);

  // Default spread 0.25 puts every preference inside the block envelope
  // mean * [0.75^2, 1.25^2] clamped to [0, 1], and the blocks stay apart.
  auto in_block = [&](int u, int i) { return (u < 30) == (i < 25); };
  double in_min = 1.0, in_max = 0.0, out_min = 1.0, out_max = 0.0;
  for (int u = 0; u < 60; ++u) {
    for (int i = 0; i < 50; ++i) {
      const double v = data.r0(u, i);
      if (in_block(u, i)) {
        in_min = std::min(in_min, v);
        in_max = std::max(in_max, v);
      } else {
        out_min = std::min(out_min, v);
        out_max = std::max(out_max, v);
      }
    }
  }
  CHECK(in_min >= 0.8 * 0.75 * 0.75);
  CHECK(in_max <= 1.0);
  CHECK(out_min >= 0.2 * 0.75 * 0.75);
  CHECK(out_max <= 0.2 * 1.25 * 1.25);
  CHECK(in_min > out_max);    // block separation survives the spread
  CHECK(in_max > in_min + 0.05);  // and the spread is actually there

  // Unclamped cells factor as strength(u) * appeal(i): cross ratios of a
  // 2x2 minor inside one block cancel.
  CHECK(data.r0(0, 0) * data.r0(1, 1) ==
        doctest::Approx(data.r0(0, 1) * data.r0(1, 0)).epsilon(1e-12));
  CHECK(data.r0(40, 30) * data.r0(41, 31) ==
        doctest::Approx(data.r0(40, 31) * data.r0(41, 30)).epsilon(1e-12));

  // The threshold jitter realizes quantization noise in both directions:
  // some out-of-block cells are observed, yet in-block ones dominate.
  std::int64_t in_obs = 0, out_obs = 0;
  for (int u = 0; u < 60; ++u) {
    for (int i : data.r.row(u)) {
      (in_block(u, i) ? in_obs : out_obs) += 1;
    }
  }
  CHECK(in_obs > 0);
  CHECK(out_obs > 0);
  CHECK(in_obs > 4 * out_obs);

  // Observation count matches the closed form
  //   E[nnz] = exposure_rate * sum_cells Phi((r0 - threshold) / noise)
  // within 3 sigma, aggregated over 20 seeds.
  double expected = 0.0, variance = 0.0;
  std::int64_t total = 0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    ev::SyntheticConfig trial = cfg;
    trial.seed = seed;
    const auto draw = ev::generate_synthetic(trial);
    total += draw.r.nnz();
    for (int u = 0; u < 60; ++u) {
      for (int i = 0; i < 50; ++i) {
        const double z = (trial.quantize_threshold - draw.r0(u, i)) /
                         (trial.quantize_noise * std::sqrt(2.0));
        const double q = trial.exposure_rate * 0.5 * std::erfc(z);
        expected += q;
        variance += q * (1.0 - q);
      }
    }
  }
  CHECK(std::abs(total - expected) <= 3.0 * std::sqrt(variance));
}

TEST_CASE("synthetic generation validates and reports dead configs") {
  ev::SyntheticConfig cfg;
  cfg.users = 10;
  cfg.items = 10;
  cfg.communities = 12;
  CHECK_THROWS_AS((void)ev::generate_synthetic(cfg), std::invalid_argument);
  cfg.communities = 2;
  cfg.exposure_rate = 1.5;
  CHECK_THROWS_AS((void)ev::generate_synthetic(cfg), std::invalid_argument);
  cfg.exposure_rate = 0.5;
  cfg.rating_spread = 1.5;
  CHECK_THROWS_AS((void)ev::generate_synthetic(cfg), std::invalid_argument);
  cfg.rating_spread = 0.0;
  cfg.quantize_noise = -0.1;
  CHECK_THROWS_AS((void)ev::generate_synthetic(cfg), std::invalid_argument);
  cfg.quantize_noise = 0.0;
  cfg.quantize_threshold = 0.9;  // nothing exceeds it, every attempt empty
  CHECK_THROWS_AS((void)ev::generate_synthetic(cfg), EmptyDatasetError);
  cfg.quantize_threshold = 0.5;
  cfg.exposure_rate = 0.0;  // nothing survives the exposure mask either
  CHECK_THROWS_AS((void)ev::generate_synthetic(cfg), EmptyDatasetError);
}

TEST_CASE("top-k ranking orders by score then by index") {
  Vector scores(4);
  scores << 0.1, 0.9, 0.5, 0.9;
  const auto top = ev::rank_topk(scores, {}, 3);
  CHECK(top.items == std::vector<int>{1, 3, 2});
  CHECK(!top.truncated);

  const auto masked = ev::rank_topk(scores, {1}, 3);
  CHECK(masked.items == std::vector<int>{3, 2, 0});

  const auto all = ev::rank_topk(scores, {}, 10);
  CHECK(all.items == std::vector<int>{1, 3, 2, 0});
  CHECK(all.truncated);

  CHECK_THROWS_AS((void)ev::rank_topk(scores, {}, 0), std::invalid_argument);
  CHECK_THROWS_AS((void)ev::rank_topk(scores, {4}, 1), std::invalid_argument);
}

TEST_CASE("f1 matches hand-computed values") {
  // Both recommendations hit, half the relevant set found:
  // precision 1, recall 1/2, harmonic mean 2/3.
  CHECK(ev::f1_at_k({5, 7}, {5, 7, 1, 2}, 2) ==
        doctest::Approx(2.0 / 3.0).epsilon(1e-15));
  // Same list judged at k = 3 keeps two hits: precision 2/3, recall 1/2.
  CHECK(ev::f1_at_k({5, 7}, {5, 7, 1, 2}, 3) ==
        doctest::Approx(4.0 / 7.0).epsilon(1e-15));
  CHECK(ev::f1_at_k({9, 8}, {1, 2}, 2) == 0.0);
  CHECK(ev::f1_at_k({1}, {1}, 1) == doctest::Approx(1.0));
  CHECK_THROWS_AS((void)ev::f1_at_k({1}, {}, 1), std::invalid_argument);
  CHECK_THROWS_AS((void)ev::f1_at_k({1}, {1}, 0), std::invalid_argument);
}

TEST_CASE("ndcg matches hand-computed values") {
  // Single relevant item in second place: 1/log2(3) against an ideal of 1.
  CHECK(ev::ndcg_at_k({9, 4}, {4}, 2) ==
        doctest::Approx(0.6309297535714575).epsilon(1e-15));
  // Hits at ranks 1 and 3 of k = 3 against two ideal hits.
  CHECK(ev::ndcg_at_k({1, 2, 3}, {1, 3}, 3) ==
        doctest::Approx(0.9197207891481876).epsilon(1e-14));
  CHECK(ev::ndcg_at_k({4, 9}, {4}, 2) == doctest::Approx(1.0));
  CHECK(ev::ndcg_at_k({9, 8}, {1}, 2) == 0.0);
  CHECK_THROWS_AS((void)ev::ndcg_at_k({1}, {}, 1), std::invalid_argument);
}

TEST_CASE("evaluate excludes seen items per phase") {
  // One user, three items. Training saw item 0, validation holds item 1,
  // test holds item 2. Scores rank 0 > 1 > 2.
  hg::InteractionSet base;
  base.user_ids = {"u"};
  base.item_ids = {"a", "b", "c"};
  ev::SplitData split;
  split.train = base;
  split.train.pairs = {{0, 0}};
  split.validation = base;
  split.validation.pairs = {{0, 1}};
  split.test = base;
  split.test.pairs = {{0, 2}};

  const ev::ScoreFn scores = [](int) {
    Vector s(3);
    s << 3.0, 2.0, 1.0;
    return s;
  };

  const auto val = ev::evaluate(scores, split, ev::Phase::kValidation, {1});
  CHECK(val.phase == "validation");
  CHECK(val.users_included == 1);
  CHECK(val.f1.at(1) == doctest::Approx(1.0));  // item 0 masked, 1 on top

  const auto test = ev::evaluate(scores, split, ev::Phase::kTest, {1});
  CHECK(test.phase == "test");
  // Validation positives are masked too, so item 2 is the top candidate.
  CHECK(test.f1.at(1) == doctest::Approx(1.0));
  CHECK(test.ndcg.at(1) == doctest::Approx(1.0));
}

TEST_CASE("evaluate averages an elementwise reference on random data") {
  const auto set = random_interactions(20, 15, 0.3, 6);
  const auto split = ev::split(set, {0.8, 0.1, 0.1}, 9);

  // Arbitrary but deterministic scores.
  const ev::ScoreFn scores = [](int u) {
    Vector s(15);
    for (int i = 0; i < 15; ++i) {
      s[i] = std::sin(0.7 * u + 1.3 * i) + 0.01 * i;
    }
    return s;
  };
  const std::vector<int> ks = {1, 3, 5};
  const auto report = ev::evaluate(scores, split, ev::Phase::kTest, ks);

  // Independent recomputation with plain loops.
  std::vector<std::vector<int>> relevant(20), excluded(20);
  for (const auto& [u, i] : split.test.pairs) relevant[u].push_back(i);
  for (const auto& [u, i] : split.train.pairs) excluded[u].push_back(i);
  for (const auto& [u, i] : split.validation.pairs) excluded[u].push_back(i);

  int included = 0;
  std::map<int, double> f1_sum, ndcg_sum;
  for (int u = 0; u < 20; ++u) {
    if (relevant[u].empty()) {
      continue;
    }
    ++included;
    const Vector s = scores(u);
    std::vector<int> order;
    for (int i = 0; i < 15; ++i) {
      if (std::find(excluded[u].begin(), excluded[u].end(), i) ==
          excluded[u].end()) {
        order.push_back(i);
      }
    }
    std::sort(order.begin(), order.end(), [&](int a, int b) {
      return s[a] != s[b] ? s[a] > s[b] : a < b;
    });
    for (int k : ks) {
      int hits = 0;
      double dcg = 0.0;
      for (int p = 0; p < k && p < static_cast<int>(order.size()); ++p) {
        const bool hit = std::find(relevant[u].begin(), relevant[u].end(),
                                   order[p]) != relevant[u].end();
        if (hit) {
          ++hits;
          dcg += 1.0 / std::log2(p + 2.0);
        }
      }
      const double precision = static_cast<double>(hits) / k;
      const double recall =
          static_cast<double>(hits) / relevant[u].size();
      f1_sum[k] += hits == 0
                       ? 0.0
                       : 2.0 * precision * recall / (precision + recall);
      double idcg = 0.0;
      const int ideal = std::min<int>(k, static_cast<int>(relevant[u].size()));
      for (int p = 0; p < ideal; ++p) {
        idcg += 1.0 / std::log2(p + 2.0);
      }
      ndcg_sum[k] += dcg / idcg;
    }
  }
  REQUIRE(included == report.users_included);
  for (int k : ks) {
    CHECK(report.f1.at(k) ==
          doctest::Approx(f1_sum[k] / included).epsilon(1e-13));
    CHECK(report.ndcg.at(k) ==
          doctest::Approx(ndcg_sum[k] / included).epsilon(1e-13));
  }
}

TEST_CASE("evaluation is independent of the thread count") {
  const auto set = random_interactions(40, 30, 0.2, 7);
  const auto split = ev::split(set, {0.8, 0.1, 0.1}, 11);
  const ev::ScoreFn scores = [](int u) {
    Vector s(30);
    for (int i = 0; i < 30; ++i) {
      s[i] = std::cos(0.3 * u * i);
    }
    return s;
  };
  const auto serial =
      ev::evaluate(scores, split, ev::Phase::kValidation, {2, 5, 10}, 1);
  const auto threaded =
      ev::evaluate(scores, split, ev::Phase::kValidation, {2, 5, 10}, 4);
  CHECK(serial.users_included == threaded.users_included);
  for (int k : {2, 5, 10}) {
    CHECK(serial.f1.at(k) == threaded.f1.at(k));
    CHECK(serial.ndcg.at(k) == threaded.ndcg.at(k));
  }
}

TEST_CASE("evaluate rejects an empty phase and bad cutoffs") {
  const auto set = random_interactions(10, 10, 0.3, 8);
  auto split = ev::split(set, {0.8, 0.1, 0.1}, 12);
  const ev::ScoreFn scores = [](int) { return Vector::Zero(10); };
  CHECK_THROWS_AS(
      (void)ev::evaluate(scores, split, ev::Phase::kTest, {}),
      std::invalid_argument);
  CHECK_THROWS_AS(
      (void)ev::evaluate(scores, split, ev::Phase::kTest, {0}),
      std::invalid_argument);
  split.test.pairs.clear();
  CHECK_THROWS_AS(
      (void)ev::evaluate(scores, split, ev::Phase::kTest, {1}),
      EvaluationError);
}
