#include "lcfn/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <stdexcept>

#include "lcfn/errors.hpp"

namespace lcfn::training {

namespace {

double softplus(double x) {
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

double sigmoid(double x) {
  if (x >= 0.0) {
    return 1.0 / (1.0 + std::exp(-x));
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// Applies fn to every (target tensor, companion tensor) pair in lockstep.
template <typename A, typename B, typename Fn>
void zip_tensors(A& a, B& b, Fn&& fn) {
  fn(a.user_embed, b.user_embed);
  fn(a.item_embed, b.item_embed);
  for (std::size_t l = 0; l < a.layers.size(); ++l) {
    fn(a.layers[l].kernel_user, b.layers[l].kernel_user);
    fn(a.layers[l].kernel_item, b.layers[l].kernel_item);
    fn(a.layers[l].transform, b.layers[l].transform);
  }
}

Gradients zeros_like(const model::ModelParams& params) {
  Gradients g;
  g.user_embed = Matrix::Zero(params.user_embed.rows(), params.embed_dim());
  g.item_embed = Matrix::Zero(params.item_embed.rows(), params.embed_dim());
  g.layers.resize(params.layers.size());
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    g.layers[l].kernel_user =
        Vector::Zero(params.layers[l].kernel_user.size());
    g.layers[l].kernel_item =
        Vector::Zero(params.layers[l].kernel_item.size());
    g.layers[l].transform = Matrix::Zero(params.embed_dim(),
                                         params.embed_dim());
  }
  return g;
}

}  // namespace

void validate(const TrainConfig& cfg) {
  if (!(cfg.learning_rate > 0.0)) {
    throw std::invalid_argument("learning_rate must be positive");
  }
  if (cfg.reg_lambda < 0.0) {
    throw std::invalid_argument("reg_lambda must be non-negative");
  }
  if (cfg.embed_dim < 1 || cfg.layers < 0 || cfg.batch_size < 1 ||
      cfg.epochs < 1 || cfg.negatives_per_positive < 1 || cfg.threads < 1) {
    throw std::invalid_argument("train config has a non-positive field");
  }
  if (cfg.layers > 0 && (!(cfg.cutoff_ratio > 0.0) || cfg.cutoff_ratio > 1.0)) {
    throw std::invalid_argument("cutoff_ratio must be in (0, 1]");
  }
  parse_metric(cfg.selection_metric);
  if (cfg.eval_ks.empty()) {
    throw std::invalid_argument("eval_ks must not be empty");
  }
  for (int k : cfg.eval_ks) {
    if (k < 1) {
      throw std::invalid_argument("eval_ks entries must be positive");
    }
  }
}

std::pair<std::string, int> parse_metric(const std::string& name) {
  const auto at = name.find('@');
  if (at != std::string::npos) {
    const std::string kind = name.substr(0, at);
    if (kind == "f1" || kind == "ndcg") {
      try {
        const int k = std::stoi(name.substr(at + 1));
        if (k >= 1) {
          return {kind, k};
        }
      } catch (const std::exception&) {
      }
    }
  }
  throw std::invalid_argument("unknown selection metric: " + name);
}

std::vector<Triple> sample_epoch(const hypergraph::InteractionSet& train,
                                 int negatives_per_positive, Rng& rng,
                                 SampleStats* stats) {
  if (negatives_per_positive < 1) {
    throw std::invalid_argument("negatives_per_positive must be >= 1");
  }
  if (train.pairs.empty()) {
    throw EmptyDatasetError("sample_epoch: no training pairs");
  }
  const int items = train.item_count();
  // pairs are sorted by (user, item), so each user's slice is sorted too.
  std::vector<std::vector<int>> positives(
      static_cast<std::size_t>(train.user_count()));
  for (const auto& [u, i] : train.pairs) {
    positives[static_cast<std::size_t>(u)].push_back(i);
  }

  std::vector<std::size_t> order(train.pairs.size());
  for (std::size_t p = 0; p < order.size(); ++p) {
    order[p] = p;
  }
  rng.shuffle(order);

  std::vector<Triple> triples;
  triples.reserve(order.size() *
                  static_cast<std::size_t>(negatives_per_positive));
  for (std::size_t p : order) {
    const auto& [u, i] = train.pairs[p];
    const auto& pos = positives[static_cast<std::size_t>(u)];
    if (static_cast<int>(pos.size()) >= items) {
      if (stats != nullptr) {
        stats->skipped_positives++;
      }
      continue;
    }
    for (int t = 0; t < negatives_per_positive; ++t) {
      int j;
      do {
        j = static_cast<int>(rng.below(static_cast<std::uint64_t>(items)));
      } while (std::binary_search(pos.begin(), pos.end(), j));
      triples.push_back({u, i, j});
    }
  }
  return triples;
}

std::vector<Triple> sample_triples(const hypergraph::InteractionSet& train,
                                   std::int64_t count,
                                   int negatives_per_positive, Rng& rng) {
  if (count < 0) {
    throw std::invalid_argument("sample_triples: negative count");
  }
  std::vector<Triple> out;
  out.reserve(static_cast<std::size_t>(count));
  while (static_cast<std::int64_t>(out.size()) < count) {
    std::vector<Triple> epoch =
        sample_epoch(train, negatives_per_positive, rng);
    if (epoch.empty()) {
      throw EmptyDatasetError("sample_triples: every positive was skipped");
    }
    for (const Triple& t : epoch) {
      if (static_cast<std::int64_t>(out.size()) >= count) {
        break;
      }
      out.push_back(t);
    }
  }
  return out;
}

double bpr_loss_and_gradients(const model::ModelParams& params,
                              const spectral::TruncatedBases& bases,
                              const std::vector<Triple>& triples,
                              double lambda, Gradients* out) {
  const model::ForwardCache cache = model::lcfn_forward(params, bases);
  const int levels = cache.layer_count() + 1;
  const Index m = params.user_embed.rows();
  const Index n = params.item_embed.rows();
  for (const Triple& t : triples) {
    if (t.user < 0 || t.user >= m || t.pos < 0 || t.pos >= n || t.neg < 0 ||
        t.neg >= n) {
      throw std::invalid_argument("triple index out of range");
    }
  }

  double loss = 0.0;
  std::vector<double> weights;  // d loss / d margin per triple
  if (out != nullptr) {
    weights.reserve(triples.size());
  }
  for (const Triple& t : triples) {
    double margin = 0.0;
    for (int l = 0; l < levels; ++l) {
      const auto& u_rows = cache.user_layers[static_cast<std::size_t>(l)];
      const auto& v_rows = cache.item_layers[static_cast<std::size_t>(l)];
      margin += u_rows.row(t.user).dot(v_rows.row(t.pos) - v_rows.row(t.neg));
    }
    loss += softplus(-margin);
    if (out != nullptr) {
      weights.push_back(-sigmoid(-margin));
    }
  }

  // (lambda / 2) * squared norms of embeddings and all layer parameters.
  double reg = params.user_embed.squaredNorm() + params.item_embed.squaredNorm();
  for (const auto& layer : params.layers) {
    reg += layer.kernel_user.squaredNorm() + layer.kernel_item.squaredNorm() +
           layer.transform.squaredNorm();
  }
  loss += 0.5 * lambda * reg;

  if (!std::isfinite(loss)) {
    throw NumericOverflowError("non-finite loss", 0);
  }
  if (out == nullptr) {
    return loss;
  }

  // Score gradients per level: margin = sum_l u_l[u] . (v_l[pos] - v_l[neg]).
  std::vector<Matrix> d_user(static_cast<std::size_t>(levels));
  std::vector<Matrix> d_item(static_cast<std::size_t>(levels));
  for (int l = 0; l < levels; ++l) {
    d_user[static_cast<std::size_t>(l)] =
        Matrix::Zero(m, params.embed_dim());
    d_item[static_cast<std::size_t>(l)] =
        Matrix::Zero(n, params.embed_dim());
  }
  for (std::size_t t = 0; t < triples.size(); ++t) {
    const Triple& tr = triples[t];
    const double w = weights[t];
    for (int l = 0; l < levels; ++l) {
      const auto& u_rows = cache.user_layers[static_cast<std::size_t>(l)];
      const auto& v_rows = cache.item_layers[static_cast<std::size_t>(l)];
      d_user[static_cast<std::size_t>(l)].row(tr.user) +=
          w * (v_rows.row(tr.pos) - v_rows.row(tr.neg));
      d_item[static_cast<std::size_t>(l)].row(tr.pos) +=
          w * u_rows.row(tr.user);
      d_item[static_cast<std::size_t>(l)].row(tr.neg) -=
          w * u_rows.row(tr.user);
    }
  }

  *out = zeros_like(params);
  // Walk the layers backwards; d_user[l] is complete once layer l + 1 has
  // pushed its input gradient down.
  for (int l = cache.layer_count(); l >= 1; --l) {
    const auto& layer = params.layers[static_cast<std::size_t>(l - 1)];
    auto& grad_layer = out->layers[static_cast<std::size_t>(l - 1)];
    const Matrix& p = bases.user_basis.vectors;
    const Matrix& q = bases.item_basis.vectors;

    {  // user side
      const Matrix& activated = cache.user_layers[static_cast<std::size_t>(l)];
      Matrix dz = d_user[static_cast<std::size_t>(l)].array() *
                  activated.array() * (1.0 - activated.array());
      grad_layer.transform.noalias() +=
          cache.user_conv[static_cast<std::size_t>(l - 1)].transpose() * dz;
      Matrix dconv = dz * layer.transform.transpose();
      Matrix band = p.transpose() * dconv;  // phi x K
      grad_layer.kernel_user +=
          (band.array() * cache.user_proj[static_cast<std::size_t>(l - 1)].array())
              .rowwise()
              .sum()
              .matrix();
      band.array().colwise() *= layer.kernel_user.array();
      d_user[static_cast<std::size_t>(l - 1)].noalias() += p * band;
    }
    {  // item side
      const Matrix& activated = cache.item_layers[static_cast<std::size_t>(l)];
      Matrix dz = d_item[static_cast<std::size_t>(l)].array() *
                  activated.array() * (1.0 - activated.array());
      grad_layer.transform.noalias() +=
          cache.item_conv[static_cast<std::size_t>(l - 1)].transpose() * dz;
      Matrix dconv = dz * layer.transform.transpose();
      Matrix band = q.transpose() * dconv;  // psi x K
      grad_layer.kernel_item +=
          (band.array() * cache.item_proj[static_cast<std::size_t>(l - 1)].array())
              .rowwise()
              .sum()
              .matrix();
      band.array().colwise() *= layer.kernel_item.array();
      d_item[static_cast<std::size_t>(l - 1)].noalias() += q * band;
    }
  }
  out->user_embed = d_user[0];
  out->item_embed = d_item[0];

  // Regularizer gradient: lambda * theta on every tensor.
  zip_tensors(*out, params, [lambda](auto& g, const auto& theta) {
    g += lambda * theta;
  });
  return loss;
}

double bpr_loss(const model::ModelParams& params,
                const spectral::TruncatedBases& bases,
                const std::vector<Triple>& triples, double lambda) {
  return bpr_loss_and_gradients(params, bases, triples, lambda, nullptr);
}

Gradients gradients(const model::ModelParams& params,
                    const spectral::TruncatedBases& bases,
                    const std::vector<Triple>& triples, double lambda) {
  Gradients g;
  bpr_loss_and_gradients(params, bases, triples, lambda, &g);
  return g;
}

AdamState AdamState::like(const model::ModelParams& params) {
  AdamState state;
  state.m = zeros_like(params);
  state.v = zeros_like(params);
  return state;
}

void adam_step(model::ModelParams& params, AdamState& state,
               const Gradients& grads, double learning_rate) {
  if (!(learning_rate > 0.0)) {
    throw std::invalid_argument("adam_step: learning_rate must be positive");
  }
  state.step++;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  const double b1 = state.beta1;
  const double b2 = state.beta2;
  const double eps = state.epsilon;

  auto update = [&](auto& theta, const auto& g, auto& m, auto& v) {
    m = b1 * m + (1.0 - b1) * g;
    v.array() = b2 * v.array() + (1.0 - b2) * g.array().square();
    theta.array() -= learning_rate * (m.array() / bc1) /
                     ((v.array() / bc2).sqrt() + eps);
  };
  update(params.user_embed, grads.user_embed, state.m.user_embed,
         state.v.user_embed);
  update(params.item_embed, grads.item_embed, state.m.item_embed,
         state.v.item_embed);
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    update(params.layers[l].kernel_user, grads.layers[l].kernel_user,
           state.m.layers[l].kernel_user, state.v.layers[l].kernel_user);
    update(params.layers[l].kernel_item, grads.layers[l].kernel_item,
           state.m.layers[l].kernel_item, state.v.layers[l].kernel_item);
    update(params.layers[l].transform, grads.layers[l].transform,
           state.m.layers[l].transform, state.v.layers[l].transform);
  }
}

TrainResult train(const TrainConfig& cfg, const evaluation::SplitData& split,
                  const spectral::TruncatedBases& bases,
                  const model::InitSpec& init) {
  validate(cfg);
  const auto [metric_kind, metric_k] = parse_metric(cfg.selection_metric);
  const int users = split.train.user_count();
  const int items = split.train.item_count();

  model::ModelParams params = model::init_params(
      users, items, cfg.embed_dim, cfg.layers, bases, cfg.seed, init);
  AdamState adam = AdamState::like(params);

  TrainResult result;
  result.best_params = params;  // fallback if nothing ever finishes
  result.best_metric = -1.0;

  double lr = cfg.learning_rate;
  bool halved = false;

  int epoch = 1;
  while (epoch <= cfg.epochs) {
    const auto t0 = std::chrono::steady_clock::now();
    const model::ModelParams params_snapshot = params;
    const AdamState adam_snapshot = adam;

    Rng rng = Rng::substream(cfg.seed, "sampler",
                             static_cast<std::uint64_t>(epoch));
    SampleStats stats;
    std::vector<Triple> triples =
        sample_epoch(split.train, cfg.negatives_per_positive, rng, &stats);
    result.skipped_positives += stats.skipped_positives;
    if (triples.empty()) {
      throw EmptyDatasetError("train: epoch produced no triples");
    }

    double epoch_loss = 0.0;
    bool diverged = false;
    Gradients grads;
    for (std::size_t start = 0; start < triples.size();
         start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t stop = std::min(
          triples.size(), start + static_cast<std::size_t>(cfg.batch_size));
      std::vector<Triple> batch(triples.begin() + static_cast<std::ptrdiff_t>(start),
                                triples.begin() + static_cast<std::ptrdiff_t>(stop));
      double batch_loss = 0.0;
      try {
        batch_loss =
            bpr_loss_and_gradients(params, bases, batch, cfg.reg_lambda, &grads);
      } catch (const NumericOverflowError&) {
        diverged = true;
        break;
      }
      if (!std::isfinite(batch_loss)) {
        diverged = true;
        break;
      }
      epoch_loss += batch_loss;
      adam_step(params, adam, grads, lr);
    }

    if (diverged) {
      params = params_snapshot;
      adam = adam_snapshot;
      if (!halved) {
        // One-shot guard: halve the step size and replay this epoch.
        halved = true;
        lr *= 0.5;
        continue;
      }
      result.aborted = true;
      break;
    }

    const model::ForwardCache cache = model::lcfn_forward(params, bases);
    const model::Scorer scorer = model::make_scorer(cache);
    const evaluation::MetricsReport report = evaluation::evaluate(
        [&scorer](int u) { return scorer.scores(u); }, split,
        evaluation::Phase::kValidation, {metric_k}, cfg.threads);
    const double metric = metric_kind == "f1" ? report.f1.at(metric_k)
                                              : report.ndcg.at(metric_k);
    const auto wall = std::chrono::duration_cast<std::chrono::milliseconds>(
                          std::chrono::steady_clock::now() - t0)
                          .count();
    result.history.push_back({epoch, epoch_loss, cfg.selection_metric, metric,
                              static_cast<std::int64_t>(wall)});
    if (metric > result.best_metric) {
      result.best_metric = metric;
      result.best_epoch = epoch;
      result.best_params = params;
    }
    ++epoch;
  }
  return result;
}

std::pair<Matrix, Matrix> pretrain_mf(const TrainConfig& cfg,
                                      const evaluation::SplitData& split) {
  TrainConfig flat = cfg;
  flat.layers = 0;
  spectral::TruncatedBases no_bases;
  TrainResult result = train(flat, split, no_bases);
  return {std::move(result.best_params.user_embed),
          std::move(result.best_params.item_embed)};
}

GridResult grid_search(const TrainConfig& base,
                       const std::vector<GridCell>& cells,
                       const evaluation::SplitData& split,
                       const spectral::TruncatedBases& bases,
                       const model::InitSpec& init) {
  if (cells.empty()) {
    throw std::invalid_argument("grid_search: empty grid");
  }
  GridResult result;
  result.records.reserve(cells.size());
  int best = -1;
  std::vector<std::string> diagnostics;
  for (const GridCell& cell : cells) {
    TrainConfig cfg = base;
    cfg.learning_rate = cell.learning_rate;
    cfg.reg_lambda = cell.reg_lambda;
    const TrainResult run = train(cfg, split, bases, init);
    GridRecord record;
    record.cell = cell;
    record.aborted = run.aborted;
    record.usable = !run.history.empty();
    record.best_metric = record.usable ? run.best_metric : 0.0;
    record.best_epoch = run.best_epoch;
    if (!record.usable) {
      diagnostics.push_back("eta=" + std::to_string(cell.learning_rate) +
                            " lambda=" + std::to_string(cell.reg_lambda) +
                            ": diverged before finishing an epoch");
    }
    result.records.push_back(record);

    const int idx = static_cast<int>(result.records.size()) - 1;
    if (!record.usable) {
      continue;
    }
    if (best < 0) {
      best = idx;
      continue;
    }
    const GridRecord& champ = result.records[static_cast<std::size_t>(best)];
    if (record.best_metric > champ.best_metric) {
      best = idx;
    } else if (record.best_metric == champ.best_metric) {
      if (cell.learning_rate < champ.cell.learning_rate ||
          (cell.learning_rate == champ.cell.learning_rate &&
           cell.reg_lambda > champ.cell.reg_lambda)) {
        best = idx;
      }
    }
  }
  if (best < 0) {
    throw TuningError("grid_search: every cell diverged", diagnostics);
  }
  result.best = result.records[static_cast<std::size_t>(best)].cell;
  return result;
}

}  // namespace lcfn::training
