#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "lcfn/evaluation.hpp"
#include "lcfn/model.hpp"
#include "lcfn/rng.hpp"

namespace lcfn::training {

struct TrainConfig {
  double learning_rate = 0.001;
  double reg_lambda = 0.01;
  int embed_dim = 64;  // per level; prediction uses (layers + 1) * embed_dim
  int layers = 1;
  double cutoff_ratio = 0.005;
  int batch_size = 10000;
  int epochs = 200;
  int negatives_per_positive = 1;
  std::uint64_t seed = 42;
  std::vector<int> eval_ks = {2, 5, 10, 20, 50, 100};
  std::string selection_metric = "f1@2";
  int threads = 1;
};

// Throws std::invalid_argument on nonsense values.
void validate(const TrainConfig& cfg);

// "f1@2" -> {"f1", 2}; "ndcg@10" -> {"ndcg", 10}.
std::pair<std::string, int> parse_metric(const std::string& name);

// One preference comparison: user saw pos, never saw neg.
struct Triple {
  int user;
  int pos;
  int neg;
};

struct SampleStats {
  std::int64_t skipped_positives = 0;  // positives of users with no negatives
};

// One training pass: positives in shuffled order, each emitting
// negatives_per_positive triples with negatives drawn uniformly from the
// user's unobserved items. Users who interacted with everything are skipped
// (counted in stats). Negatives are resampled on every call.
std::vector<Triple> sample_epoch(const hypergraph::InteractionSet& train,
                                 int negatives_per_positive, Rng& rng,
                                 SampleStats* stats = nullptr);

// Exactly `count` triples, concatenating epoch passes as needed.
std::vector<Triple> sample_triples(const hypergraph::InteractionSet& train,
                                   std::int64_t count,
                                   int negatives_per_positive, Rng& rng);

// Gradients are shaped exactly like the parameters.
using Gradients = model::ModelParams;

// Pairwise ranking loss over the given triples:
//   sum of -ln sigmoid(score(u,pos) - score(u,neg))
// plus (lambda / 2) times the squared norms of the layer-0 embeddings and
// all layer parameters. Computed in a numerically stable form.
double bpr_loss(const model::ModelParams& params,
                const spectral::TruncatedBases& bases,
                const std::vector<Triple>& triples, double lambda);

// Analytic reverse-mode gradient of bpr_loss with respect to every
// parameter tensor. Works band-by-band like the forward pass; no user x user
// or item x item intermediate is ever formed.
Gradients gradients(const model::ModelParams& params,
                    const spectral::TruncatedBases& bases,
                    const std::vector<Triple>& triples, double lambda);

// Shared implementation: returns the loss, fills *out if non-null.
double bpr_loss_and_gradients(const model::ModelParams& params,
                              const spectral::TruncatedBases& bases,
                              const std::vector<Triple>& triples,
                              double lambda, Gradients* out);

// Adam moments, shaped like the parameters. Bias correction included.
struct AdamState {
  Gradients m;
  Gradients v;
  std::int64_t step = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  static AdamState like(const model::ModelParams& params);
};

void adam_step(model::ModelParams& params, AdamState& state,
               const Gradients& grads, double learning_rate);

struct EpochRecord {
  int epoch = 0;          // 1-based
  double loss = 0.0;      // summed over the epoch's batches
  std::string metric_name;
  double metric_value = 0.0;
  std::int64_t wall_ms = 0;
};

struct TrainResult {
  model::ModelParams best_params;
  int best_epoch = 0;  // 0 = no epoch finished
  double best_metric = 0.0;
  std::vector<EpochRecord> history;
  bool aborted = false;
  std::int64_t skipped_positives = 0;
};

// Minibatch training with per-epoch validation. The checkpoint with the best
// validation selection metric is retained. A non-finite loss halves the
// learning rate once and retries the epoch from its start; a second
// occurrence aborts, returning the best checkpoint seen so far.
TrainResult train(const TrainConfig& cfg, const evaluation::SplitData& split,
                  const spectral::TruncatedBases& bases,
                  const model::InitSpec& init = {});

// Plain matrix factorization (zero layers) used to warm-start embeddings.
std::pair<Matrix, Matrix> pretrain_mf(const TrainConfig& cfg,
                                      const evaluation::SplitData& split);

struct GridCell {
  double learning_rate;
  double reg_lambda;
};

struct GridRecord {
  GridCell cell;
  double best_metric = 0.0;
  int best_epoch = 0;
  bool aborted = false;
  bool usable = false;  // produced at least one finished epoch
};

struct GridResult {
  GridCell best;
  std::vector<GridRecord> records;
};

// Trains one model per cell and picks the best validation metric. Metric
// ties break toward the smaller learning rate, then the larger lambda.
// Throws TuningError with per-cell diagnostics if every cell diverges.
GridResult grid_search(const TrainConfig& base,
                       const std::vector<GridCell>& cells,
                       const evaluation::SplitData& split,
                       const spectral::TruncatedBases& bases,
                       const model::InitSpec& init = {});

}  // namespace lcfn::training
