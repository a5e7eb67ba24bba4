// Command line front end. All real work lives in the library; this file
// only maps flags onto a RunConfig and dispatches to the command functions.
//
// Precedence: built-in defaults < config file (--config) < explicit flags.
// The config file is applied before CLI11 parses, so any flag the user
// actually typed wins.

#include <cstdio>
#include <exception>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "lcfn/cli.hpp"
#include "lcfn/dataio.hpp"

namespace {

// CLI11 only hands us the config path after parsing, which is too late to
// establish the defaults the parser overrides. Scan argv by hand instead.
std::string find_config_arg(int argc, char** argv) {
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--config" && i + 1 < argc) {
      return argv[i + 1];
    }
    if (arg.rfind("--config=", 0) == 0) {
      return arg.substr(9);
    }
  }
  return {};
}

void add_shared_options(CLI::App* cmd, lcfn::cli::RunConfig& rc) {
  cmd->add_option("--config", rc.config_file,
                  "key=value settings file, applied before other flags");
  cmd->add_option("--out", rc.out, "artifact directory for this dataset");
  cmd->add_option("--threads", rc.threads, "worker threads for evaluation");
  cmd->add_option("--seed", rc.train.seed, "master seed for every RNG use");
}

void add_model_options(CLI::App* cmd, lcfn::cli::RunConfig& rc) {
  cmd->add_option("--learning-rate", rc.train.learning_rate, "Adam step size");
  cmd->add_option("--reg-lambda", rc.train.reg_lambda,
                  "L2 penalty on embeddings and layer parameters");
  cmd->add_option("--embed-dim", rc.train.embed_dim,
                  "embedding width per layer");
  cmd->add_option("--layers", rc.train.layers, "convolution layers");
  cmd->add_option("--cutoff-ratio", rc.train.cutoff_ratio,
                  "fraction of each spectrum kept (0, 1]");
  cmd->add_option("--batch-size", rc.train.batch_size, "triples per step");
  cmd->add_option("--epochs", rc.train.epochs, "training passes");
  cmd->add_option("--negatives-per-positive", rc.train.negatives_per_positive,
                  "sampled negatives per observed interaction");
  cmd->add_option("--eval-ks", rc.train.eval_ks,
                  "ranking depths reported by evaluation")
      ->delimiter(',');
  cmd->add_option("--selection-metric", rc.train.selection_metric,
                  "validation metric that picks checkpoints, e.g. f1@2");
}

}  // namespace

int main(int argc, char** argv) {
  lcfn::cli::RunConfig rc;

  try {
    const std::string config_path = find_config_arg(argc, argv);
    if (!config_path.empty()) {
      rc.config_file = config_path;
      lcfn::cli::apply_config_map(rc, lcfn::io::read_config_file(config_path));
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }

  CLI::App app{"Spectral collaborative filtering pipeline"};
  app.require_subcommand(1);

  std::vector<double> ratios_arg;

  CLI::App* ingest = app.add_subcommand(
      "ingest", "parse a feedback log, filter cores, write the dataset");
  add_shared_options(ingest, rc);
  ingest->add_option("--input", rc.input, "raw interaction log")->required();
  ingest->add_option("--format", rc.format, "tsv or movielens");
  ingest->add_option("--core-user", rc.core_user,
                     "minimum interactions per kept user");
  ingest->add_option("--core-item", rc.core_item,
                     "minimum interactions per kept item");

  CLI::App* split = app.add_subcommand(
      "split", "partition interactions into train/validation/test");
  add_shared_options(split, rc);
  split
      ->add_option("--ratios", ratios_arg,
                   "train,validation,test fractions (sum to 1)")
      ->expected(3)
      ->delimiter(',');

  CLI::App* eigen = app.add_subcommand(
      "eigen", "compute or reuse the truncated spectral bases");
  add_shared_options(eigen, rc);
  eigen->add_option("--cutoff-ratio", rc.train.cutoff_ratio,
                    "fraction of each spectrum kept (0, 1]");

  CLI::App* pretrain = app.add_subcommand(
      "pretrain", "train the zero-layer model for pretrained init");
  add_shared_options(pretrain, rc);
  add_model_options(pretrain, rc);

  CLI::App* train = app.add_subcommand("train", "train the full model");
  add_shared_options(train, rc);
  add_model_options(train, rc);
  train->add_option("--init", rc.init, "random or pretrained");

  CLI::App* tune = app.add_subcommand(
      "tune", "grid search learning rate and regularization");
  add_shared_options(tune, rc);
  add_model_options(tune, rc);
  tune->add_option("--init", rc.init, "random or pretrained");
  tune->add_option("--stage", rc.stage, "coarse, fine or both");

  CLI::App* evaluate = app.add_subcommand(
      "evaluate", "score a checkpoint on validation or test");
  add_shared_options(evaluate, rc);
  evaluate->add_option("--checkpoint", rc.checkpoint,
                       "model file (default <out>/model.lcfn)");
  evaluate->add_option("--phase", rc.phase, "validation or test");
  evaluate
      ->add_option("--eval-ks", rc.train.eval_ks,
                   "ranking depths to report")
      ->delimiter(',');

  CLI::App* demo = app.add_subcommand(
      "demo-gft", "cycle-graph transform demo; writes a spectrum CSV");
  add_shared_options(demo, rc);
  demo->add_option("--n", rc.demo_n, "cycle length (positive multiple of 20)");
  demo->add_option("--signal", rc.demo_signal, "s1, s2 or s3");
  demo->add_option("--passband", rc.demo_passband,
                   "fraction of low frequencies kept for reconstruction");

  CLI11_PARSE(app, argc, argv);

  if (!ratios_arg.empty()) {
    rc.ratios = {ratios_arg[0], ratios_arg[1], ratios_arg[2]};
  }

  try {
    if (ingest->parsed()) return lcfn::cli::ingest_cmd(rc);
    if (split->parsed()) return lcfn::cli::split_cmd(rc);
    if (eigen->parsed()) return lcfn::cli::eigen_cmd(rc);
    if (pretrain->parsed()) return lcfn::cli::pretrain_cmd(rc);
    if (train->parsed()) return lcfn::cli::train_cmd(rc);
    if (tune->parsed()) return lcfn::cli::tune_cmd(rc);
    if (evaluate->parsed()) return lcfn::cli::evaluate_cmd(rc);
    if (demo->parsed()) return lcfn::cli::demo_gft_cmd(rc);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
