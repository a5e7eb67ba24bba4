#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>

#include "lcfn/training.hpp"

namespace lcfn::cli {

// Effective settings for one command invocation. Defaults are overridden by
// the config file (key = field name), which is overridden by CLI flags.
struct RunConfig {
  std::filesystem::path config_file;
  std::filesystem::path out;  // dataset / artifact directory
  int threads = 1;

  // ingest
  std::filesystem::path input;
  std::string format = "tsv";
  int core_user = 0;
  int core_item = 0;

  // split
  std::array<double, 3> ratios{0.8, 0.1, 0.1};

  // model / training knobs, shared by eigen, pretrain, train, tune, evaluate
  training::TrainConfig train;

  // train
  std::string init = "random";  // "random" or "pretrained"

  // tune
  std::string stage = "both";  // "coarse", "fine" or "both"

  // evaluate
  std::filesystem::path checkpoint;
  std::string phase = "test";

  // demo-gft
  int demo_n = 100;
  std::string demo_signal = "s3";
  double demo_passband = 0.5;
};

// Applies flat key=value settings onto the run config. Unknown keys raise
// std::invalid_argument so typos do not silently vanish.
void apply_config_map(RunConfig& rc,
                      const std::map<std::string, std::string>& kv);

// Canonical serialization of the settings that affect results; hashed into
// the metrics report so runs can be told apart later.
std::map<std::string, std::string> effective_config(const RunConfig& rc);

int ingest_cmd(const RunConfig& rc);
int split_cmd(const RunConfig& rc);
int eigen_cmd(const RunConfig& rc);
int pretrain_cmd(const RunConfig& rc);
int train_cmd(const RunConfig& rc);
int tune_cmd(const RunConfig& rc);
int evaluate_cmd(const RunConfig& rc);
int demo_gft_cmd(const RunConfig& rc);

// Cycle-graph demo: spectrum of a pure tone (s1, s2) or their mixture (s3),
// plus, for the mixture, the low-pass separation quality. The graph is the
// n-cycle; n must be a positive multiple of 20 so both tones are exact
// harmonics.
struct GftDemo {
  Vector frequencies;
  Vector magnitudes;
  bool has_reconstruction = false;
  double reconstruction_error = 0.0;
};
GftDemo demo_gft(int n, const std::string& signal, double passband);

}  // namespace lcfn::cli
