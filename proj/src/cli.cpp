#include "lcfn/cli.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <cmath>
#include <fstream>
#include <iostream>
#include <sstream>

#include <json.hpp>

#include "lcfn/dataio.hpp"
#include "lcfn/errors.hpp"
#include "lcfn/evaluation.hpp"
#include "lcfn/spectral.hpp"

namespace lcfn::cli {

namespace {

using nlohmann::json;

// Exclusive per-directory lock so two commands cannot race on the same
// artifact set. Held for the lifetime of the command.
class DirLock {
 public:
  explicit DirLock(const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    path_ = dir / ".lcfn.lock";
    fd_ = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
    if (fd_ < 0) {
      throw CacheError("output directory is locked by another command; "
                       "remove " +
                       path_.string() + " if that process is gone");
    }
    const std::string pid = std::to_string(::getpid()) + "\n";
    [[maybe_unused]] auto n = ::write(fd_, pid.data(), pid.size());
  }

  ~DirLock() {
    if (fd_ >= 0) {
      ::close(fd_);
      ::unlink(path_.c_str());
    }
  }

  DirLock(const DirLock&) = delete;
  DirLock& operator=(const DirLock&) = delete;

 private:
  std::filesystem::path path_;
  int fd_ = -1;
};

std::vector<int> parse_int_list(const std::string& s) {
  std::vector<int> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    out.push_back(std::stoi(tok));
  }
  if (out.empty()) {
    throw std::invalid_argument("empty integer list");
  }
  return out;
}

std::array<double, 3> parse_ratio_list(const std::string& s) {
  std::vector<double> vals;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    vals.push_back(std::stod(tok));
  }
  if (vals.size() != 3) {
    throw std::invalid_argument("ratios need exactly three values");
  }
  return {vals[0], vals[1], vals[2]};
}

std::string join_ints(const std::vector<int>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i > 0) {
      s += ',';
    }
    s += std::to_string(v[i]);
  }
  return s;
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return std::string(buf);
}

evaluation::SplitData load_split(const RunConfig& rc) {
  const auto dir = rc.out;
  for (const char* name : {"train.tsv", "validation.tsv", "test.tsv"}) {
    if (!std::filesystem::exists(dir / name)) {
      throw CacheError("missing " + (dir / name).string() +
                       "; run the split command first");
    }
  }
  evaluation::SplitData split;
  split.train = io::read_dataset_file(dir, "train.tsv");
  split.validation = io::read_dataset_file(dir, "validation.tsv");
  split.test = io::read_dataset_file(dir, "test.tsv");
  split.seed = rc.train.seed;
  split.ratios = rc.ratios;
  return split;
}

// Loads the two eigen caches and cross-checks them against the current train
// split and cutoff ratio. Any mismatch is a hard error: silently reusing a
// stale basis would corrupt every downstream number.
spectral::TruncatedBases load_bases(const RunConfig& rc, int users,
                                    int items) {
  const auto user_path = rc.out / "eigen_user.lcfb";
  const auto item_path = rc.out / "eigen_item.lcfb";
  if (!std::filesystem::exists(user_path) ||
      !std::filesystem::exists(item_path)) {
    throw CacheError("eigen caches not found in " + rc.out.string() +
                     "; run the eigen command first");
  }
  const std::string digest = io::file_digest(rc.out / "train.tsv");
  const auto [phi, psi] =
      spectral::cutoff_counts(rc.train.cutoff_ratio, users, items);

  spectral::TruncatedBases bases;
  bases.cutoff_ratio = rc.train.cutoff_ratio;
  io::EigenCacheMeta meta;
  bases.user_basis = io::read_eigen_cache(user_path, &meta);
  if (meta.digest != digest || meta.side != "user" || meta.dim != users ||
      meta.count != phi) {
    throw CacheError("eigen cache " + user_path.string() +
                     " does not match the current train split and cutoff; "
                     "rerun the eigen command");
  }
  bases.item_basis = io::read_eigen_cache(item_path, &meta);
  if (meta.digest != digest || meta.side != "item" || meta.dim != items ||
      meta.count != psi) {
    throw CacheError("eigen cache " + item_path.string() +
                     " does not match the current train split and cutoff; "
                     "rerun the eigen command");
  }
  return bases;
}

void write_history(const std::filesystem::path& path,
                   const std::vector<training::EpochRecord>& history) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw CacheError("cannot open for writing: " + path.string());
  }
  for (const auto& rec : history) {
    json line = {{"epoch", rec.epoch},
                 {"loss", rec.loss},
                 {"metric_name", rec.metric_name},
                 {"metric_value", rec.metric_value},
                 {"wall_ms", rec.wall_ms}};
    out << line.dump() << '\n';
  }
}

json report_to_json(const evaluation::MetricsReport& report) {
  json f1 = json::object();
  json ndcg = json::object();
  for (const auto& [k, v] : report.f1) {
    f1[std::to_string(k)] = v;
  }
  for (const auto& [k, v] : report.ndcg) {
    ndcg[std::to_string(k)] = v;
  }
  return json{{"phase", report.phase},
              {"ks", report.ks},
              {"f1", f1},
              {"ndcg", ndcg},
              {"users_included", report.users_included},
              {"seed", report.seed},
              {"config_digest", report.config_digest}};
}

model::InitSpec make_init(const RunConfig& rc) {
  if (rc.init == "random") {
    return {};
  }
  if (rc.init != "pretrained") {
    throw std::invalid_argument("init must be 'random' or 'pretrained'");
  }
  const auto path = rc.out / "mf_pretrain.lcfn";
  if (!std::filesystem::exists(path)) {
    throw CacheError("pretrained embeddings not found at " + path.string() +
                     "; run the pretrain command first");
  }
  model::ModelParams mf = model::load_checkpoint(path);
  model::InitSpec init;
  init.pretrained = {std::move(mf.user_embed), std::move(mf.item_embed)};
  return init;
}

}  // namespace

void apply_config_map(RunConfig& rc,
                      const std::map<std::string, std::string>& kv) {
  for (const auto& [key, value] : kv) {
    if (key == "out") {
      rc.out = value;
    } else if (key == "threads") {
      rc.threads = std::stoi(value);
    } else if (key == "input") {
      rc.input = value;
    } else if (key == "format") {
      rc.format = value;
    } else if (key == "core_user") {
      rc.core_user = std::stoi(value);
    } else if (key == "core_item") {
      rc.core_item = std::stoi(value);
    } else if (key == "ratios") {
      rc.ratios = parse_ratio_list(value);
    } else if (key == "seed") {
      rc.train.seed = std::stoull(value);
    } else if (key == "learning_rate") {
      rc.train.learning_rate = std::stod(value);
    } else if (key == "reg_lambda") {
      rc.train.reg_lambda = std::stod(value);
    } else if (key == "embed_dim") {
      rc.train.embed_dim = std::stoi(value);
    } else if (key == "layers") {
      rc.train.layers = std::stoi(value);
    } else if (key == "cutoff_ratio") {
      rc.train.cutoff_ratio = std::stod(value);
    } else if (key == "batch_size") {
      rc.train.batch_size = std::stoi(value);
    } else if (key == "epochs") {
      rc.train.epochs = std::stoi(value);
    } else if (key == "negatives_per_positive") {
      rc.train.negatives_per_positive = std::stoi(value);
    } else if (key == "eval_ks") {
      rc.train.eval_ks = parse_int_list(value);
    } else if (key == "selection_metric") {
      rc.train.selection_metric = value;
    } else if (key == "init") {
      rc.init = value;
    } else if (key == "stage") {
      rc.stage = value;
    } else if (key == "checkpoint") {
      rc.checkpoint = value;
    } else if (key == "phase") {
      rc.phase = value;
    } else if (key == "n") {
      rc.demo_n = std::stoi(value);
    } else if (key == "signal") {
      rc.demo_signal = value;
    } else if (key == "passband") {
      rc.demo_passband = std::stod(value);
    } else {
      throw std::invalid_argument("unknown config key: " + key);
    }
  }
}

std::map<std::string, std::string> effective_config(const RunConfig& rc) {
  std::map<std::string, std::string> kv;
  kv["seed"] = std::to_string(rc.train.seed);
  kv["threads"] = std::to_string(rc.threads);
  kv["format"] = rc.format;
  kv["core_user"] = std::to_string(rc.core_user);
  kv["core_item"] = std::to_string(rc.core_item);
  kv["ratios"] = format_double(rc.ratios[0]) + "," +
                 format_double(rc.ratios[1]) + "," +
                 format_double(rc.ratios[2]);
  kv["learning_rate"] = format_double(rc.train.learning_rate);
  kv["reg_lambda"] = format_double(rc.train.reg_lambda);
  kv["embed_dim"] = std::to_string(rc.train.embed_dim);
  kv["layers"] = std::to_string(rc.train.layers);
  kv["cutoff_ratio"] = format_double(rc.train.cutoff_ratio);
  kv["batch_size"] = std::to_string(rc.train.batch_size);
  kv["epochs"] = std::to_string(rc.train.epochs);
  kv["negatives_per_positive"] =
      std::to_string(rc.train.negatives_per_positive);
  kv["eval_ks"] = join_ints(rc.train.eval_ks);
  kv["selection_metric"] = rc.train.selection_metric;
  kv["init"] = rc.init;
  kv["stage"] = rc.stage;
  kv["phase"] = rc.phase;
  return kv;
}

int ingest_cmd(const RunConfig& rc) {
  if (rc.input.empty() || rc.out.empty()) {
    throw std::invalid_argument("ingest needs --input and --out");
  }
  DirLock lock(rc.out);
  const auto raw = io::parse_feedback(rc.input, rc.format);
  hypergraph::InteractionSet set = hypergraph::make_interaction_set(raw);
  set = hypergraph::ncore_filter(set, rc.core_user, rc.core_item);
  io::write_dataset(rc.out, set);

  const double cells =
      static_cast<double>(set.user_count()) * set.item_count();
  json stats = {{"users", set.user_count()},
                {"items", set.item_count()},
                {"pairs", set.pairs.size()},
                {"sparsity", static_cast<double>(set.pairs.size()) / cells}};
  std::ofstream stats_out(rc.out / "stats.json",
                          std::ios::binary | std::ios::trunc);
  stats_out << stats.dump(2) << '\n';

  std::cout << "ingest: users=" << set.user_count()
            << " items=" << set.item_count() << " pairs=" << set.pairs.size()
            << '\n';
  return 0;
}

int split_cmd(const RunConfig& rc) {
  if (rc.out.empty()) {
    throw std::invalid_argument("split needs --out");
  }
  DirLock lock(rc.out);
  if (!std::filesystem::exists(rc.out / "interactions.tsv")) {
    throw CacheError("no dataset in " + rc.out.string() +
                     "; run the ingest command first");
  }
  const hypergraph::InteractionSet set =
      io::read_dataset_file(rc.out, "interactions.tsv");
  const evaluation::SplitData split =
      evaluation::split(set, rc.ratios, rc.train.seed);
  io::write_interactions(rc.out / "train.tsv", split.train.pairs);
  io::write_interactions(rc.out / "validation.tsv", split.validation.pairs);
  io::write_interactions(rc.out / "test.tsv", split.test.pairs);
  std::cout << "split: train=" << split.train.pairs.size()
            << " validation=" << split.validation.pairs.size()
            << " test=" << split.test.pairs.size() << '\n';
  return 0;
}

int eigen_cmd(const RunConfig& rc) {
  if (rc.out.empty()) {
    throw std::invalid_argument("eigen needs --out");
  }
  DirLock lock(rc.out);
  if (!std::filesystem::exists(rc.out / "train.tsv")) {
    throw CacheError("no train split in " + rc.out.string() +
                     "; run the split command first");
  }
  const hypergraph::InteractionSet train =
      io::read_dataset_file(rc.out, "train.tsv");
  const std::string digest = io::file_digest(rc.out / "train.tsv");
  const double f = rc.train.cutoff_ratio;
  const auto [phi, psi] =
      spectral::cutoff_counts(f, train.user_count(), train.item_count());

  auto fresh = [&](const std::filesystem::path& path, const std::string& side,
                   int dim, int count) {
    if (!std::filesystem::exists(path)) {
      return false;
    }
    try {
      const io::EigenCacheMeta meta = io::read_eigen_cache_meta(path);
      return meta.digest == digest && meta.side == side &&
             meta.cutoff_ratio == f && meta.dim == dim && meta.count == count;
    } catch (const CacheError&) {
      return false;
    }
  };

  const bool user_fresh =
      fresh(rc.out / "eigen_user.lcfb", "user", train.user_count(), phi);
  const bool item_fresh =
      fresh(rc.out / "eigen_item.lcfb", "item", train.item_count(), psi);
  if (user_fresh && item_fresh) {
    std::cout << "eigen: cache hit (user and item bases are current)\n";
    return 0;
  }

  const SparseBinaryMatrix r = hypergraph::build_interaction_matrix(train);
  const auto [user_lap, item_lap] = hypergraph::user_item_laplacians(r);
  if (!user_fresh) {
    const linalg::SpectralBasis basis = linalg::lanczos_smallest(
        user_lap, phi, 1e-8, 0, derive_seed(rc.train.seed, "eigen_user"));
    io::write_eigen_cache(rc.out / "eigen_user.lcfb",
                          {digest, "user", f, train.user_count(), phi}, basis);
  }
  if (!item_fresh) {
    const linalg::SpectralBasis basis = linalg::lanczos_smallest(
        item_lap, psi, 1e-8, 0, derive_seed(rc.train.seed, "eigen_item"));
    io::write_eigen_cache(rc.out / "eigen_item.lcfb",
                          {digest, "item", f, train.item_count(), psi}, basis);
  }
  std::cout << "eigen: wrote bases (phi=" << phi << " psi=" << psi << ")\n";
  return 0;
}

int pretrain_cmd(const RunConfig& rc) {
  if (rc.out.empty()) {
    throw std::invalid_argument("pretrain needs --out");
  }
  DirLock lock(rc.out);
  const evaluation::SplitData split = load_split(rc);
  training::TrainConfig cfg = rc.train;
  cfg.layers = 0;
  cfg.threads = rc.threads;
  const spectral::TruncatedBases no_bases;
  const training::TrainResult result = training::train(cfg, split, no_bases);
  model::save_checkpoint(rc.out / "mf_pretrain.lcfn", result.best_params);
  write_history(rc.out / "mf_history.jsonl", result.history);
  std::cout << "pretrain: best " << cfg.selection_metric << "="
            << result.best_metric << " at epoch " << result.best_epoch
            << (result.aborted ? " (aborted early)" : "") << '\n';
  return 0;
}

int train_cmd(const RunConfig& rc) {
  if (rc.out.empty()) {
    throw std::invalid_argument("train needs --out");
  }
  DirLock lock(rc.out);
  const evaluation::SplitData split = load_split(rc);
  training::TrainConfig cfg = rc.train;
  cfg.threads = rc.threads;
  spectral::TruncatedBases bases;
  if (cfg.layers > 0) {
    bases = load_bases(rc, split.train.user_count(), split.train.item_count());
  }
  const model::InitSpec init = make_init(rc);
  const training::TrainResult result = training::train(cfg, split, bases, init);
  model::save_checkpoint(rc.out / "model.lcfn", result.best_params);
  write_history(rc.out / "history.jsonl", result.history);
  std::cout << "train: best " << cfg.selection_metric << "="
            << result.best_metric << " at epoch " << result.best_epoch
            << (result.aborted ? " (aborted early)" : "") << '\n';
  return 0;
}

int tune_cmd(const RunConfig& rc) {
  if (rc.out.empty()) {
    throw std::invalid_argument("tune needs --out");
  }
  if (rc.stage != "coarse" && rc.stage != "fine" && rc.stage != "both") {
    throw std::invalid_argument("stage must be coarse, fine or both");
  }
  DirLock lock(rc.out);
  const evaluation::SplitData split = load_split(rc);
  training::TrainConfig cfg = rc.train;
  cfg.threads = rc.threads;
  spectral::TruncatedBases bases;
  if (cfg.layers > 0) {
    bases = load_bases(rc, split.train.user_count(), split.train.item_count());
  }
  const model::InitSpec init = make_init(rc);

  std::ofstream records(rc.out / "tune_records.jsonl",
                        std::ios::binary | std::ios::app);
  auto run_stage = [&](const std::string& stage,
                       const std::vector<training::GridCell>& cells) {
    const training::GridResult result =
        training::grid_search(cfg, cells, split, bases, init);
    for (const auto& rec : result.records) {
      json line = {{"stage", stage},
                   {"learning_rate", rec.cell.learning_rate},
                   {"reg_lambda", rec.cell.reg_lambda},
                   {"metric_name", cfg.selection_metric},
                   {"metric_value", rec.best_metric},
                   {"best_epoch", rec.best_epoch},
                   {"usable", rec.usable}};
      records << line.dump() << '\n';
    }
    return result.best;
  };

  training::GridCell winner{cfg.learning_rate, cfg.reg_lambda};
  if (rc.stage == "coarse" || rc.stage == "both") {
    std::vector<training::GridCell> coarse;
    for (double eta : {0.0001, 0.001, 0.01}) {
      for (double lambda : {0.001, 0.01, 0.1}) {
        coarse.push_back({eta, lambda});
      }
    }
    winner = run_stage("coarse", coarse);
    std::ofstream best(rc.out / "tune_coarse_best.txt",
                       std::ios::binary | std::ios::trunc);
    best << "learning_rate=" << format_double(winner.learning_rate) << '\n'
         << "reg_lambda=" << format_double(winner.reg_lambda) << '\n';
  }
  if (rc.stage == "fine" || rc.stage == "both") {
    if (rc.stage == "fine") {
      const auto path = rc.out / "tune_coarse_best.txt";
      if (!std::filesystem::exists(path)) {
        throw CacheError("no coarse winner at " + path.string() +
                         "; run the coarse stage first");
      }
      const auto kv = io::read_config_file(path);
      winner = {std::stod(kv.at("learning_rate")),
                std::stod(kv.at("reg_lambda"))};
    }
    // Half-decade steps around the coarse winner on both axes.
    std::vector<training::GridCell> fine;
    for (double se : {0.2, 0.5, 1.0, 2.0, 5.0}) {
      for (double sl : {0.2, 0.5, 1.0, 2.0, 5.0}) {
        fine.push_back({winner.learning_rate * se, winner.reg_lambda * sl});
      }
    }
    winner = run_stage("fine", fine);
  }
  std::ofstream best(rc.out / "tune_best.txt",
                     std::ios::binary | std::ios::trunc);
  best << "learning_rate=" << format_double(winner.learning_rate) << '\n'
       << "reg_lambda=" << format_double(winner.reg_lambda) << '\n';
  std::cout << "tune: best learning_rate=" << winner.learning_rate
            << " reg_lambda=" << winner.reg_lambda << '\n';
  return 0;
}

int evaluate_cmd(const RunConfig& rc) {
  if (rc.out.empty()) {
    throw std::invalid_argument("evaluate needs --out");
  }
  if (rc.phase != "validation" && rc.phase != "test") {
    throw std::invalid_argument("phase must be validation or test");
  }
  DirLock lock(rc.out);
  const evaluation::SplitData split = load_split(rc);
  const auto checkpoint_path =
      rc.checkpoint.empty() ? rc.out / "model.lcfn" : rc.checkpoint;
  const model::ModelParams params = model::load_checkpoint(checkpoint_path);
  if (params.user_embed.rows() != split.train.user_count() ||
      params.item_embed.rows() != split.train.item_count()) {
    throw CacheError("checkpoint " + checkpoint_path.string() +
                     " does not match the dataset dimensions");
  }
  spectral::TruncatedBases bases;
  if (params.layer_count() > 0) {
    bases = load_bases(rc, split.train.user_count(), split.train.item_count());
    // The caches must agree with the checkpoint's band widths, whatever
    // cutoff the command line currently says.
    if (bases.phi() != params.layers[0].kernel_user.size() ||
        bases.psi() != params.layers[0].kernel_item.size()) {
      throw CacheError("eigen caches do not match checkpoint band widths");
    }
  }
  const model::ForwardCache cache = model::lcfn_forward(params, bases);
  const model::Scorer scorer = model::make_scorer(cache);
  const evaluation::Phase phase = rc.phase == "validation"
                                      ? evaluation::Phase::kValidation
                                      : evaluation::Phase::kTest;
  evaluation::MetricsReport report =
      evaluation::evaluate([&scorer](int u) { return scorer.scores(u); },
                           split, phase, rc.train.eval_ks, rc.threads);
  report.seed = rc.train.seed;
  report.config_digest = io::config_digest(effective_config(rc));

  const json out = report_to_json(report);
  std::ofstream file(rc.out / ("metrics_" + rc.phase + ".json"),
                     std::ios::binary | std::ios::trunc);
  file << out.dump(2) << '\n';
  std::cout << out.dump(2) << '\n';
  return 0;
}

GftDemo demo_gft(int n, const std::string& signal, double passband) {
  if (n < 20 || n % 20 != 0) {
    throw std::invalid_argument("n must be a positive multiple of 20");
  }
  if (n > 2000) {
    throw std::invalid_argument("demo supports n up to 2000");
  }
  if (signal != "s1" && signal != "s2" && signal != "s3") {
    throw std::invalid_argument("signal must be s1, s2 or s3");
  }
  if (!(passband > 0.0) || passband > 1.0) {
    throw std::invalid_argument("passband must be in (0, 1]");
  }

  const linalg::SpectralBasis basis =
      linalg::dense_symmetric_eig(spectral::cycle_normalized_laplacian(n));

  Vector s1(n), s2(n);
  const double pi = 3.14159265358979323846;
  for (int t = 0; t < n; ++t) {
    s1[t] = std::sin(pi * t / 10.0);        // tone at cycle harmonic n/20
    s2[t] = std::sin(7.0 * pi * t / 10.0);  // tone at harmonic 7n/20
  }
  Vector s = signal == "s1" ? s1 : signal == "s2" ? s2 : Vector(s1 + s2);

  GftDemo demo;
  demo.frequencies = basis.frequencies;
  demo.magnitudes = spectral::gft_1d(s, basis).cwiseAbs();
  if (signal == "s3") {
    const int keep = spectral::cutoff_counts(passband, n, n).first;
    const auto low = basis.vectors.leftCols(keep);
    const Vector recon = low * (low.transpose() * s);
    demo.has_reconstruction = true;
    demo.reconstruction_error = (recon - s1).norm() / s1.norm();
  }
  return demo;
}

int demo_gft_cmd(const RunConfig& rc) {
  const GftDemo demo = demo_gft(rc.demo_n, rc.demo_signal, rc.demo_passband);
  std::ostringstream csv;
  csv << "index,frequency,magnitude\n";
  for (Index i = 0; i < demo.frequencies.size(); ++i) {
    csv << i << ',' << format_double(demo.frequencies[i]) << ','
        << format_double(demo.magnitudes[i]) << '\n';
  }
  if (rc.out.empty()) {
    std::cout << csv.str();
  } else {
    DirLock lock(rc.out);
    std::ofstream file(rc.out / "demo_spectrum.csv",
                       std::ios::binary | std::ios::trunc);
    file << csv.str();
    std::cout << "demo-gft: wrote " << (rc.out / "demo_spectrum.csv").string()
              << '\n';
  }
  if (demo.has_reconstruction) {
    std::cout << "reconstruction_error " << format_double(demo.reconstruction_error)
              << '\n';
  }
  return 0;
}

}  // namespace lcfn::cli
