#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "lcfn/hypergraph.hpp"
#include "lcfn/linalg.hpp"

namespace lcfn::io {

// Canonical interaction file: UTF-8 text, one "user<TAB>item" index pair per
// line, sorted by (user, item). Indices refer to the id map files written at
// ingest time (line k holds the external id of index k).
void write_interactions(const std::filesystem::path& path,
                        const std::vector<std::pair<int, int>>& pairs);
std::vector<std::pair<int, int>> read_interactions(
    const std::filesystem::path& path);

void write_id_map(const std::filesystem::path& path,
                  const std::vector<std::string>& ids);
std::vector<std::string> read_id_map(const std::filesystem::path& path);

// Dataset directory layout produced by ingest and consumed by everything
// else: interactions.tsv, user_ids.tsv, item_ids.tsv, stats.json, then
// train.tsv / validation.tsv / test.tsv once split has run.
void write_dataset(const std::filesystem::path& dir,
                   const hypergraph::InteractionSet& set);
hypergraph::InteractionSet read_dataset_file(const std::filesystem::path& dir,
                                             const std::string& filename);

// Hex digest of a file's bytes. Ties eigen caches to the exact training
// split they were computed from.
std::string file_digest(const std::filesystem::path& path);

// Raw-feedback readers. "tsv" expects user<TAB>item with optional extra
// columns; "movielens" expects user::item::rating::timestamp. Ratings are
// binarized by presence. Malformed lines raise ParseError with the line
// number; blank lines are skipped.
std::vector<std::pair<std::string, std::string>> parse_feedback(
    const std::filesystem::path& path, const std::string& format);

// Eigen cache: one text header line
//   LCFB1 <digest> <side> <cutoff_ratio> <dim> <count>
// followed by `count` doubles of frequencies and dim*count doubles of
// eigenvectors, column-major, little-endian.
struct EigenCacheMeta {
  std::string digest;
  std::string side;  // "user" or "item"
  double cutoff_ratio = 0.0;
  int dim = 0;
  int count = 0;
};

void write_eigen_cache(const std::filesystem::path& path,
                       const EigenCacheMeta& meta,
                       const linalg::SpectralBasis& basis);
// Reads only the header; cheap existence and compatibility probe.
EigenCacheMeta read_eigen_cache_meta(const std::filesystem::path& path);
linalg::SpectralBasis read_eigen_cache(const std::filesystem::path& path,
                                       EigenCacheMeta* meta = nullptr);

// Flat key=value configuration file. '#' starts a comment; blank lines are
// ignored. Later keys override earlier ones.
std::map<std::string, std::string> read_config_file(
    const std::filesystem::path& path);

// Canonical serialization (sorted keys) hashed for the metrics report.
std::string config_digest(const std::map<std::string, std::string>& config);

}  // namespace lcfn::io
