#include "lcfn/dataio.hpp"

#include <charconv>
#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "lcfn/errors.hpp"
#include "lcfn/rng.hpp"

namespace lcfn::io {

namespace {

std::string read_whole_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw CacheError("cannot open file: " + path.string());
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

}  // namespace

void write_interactions(const std::filesystem::path& path,
                        const std::vector<std::pair<int, int>>& pairs) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw CacheError("cannot open for writing: " + path.string());
  }
  for (const auto& [u, i] : pairs) {
    out << u << '\t' << i << '\n';
  }
  if (!out) {
    throw CacheError("short write: " + path.string());
  }
}

std::vector<std::pair<int, int>> read_interactions(
    const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw CacheError("cannot open interactions: " + path.string());
  }
  std::vector<std::pair<int, int>> pairs;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) {
      continue;
    }
    const auto tab = line.find('\t');
    if (tab == std::string::npos) {
      throw ParseError("missing tab at line " + std::to_string(line_no) +
                       " of " + path.string());
    }
    int u = 0;
    int i = 0;
    const char* begin = line.data();
    auto r1 = std::from_chars(begin, begin + tab, u);
    auto r2 = std::from_chars(begin + tab + 1, begin + line.size(), i);
    if (r1.ec != std::errc{} || r2.ec != std::errc{} ||
        r1.ptr != begin + tab || r2.ptr != begin + line.size()) {
      throw ParseError("bad index pair at line " + std::to_string(line_no) +
                       " of " + path.string());
    }
    pairs.emplace_back(u, i);
  }
  return pairs;
}

void write_id_map(const std::filesystem::path& path,
                  const std::vector<std::string>& ids) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw CacheError("cannot open for writing: " + path.string());
  }
  for (const std::string& id : ids) {
    out << id << '\n';
  }
  if (!out) {
    throw CacheError("short write: " + path.string());
  }
}

std::vector<std::string> read_id_map(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw CacheError("cannot open id map: " + path.string());
  }
  std::vector<std::string> ids;
  std::string line;
  while (std::getline(in, line)) {
    ids.push_back(line);
  }
  return ids;
}

void write_dataset(const std::filesystem::path& dir,
                   const hypergraph::InteractionSet& set) {
  std::filesystem::create_directories(dir);
  write_interactions(dir / "interactions.tsv", set.pairs);
  write_id_map(dir / "user_ids.tsv", set.user_ids);
  write_id_map(dir / "item_ids.tsv", set.item_ids);
}

hypergraph::InteractionSet read_dataset_file(const std::filesystem::path& dir,
                                             const std::string& filename) {
  return hypergraph::interaction_set_from_indexed(
      read_interactions(dir / filename), read_id_map(dir / "user_ids.tsv"),
      read_id_map(dir / "item_ids.tsv"));
}

std::string file_digest(const std::filesystem::path& path) {
  const std::string bytes = read_whole_file(path);
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016" PRIx64, fnv1a64(bytes));
  return std::string(buf);
}

std::vector<std::pair<std::string, std::string>> parse_feedback(
    const std::filesystem::path& path, const std::string& format) {
  if (format != "tsv" && format != "movielens") {
    throw std::invalid_argument("unknown feedback format: " + format);
  }
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw CacheError("cannot open feedback file: " + path.string());
  }
  const std::string sep = format == "tsv" ? "\t" : "::";
  std::vector<std::pair<std::string, std::string>> raw;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') {
      line.pop_back();
    }
    if (line.empty()) {
      continue;
    }
    const auto first = line.find(sep);
    if (first == std::string::npos || first == 0) {
      throw ParseError("malformed record at line " + std::to_string(line_no) +
                       " of " + path.string());
    }
    auto second = line.find(sep, first + sep.size());
    if (second == std::string::npos) {
      second = line.size();
    }
    const std::string user = line.substr(0, first);
    const std::string item =
        line.substr(first + sep.size(), second - first - sep.size());
    if (item.empty()) {
      throw ParseError("empty item id at line " + std::to_string(line_no) +
                       " of " + path.string());
    }
    raw.emplace_back(user, item);
  }
  return raw;
}

void write_eigen_cache(const std::filesystem::path& path,
                       const EigenCacheMeta& meta,
                       const linalg::SpectralBasis& basis) {
  if (basis.vectors.rows() != meta.dim || basis.vectors.cols() != meta.count ||
      basis.frequencies.size() != meta.count) {
    throw std::invalid_argument("eigen cache meta does not match basis");
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw CacheError("cannot open for writing: " + path.string());
  }
  char f_repr[64];
  std::snprintf(f_repr, sizeof(f_repr), "%.17g", meta.cutoff_ratio);
  out << "LCFB1 " << meta.digest << ' ' << meta.side << ' ' << f_repr << ' '
      << meta.dim << ' ' << meta.count << '\n';
  out.write(reinterpret_cast<const char*>(basis.frequencies.data()),
            static_cast<std::streamsize>(sizeof(double) * meta.count));
  // Column-major: one eigenvector after another, matching Eigen's layout.
  out.write(reinterpret_cast<const char*>(basis.vectors.data()),
            static_cast<std::streamsize>(sizeof(double) * meta.dim *
                                         meta.count));
  if (!out) {
    throw CacheError("short write on eigen cache: " + path.string());
  }
}

namespace {

EigenCacheMeta parse_cache_header(std::istream& in,
                                  const std::filesystem::path& path) {
  std::string header;
  std::getline(in, header);
  std::istringstream hs(header);
  std::string magic;
  EigenCacheMeta meta;
  hs >> magic >> meta.digest >> meta.side >> meta.cutoff_ratio >> meta.dim >>
      meta.count;
  if (!hs || magic != "LCFB1" || meta.dim < 1 || meta.count < 1 ||
      meta.count > meta.dim || (meta.side != "user" && meta.side != "item")) {
    throw CacheError("bad eigen cache header: " + path.string());
  }
  return meta;
}

}  // namespace

EigenCacheMeta read_eigen_cache_meta(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw CacheError("cannot open eigen cache: " + path.string());
  }
  return parse_cache_header(in, path);
}

linalg::SpectralBasis read_eigen_cache(const std::filesystem::path& path,
                                       EigenCacheMeta* meta_out) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw CacheError("cannot open eigen cache: " + path.string());
  }
  const EigenCacheMeta meta = parse_cache_header(in, path);
  linalg::SpectralBasis basis;
  basis.frequencies.resize(meta.count);
  basis.vectors.resize(meta.dim, meta.count);
  in.read(reinterpret_cast<char*>(basis.frequencies.data()),
          static_cast<std::streamsize>(sizeof(double) * meta.count));
  in.read(reinterpret_cast<char*>(basis.vectors.data()),
          static_cast<std::streamsize>(sizeof(double) * meta.dim * meta.count));
  if (!in) {
    throw CacheError("truncated eigen cache: " + path.string());
  }
  if (meta_out != nullptr) {
    *meta_out = meta;
  }
  return basis;
}

std::map<std::string, std::string> read_config_file(
    const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw CacheError("cannot open config file: " + path.string());
  }
  std::map<std::string, std::string> config;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') {
      line.pop_back();
    }
    const auto hash = line.find('#');
    if (hash != std::string::npos) {
      line.resize(hash);
    }
    // trim
    const auto begin = line.find_first_not_of(" \t");
    if (begin == std::string::npos) {
      continue;
    }
    const auto end = line.find_last_not_of(" \t");
    line = line.substr(begin, end - begin + 1);
    const auto eq = line.find('=');
    if (eq == std::string::npos || eq == 0) {
      throw ParseError("expected key=value at line " +
                       std::to_string(line_no) + " of " + path.string());
    }
    auto strip = [](std::string s) {
      const auto b = s.find_first_not_of(" \t");
      if (b == std::string::npos) {
        return std::string();
      }
      const auto e = s.find_last_not_of(" \t");
      return s.substr(b, e - b + 1);
    };
    config[strip(line.substr(0, eq))] = strip(line.substr(eq + 1));
  }
  return config;
}

std::string config_digest(const std::map<std::string, std::string>& config) {
  std::string canonical;
  for (const auto& [key, value] : config) {
    canonical += key;
    canonical += '=';
    canonical += value;
    canonical += '\n';
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016" PRIx64, fnv1a64(canonical));
  return std::string(buf);
}

}  // namespace lcfn::io
