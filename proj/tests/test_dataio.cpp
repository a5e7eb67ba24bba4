#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include <unistd.h>

#include "lcfn/dataio.hpp"
#include "lcfn/errors.hpp"
#include "lcfn/rng.hpp"

using lcfn::CacheError;
using lcfn::Matrix;
using lcfn::ParseError;
using lcfn::Rng;
using lcfn::Vector;
namespace io = lcfn::io;

namespace {

struct TempDir {
  std::filesystem::path path;
  TempDir() {
    path = std::filesystem::temp_directory_path() /
           ("lcfn_io_test_" + std::to_string(::getpid()) + "_" +
            std::to_string(counter()++));
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
  static int& counter() {
    static int c = 0;
    return c;
  }
};

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
}

bool mentions_line(const std::exception& e, int line) {
  return std::string(e.what()).find("line " + std::to_string(line)) !=
         std::string::npos;
}

}  // namespace

TEST_CASE("interaction files round-trip") {
  TempDir tmp;
  const std::vector<std::pair<int, int>> pairs = {{0, 0}, {0, 5}, {3, 2}};
  io::write_interactions(tmp.path / "x.tsv", pairs);
  CHECK(io::read_interactions(tmp.path / "x.tsv") == pairs);

  io::write_interactions(tmp.path / "empty.tsv", {});
  CHECK(io::read_interactions(tmp.path / "empty.tsv").empty());
}

TEST_CASE("interaction parse errors carry the line number") {
  TempDir tmp;
  write_text(tmp.path / "bad.tsv", "0\t1\nnot a pair\n");
  try {
    (void)io::read_interactions(tmp.path / "bad.tsv");
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(mentions_line(e, 2));
  }

  write_text(tmp.path / "bad2.tsv", "0\t1\n2\tx\n");
  CHECK_THROWS_AS((void)io::read_interactions(tmp.path / "bad2.tsv"),
                  ParseError);
  CHECK_THROWS_AS((void)io::read_interactions(tmp.path / "missing.tsv"),
                  CacheError);
}

TEST_CASE("id maps round-trip including empty and odd ids") {
  TempDir tmp;
  const std::vector<std::string> ids = {"alice", "u 42", "x"};
  io::write_id_map(tmp.path / "ids.tsv", ids);
  CHECK(io::read_id_map(tmp.path / "ids.tsv") == ids);
}

TEST_CASE("dataset directories round-trip") {
  TempDir tmp;
  lcfn::hypergraph::InteractionSet set;
  set.user_ids = {"a", "b"};
  set.item_ids = {"x", "y", "z"};
  set.pairs = {{0, 0}, {0, 2}, {1, 1}};
  io::write_dataset(tmp.path, set);

  const auto loaded = io::read_dataset_file(tmp.path, "interactions.tsv");
  CHECK(loaded.pairs == set.pairs);
  CHECK(loaded.user_ids == set.user_ids);
  CHECK(loaded.item_ids == set.item_ids);
}

TEST_CASE("file digest is the 64-bit fnv of the bytes") {
  TempDir tmp;
  write_text(tmp.path / "a.txt", "hello\n");
  CHECK(io::file_digest(tmp.path / "a.txt") == "a9bc80cca21f28b3");
  write_text(tmp.path / "b.tsv", "0\t1\n");
  CHECK(io::file_digest(tmp.path / "b.tsv") == "ffbf22fa0e7b6269");
  write_text(tmp.path / "b.tsv", "0\t2\n");
  CHECK(io::file_digest(tmp.path / "b.tsv") != "ffbf22fa0e7b6269");
  CHECK_THROWS_AS((void)io::file_digest(tmp.path / "nope"), CacheError);
}

TEST_CASE("feedback parsing handles both formats") {
  TempDir tmp;
  write_text(tmp.path / "log.tsv",
             "u1\ti1\nu2\ti2\textra\tcolumns\n\nu1\ti3\r\n");
  const auto tsv = io::parse_feedback(tmp.path / "log.tsv", "tsv");
  REQUIRE(tsv.size() == 3);
  CHECK(tsv[0] == std::pair<std::string, std::string>{"u1", "i1"});
  CHECK(tsv[1] == std::pair<std::string, std::string>{"u2", "i2"});
  CHECK(tsv[2] == std::pair<std::string, std::string>{"u1", "i3"});

  write_text(tmp.path / "ratings.dat",
             "1::32::4::978300019\n6::Movie Title (1999)::5::978300055\n");
  const auto ml = io::parse_feedback(tmp.path / "ratings.dat", "movielens");
  REQUIRE(ml.size() == 2);
  CHECK(ml[0] == std::pair<std::string, std::string>{"1", "32"});
  CHECK(ml[1] ==
        std::pair<std::string, std::string>{"6", "Movie Title (1999)"});

  CHECK_THROWS_AS(
      (void)io::parse_feedback(tmp.path / "log.tsv", "csv"),
      std::invalid_argument);

  write_text(tmp.path / "bad.tsv", "u1\ti1\njust_one_field\n");
  try {
    (void)io::parse_feedback(tmp.path / "bad.tsv", "tsv");
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(mentions_line(e, 2));
  }
}

TEST_CASE("eigen caches round-trip bit-exactly") {
  TempDir tmp;
  Rng rng(5);
  lcfn::linalg::SpectralBasis basis;
  basis.vectors.resize(7, 3);
  for (int i = 0; i < basis.vectors.size(); ++i) {
    basis.vectors.data()[i] = rng.normal();
  }
  basis.frequencies.resize(3);
  basis.frequencies << 0.0, 0.123456789012345678, 1.0 / 3.0;

  const io::EigenCacheMeta meta{"deadbeefdeadbeef", "user", 0.005, 7, 3};
  io::write_eigen_cache(tmp.path / "u.lcfb", meta, basis);

  const auto probed = io::read_eigen_cache_meta(tmp.path / "u.lcfb");
  CHECK(probed.digest == "deadbeefdeadbeef");
  CHECK(probed.side == "user");
  CHECK(probed.cutoff_ratio == 0.005);
  CHECK(probed.dim == 7);
  CHECK(probed.count == 3);

  io::EigenCacheMeta meta_out;
  const auto loaded = io::read_eigen_cache(tmp.path / "u.lcfb", &meta_out);
  CHECK(loaded.vectors == basis.vectors);
  CHECK(loaded.frequencies == basis.frequencies);
  CHECK(meta_out.side == "user");
}

TEST_CASE("eigen cache writer and reader reject inconsistencies") {
  TempDir tmp;
  lcfn::linalg::SpectralBasis basis;
  basis.vectors = Matrix::Zero(4, 2);
  basis.frequencies = Vector::Zero(2);

  CHECK_THROWS_AS(
      io::write_eigen_cache(tmp.path / "x.lcfb",
                            {"d", "user", 0.1, 4, 3}, basis),
      std::invalid_argument);

  io::write_eigen_cache(tmp.path / "x.lcfb", {"d", "item", 0.1, 4, 2}, basis);
  const auto size = std::filesystem::file_size(tmp.path / "x.lcfb");
  std::filesystem::resize_file(tmp.path / "x.lcfb", size - 4);
  CHECK_THROWS_AS((void)io::read_eigen_cache(tmp.path / "x.lcfb"),
                  CacheError);

  write_text(tmp.path / "y.lcfb", "WRONG d user 0.1 4 2\n");
  CHECK_THROWS_AS((void)io::read_eigen_cache_meta(tmp.path / "y.lcfb"),
                  CacheError);
  write_text(tmp.path / "z.lcfb", "LCFB1 d sideways 0.1 4 2\n");
  CHECK_THROWS_AS((void)io::read_eigen_cache_meta(tmp.path / "z.lcfb"),
                  CacheError);
  CHECK_THROWS_AS((void)io::read_eigen_cache_meta(tmp.path / "missing"),
                  CacheError);
}

TEST_CASE("the cutoff ratio survives the cache header exactly") {
  TempDir tmp;
  lcfn::linalg::SpectralBasis basis;
  basis.vectors = Matrix::Zero(3, 1);
  basis.frequencies = Vector::Zero(1);
  // A value with no short decimal form.
  const double f = 0.1 + 0.2;
  io::write_eigen_cache(tmp.path / "f.lcfb", {"d", "user", f, 3, 1}, basis);
  CHECK(io::read_eigen_cache_meta(tmp.path / "f.lcfb").cutoff_ratio == f);
}

TEST_CASE("config files parse comments, blanks and overrides") {
  TempDir tmp;
  write_text(tmp.path / "run.conf",
             "# a comment\n"
             "\n"
             "  learning_rate = 0.01  # trailing comment\n"
             "epochs=40\n"
             "learning_rate=0.02\n");
  const auto config = io::read_config_file(tmp.path / "run.conf");
  REQUIRE(config.size() == 2);
  CHECK(config.at("learning_rate") == "0.02");  // later key wins
  CHECK(config.at("epochs") == "40");

  write_text(tmp.path / "bad.conf", "epochs=40\nthis has no equals\n");
  try {
    (void)io::read_config_file(tmp.path / "bad.conf");
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(mentions_line(e, 2));
  }
  CHECK_THROWS_AS((void)io::read_config_file(tmp.path / "missing.conf"),
                  CacheError);
}

TEST_CASE("config digests are stable and content-sensitive") {
  const std::map<std::string, std::string> a = {{"x", "1"}, {"y", "2"}};
  const std::map<std::string, std::string> b = {{"y", "2"}, {"x", "1"}};
  const std::map<std::string, std::string> c = {{"x", "1"}, {"y", "3"}};
  CHECK(io::config_digest(a) == io::config_digest(b));
  CHECK(io::config_digest(a) != io::config_digest(c));
  CHECK(io::config_digest(a).size() == 16);
}
