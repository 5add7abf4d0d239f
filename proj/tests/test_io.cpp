#include <doctest.h>

#include <filesystem>
#include <random>
#include <sstream>

#include "oracles.hpp"
#include "sentinel/error.hpp"
#include "sentinel/io.hpp"

using namespace sentinel;

namespace {

Dataset random_dataset(std::mt19937_64& rng, std::size_t m, std::size_t n) {
  Dataset ds;
  ds.matrix = SparseBinaryMatrix::from_dense(oracle::random_dense(rng, m, n, 0.2));
  for (std::size_t i = 0; i < m; ++i) {
    RowMeta meta;
    const auto kind = rng() % 3;
    meta.environment = kind == 0 ? Environment::Enterprise : Environment::Sandbox;
    ds.labels.push_back(kind == 1 ? 1 : -1);
    if (kind == 1) {
      meta.family = "trojan.win32.f" + std::to_string(rng() % 7);
      if (rng() % 4) meta.compile_year = 1990 + static_cast<int>(rng() % 30);
    }
    meta.sample_id = "id-" + std::to_string(rng() % 100000);
    ds.meta.push_back(meta);
  }
  return ds;
}

}  // namespace

TEST_CASE("dataset text round trip") {
  std::mt19937_64 rng(1);
  auto ds = random_dataset(rng, 40, 25);
  std::stringstream ss;
  write_dataset(ss, ds);
  const auto text = ss.str();
  CHECK(text.rfind("40 25 ", 0) == 0);
  auto back = read_dataset(ss);
  CHECK(back.matrix == ds.matrix);
  CHECK(back.labels == ds.labels);
  for (std::size_t i = 0; i < ds.rows(); ++i) {
    CHECK(back.meta[i].environment == ds.meta[i].environment);
    CHECK(back.meta[i].family == ds.meta[i].family);
    CHECK(back.meta[i].compile_year == ds.meta[i].compile_year);
  }
  std::stringstream again;
  write_dataset(again, back);
  CHECK(again.str() == text);
}

TEST_CASE("dataset files keep sample ids") {
  std::mt19937_64 rng(2);
  auto ds = random_dataset(rng, 15, 8);
  const auto dir = std::filesystem::temp_directory_path() / "sentinel_io_test";
  std::filesystem::create_directories(dir);
  save_dataset(dir / "d.tsv", ds);
  auto back = load_dataset(dir / "d.tsv");
  for (std::size_t i = 0; i < ds.rows(); ++i) CHECK(back.meta[i] == ds.meta[i]);
  std::filesystem::remove_all(dir);
  CHECK_THROWS_AS(load_dataset(dir / "missing.tsv"), DataError);
}

TEST_CASE("malformed dataset files") {
  auto bad = [](const std::string& text) {
    std::istringstream in(text);
    CHECK_THROWS_AS(read_dataset(in), DataError);
  };
  bad("");
  bad("1 2\n");
  bad("2 3 0.1\n1\tsandbox\tUNKNOWN\tNA\t0\n");
  bad("1 3 0.1\n2\tsandbox\tUNKNOWN\tNA\t0\n");
  bad("1 3 0.1\n1\tmoon\tUNKNOWN\tNA\t0\n");
  bad("1 3 0.1\n1\tsandbox\tUNKNOWN\tsoon\t0\n");
  bad("1 3 0.1\n1\tsandbox\tUNKNOWN\tNA\t3\n");
  bad("1 3 0.1\n1\tsandbox\tUNKNOWN\tNA\t2 1\n");
  bad("1 3 0.1\n1\tsandbox\tUNKNOWN\tNA\n");

  std::istringstream empty_row("1 3 0\n-1\tenterprise\tUNKNOWN\tNA\t\n");
  auto ds = read_dataset(empty_row);
  CHECK(ds.rows() == 1);
  CHECK(ds.matrix.row(0).empty());
}

TEST_CASE("vocabulary round trip") {
  FeatureVocabulary v;
  v.add(QGram{{{ActionKind::FileWrite, "C:\\users\\<user>\\a.txt"}}});
  v.add(QGram{{{ActionKind::Execute, "C:\\a|b.exe"}, {ActionKind::ProcessSpawn, "cmd.exe"}}});
  v.add(QGram{{{ActionKind::RegistryWrite, "HKLM\\x:y"}, {ActionKind::RegistryDelete, "HKCU\\z"},
               {ActionKind::FileDelete, "C:\\t\\~tmp"}}});
  std::stringstream ss;
  write_vocabulary(ss, v);
  auto back = read_vocabulary(ss);
  REQUIRE(back.size() == 3);
  for (std::uint32_t j = 0; j < 3; ++j) {
    CHECK(back.gram(j) == v.gram(j));
    CHECK(back.index_of(v.gram(j)) == j);
  }
  const auto first_line = ss.str().substr(0, ss.str().find('\n'));
  CHECK(first_line.rfind("0\t1\tFileWrite:", 0) == 0);

  std::istringstream gap("0\t1\tFileWrite:a\n2\t1\tFileWrite:b\n");
  CHECK_THROWS_AS(read_vocabulary(gap), DataError);
  std::istringstream wrong_q("0\t2\tFileWrite:a\n");
  CHECK_THROWS_AS(read_vocabulary(wrong_q), DataError);
}
