#include "sentinel/io.hpp"

#include <fstream>
#include <istream>
#include <ostream>

#include "sentinel/error.hpp"
#include "sentinel/util.hpp"

namespace sentinel {

void write_dataset(std::ostream& out, const Dataset& ds) {
  out << ds.matrix.rows() << ' ' << ds.matrix.cols() << ' ' << format_double(ds.matrix.density()) << '\n';
  for (std::size_t i = 0; i < ds.rows(); ++i) {
    const auto& m = ds.meta[i];
    out << static_cast<int>(ds.labels[i]) << '\t' << to_string(m.environment) << '\t' << m.family << '\t'
        << (m.compile_year ? std::to_string(*m.compile_year) : std::string("NA")) << '\t';
    bool first = true;
    for (auto j : ds.matrix.row(i)) {
      if (!first) out << ' ';
      out << j;
      first = false;
    }
    out << '\n';
  }
}

Dataset read_dataset(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw DataError("dataset: missing header");
  const auto head = split(trim(line), ' ');
  auto m = head.size() == 3 ? parse_int(head[0]) : std::nullopt;
  auto n = head.size() == 3 ? parse_int(head[1]) : std::nullopt;
  if (!m || !n || *m < 0 || *n < 0 || !parse_double(head[2])) throw DataError("dataset: header must be 'M N density'");

  Dataset ds;
  ds.matrix = SparseBinaryMatrix(static_cast<std::size_t>(*n));
  std::vector<std::uint32_t> cols;
  std::size_t line_number = 1;
  while (std::getline(in, line)) {
    ++line_number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::string where = "dataset line " + std::to_string(line_number);
    const auto f = split(line, '\t');
    if (f.size() != 5) throw DataError(where + ": expected 5 tab-separated fields");
    auto label = parse_int(f[0]);
    if (!label || (*label != 1 && *label != -1)) throw DataError(where + ": label must be 1 or -1");
    auto env = parse_environment(f[1]);
    if (!env) throw DataError(where + ": unknown source '" + std::string(f[1]) + "'");
    RowMeta meta;
    meta.environment = *env;
    meta.family = std::string(f[2]);
    if (f[3] != "NA") {
      auto y = parse_int(f[3]);
      if (!y) throw DataError(where + ": compile_year must be an integer or NA");
      meta.compile_year = static_cast<int>(*y);
    }
    cols.clear();
    if (!trim(f[4]).empty()) {
      for (auto tok : split(trim(f[4]), ' ')) {
        auto j = parse_int(tok);
        if (!j || *j < 0 || *j >= *n) throw DataError(where + ": bad column index '" + std::string(tok) + "'");
        cols.push_back(static_cast<std::uint32_t>(*j));
      }
    }
    try {
      ds.matrix.add_row(cols);
    } catch (const std::exception& e) {
      throw DataError(where + ": " + e.what());
    }
    meta.sample_id = "row" + std::to_string(ds.labels.size());
    ds.labels.push_back(static_cast<std::int8_t>(*label));
    ds.meta.push_back(std::move(meta));
  }
  if (ds.rows() != static_cast<std::size_t>(*m)) {
    throw DataError("dataset: header says " + std::to_string(*m) + " rows, found " + std::to_string(ds.rows()));
  }
  return ds;
}

void save_dataset(const std::filesystem::path& path, const Dataset& dataset) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  write_dataset(out, dataset);
  std::ofstream ids(path.string() + ".ids");
  for (const auto& m : dataset.meta) ids << m.sample_id << '\n';
}

Dataset load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open dataset " + path.string());
  Dataset ds = read_dataset(in);
  std::ifstream ids(path.string() + ".ids");
  if (ids) {
    std::string line;
    for (std::size_t i = 0; i < ds.rows(); ++i) {
      if (!std::getline(ids, line)) throw DataError(path.string() + ".ids: fewer ids than rows");
      ds.meta[i].sample_id = line;
    }
  }
  return ds;
}

void write_vocabulary(std::ostream& out, const FeatureVocabulary& vocab) {
  for (std::uint32_t j = 0; j < vocab.size(); ++j) {
    const auto g = vocab.gram(j);
    out << j << '\t' << g.length() << '\t' << g.to_string() << '\n';
  }
}

FeatureVocabulary read_vocabulary(std::istream& in) {
  FeatureVocabulary vocab;
  std::string line;
  std::size_t line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::string where = "vocabulary line " + std::to_string(line_number);
    auto t1 = line.find('\t');
    auto t2 = t1 == std::string::npos ? t1 : line.find('\t', t1 + 1);
    if (t2 == std::string::npos) throw DataError(where + ": expected index<TAB>q<TAB>gram");
    auto idx = parse_int(std::string_view(line).substr(0, t1));
    auto q = parse_int(std::string_view(line).substr(t1 + 1, t2 - t1 - 1));
    auto gram = QGram::parse(std::string_view(line).substr(t2 + 1));
    if (!idx || *idx != static_cast<std::int64_t>(vocab.size())) throw DataError(where + ": indices must be dense and ordered");
    if (!gram || !q || static_cast<std::size_t>(*q) != gram->length()) throw DataError(where + ": malformed gram");
    if (vocab.add(*gram) != static_cast<std::uint32_t>(*idx)) throw DataError(where + ": duplicate gram");
  }
  vocab.freeze();
  return vocab;
}

}  // namespace sentinel
