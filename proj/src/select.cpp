#include "sentinel/select.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <istream>
#include <numeric>
#include <ostream>

#include "sentinel/error.hpp"
#include "sentinel/util.hpp"

namespace sentinel {

namespace {

void check_labels(const SparseBinaryMatrix& matrix, std::span<const std::int8_t> labels) {
  if (labels.size() != matrix.rows()) {
    throw DataError("label count " + std::to_string(labels.size()) + " does not match matrix rows " +
                    std::to_string(matrix.rows()));
  }
  if (labels.empty()) throw DataError("correlation needs at least one sample");
  for (auto y : labels) {
    if (y != 1 && y != -1) throw DataError("labels must be -1 or +1");
  }
}

std::vector<double> finish(const std::vector<std::int64_t>& dot, const std::vector<std::int64_t>& count,
                           std::size_t rows) {
  const double y_norm = std::sqrt(static_cast<double>(rows));
  std::vector<double> c(dot.size(), 0.0);
  for (std::size_t j = 0; j < dot.size(); ++j) {
    if (count[j] == 0) continue;
    c[j] = static_cast<double>(dot[j]) / (std::sqrt(static_cast<double>(count[j])) * y_norm);
  }
  return c;
}

}  // namespace

std::vector<double> uncentered_correlation(const SparseBinaryMatrix& matrix, std::span<const std::int8_t> labels) {
  check_labels(matrix, labels);
  const std::size_t n = matrix.cols();
  std::vector<std::int64_t> dot(n, 0), count(n, 0);
  const auto m = static_cast<std::int64_t>(matrix.rows());
#pragma omp parallel
  {
    std::vector<std::int64_t> local_dot(n, 0), local_count(n, 0);
#pragma omp for schedule(static) nowait
    for (std::int64_t i = 0; i < m; ++i) {
      const std::int64_t y = labels[i];
      for (auto j : matrix.row(i)) {
        local_dot[j] += y;
        ++local_count[j];
      }
    }
#pragma omp critical
    for (std::size_t j = 0; j < n; ++j) {
      dot[j] += local_dot[j];
      count[j] += local_count[j];
    }
  }
  return finish(dot, count, matrix.rows());
}

namespace serial {
std::vector<double> uncentered_correlation(const SparseBinaryMatrix& matrix, std::span<const std::int8_t> labels) {
  check_labels(matrix, labels);
  std::vector<std::int64_t> dot(matrix.cols(), 0), count(matrix.cols(), 0);
  for (std::size_t i = 0; i < matrix.rows(); ++i) {
    for (auto j : matrix.row(i)) {
      dot[j] += labels[i];
      ++count[j];
    }
  }
  return finish(dot, count, matrix.rows());
}
}  // namespace serial

FeatureSelection top_k_select(std::span<const double> scores, std::size_t k) {
  if (k == 0) throw UsageError("K must be at least 1");
  std::vector<std::uint32_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0U);
  const auto better = [&](std::uint32_t a, std::uint32_t b) {
    const double fa = std::abs(scores[a]);
    const double fb = std::abs(scores[b]);
    return fa != fb ? fa > fb : a < b;
  };
  const std::size_t keep = std::min(k, order.size());
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(keep), order.end(), better);
  order.resize(keep);
  std::sort(order.begin(), order.end());

  FeatureSelection sel;
  sel.kept = std::move(order);
  sel.old_to_new.assign(scores.size(), -1);
  for (std::size_t t = 0; t < sel.kept.size(); ++t) {
    sel.old_to_new[sel.kept[t]] = static_cast<std::int64_t>(t);
    sel.scores.push_back(scores[sel.kept[t]]);
  }
  return sel;
}

void write_selection(std::ostream& out, const FeatureSelection& selection) {
  for (std::size_t t = 0; t < selection.kept.size(); ++t) {
    out << t << '\t' << selection.kept[t] << '\t' << format_double(selection.scores[t]) << '\n';
  }
}

FeatureSelection read_selection(std::istream& in, std::size_t old_feature_count) {
  FeatureSelection sel;
  sel.old_to_new.assign(old_feature_count, -1);
  std::string line;
  std::size_t line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (trim(line).empty()) continue;
    const auto f = split(line, '\t');
    const std::string where = "selection line " + std::to_string(line_number);
    if (f.size() != 3) throw DataError(where + ": expected new_index<TAB>old_index<TAB>c_j");
    auto idx = parse_int(f[0]);
    auto old = parse_int(f[1]);
    auto c = parse_double(f[2]);
    if (!idx || !old || !c || *idx != static_cast<std::int64_t>(sel.kept.size()) || *old < 0 ||
        static_cast<std::size_t>(*old) >= old_feature_count) {
      throw DataError(where + ": bad index or score");
    }
    sel.kept.push_back(static_cast<std::uint32_t>(*old));
    sel.old_to_new[*old] = *idx;
    sel.scores.push_back(*c);
  }
  return sel;
}

// ---------------------------------------------------------------------------

ApproximateCounter::ApproximateCounter(Config config) : config_(config) {
  if (!config_.exact) {
    if (config_.width == 0 || config_.depth == 0) throw UsageError("sketch width and depth must be positive");
    for (std::size_t r = 0; r < config_.depth; ++r) seeds_.push_back(mix64(config_.seed + 0x1000 * (r + 1)));
    table_.assign(config_.width * config_.depth, 0);
  }
}

std::size_t ApproximateCounter::cell(std::size_t row, std::uint64_t key) const {
  return row * config_.width + static_cast<std::size_t>(mix64(key ^ seeds_[row]) % config_.width);
}

void ApproximateCounter::add(std::uint64_t key, std::uint32_t count) {
  if (config_.exact) {
    exact_[key] += count;
    return;
  }
  for (std::size_t r = 0; r < config_.depth; ++r) table_[cell(r, key)] += count;
}

std::uint64_t ApproximateCounter::estimate(std::uint64_t key) const {
  if (config_.exact) {
    auto it = exact_.find(key);
    return it == exact_.end() ? 0 : it->second;
  }
  std::uint64_t best = ~0ULL;
  for (std::size_t r = 0; r < config_.depth; ++r) best = std::min(best, table_[cell(r, key)]);
  return best;
}

void ApproximateCounter::merge(const ApproximateCounter& other) {
  if (other.config_.exact != config_.exact || other.config_.width != config_.width ||
      other.config_.depth != config_.depth || other.config_.seed != config_.seed) {
    throw std::invalid_argument("cannot merge counters with different configurations");
  }
  if (config_.exact) {
    for (const auto& [k, v] : other.exact_) exact_[k] += v;
    return;
  }
  for (std::size_t c = 0; c < table_.size(); ++c) table_[c] += other.table_[c];
}

std::unordered_set<std::uint64_t> prefilter_by_count(const GramStream& stream, std::uint64_t threshold,
                                                     ApproximateCounter::Config config) {
  if (threshold == 0) throw UsageError("prefilter threshold must be at least 1");
  ApproximateCounter counter(config);
  stream([&](std::uint64_t key) { counter.add(key); });
  std::unordered_set<std::uint64_t> approved;
  stream([&](std::uint64_t key) {
    if (counter.estimate(key) >= threshold) approved.insert(key);
  });
  return approved;
}

std::uint64_t gram_key(const PackedGram& gram, const KeyInterner& interner) {
  std::uint64_t h = gram.length;
  for (std::size_t t = 0; t < gram.length; ++t) h = mix64(h ^ interner.key(gram.ids[t]).hash());
  return h;
}

}  // namespace sentinel
