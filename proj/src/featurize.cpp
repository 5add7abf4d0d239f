#include "sentinel/featurize.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "sentinel/error.hpp"
#include "sentinel/util.hpp"

namespace sentinel {

std::uint64_t EventKey::hash() const {
  const char action_byte = static_cast<char>(action);
  return fnv1a64(target, fnv1a64(std::string_view(&action_byte, 1)));
}

std::string EventKey::to_string() const {
  return std::string(sentinel::to_string(action)) + ":" + escape_pipes(target);
}

std::uint64_t QGram::hash() const {
  std::uint64_t h = keys.size();
  for (const auto& k : keys) h = mix64(h ^ k.hash());
  return h;
}

std::string QGram::to_string() const {
  std::string out;
  for (std::size_t i = 0; i < keys.size(); ++i) {
    if (i) out += '|';
    out += keys[i].to_string();
  }
  return out;
}

std::optional<QGram> QGram::parse(std::string_view text) {
  QGram gram;
  std::string current;
  auto flush = [&]() -> bool {
    auto colon = current.find(':');
    if (colon == std::string::npos) return false;
    auto action = parse_action(std::string_view(current).substr(0, colon));
    if (!action || colon + 1 == current.size()) return false;
    gram.keys.push_back({*action, current.substr(colon + 1)});
    current.clear();
    return true;
  };
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (text[i] == '\\' && i + 1 < text.size() && text[i + 1] == '|') {
      current.push_back('|');
      ++i;
    } else if (text[i] == '|') {
      if (!flush()) return std::nullopt;
    } else {
      current.push_back(text[i]);
    }
  }
  if (!flush() || gram.keys.size() > 3) return std::nullopt;
  return gram;
}

QGramLengths::QGramLengths(std::initializer_list<int> lengths) : mask_(0) {
  for (int q : lengths) {
    if (q < 1 || q > 3) throw UsageError("q-gram length must be in {1,2,3}");
    mask_ |= 1U << (q - 1);
  }
}

QGramLengths QGramLengths::parse(std::string_view csv) {
  QGramLengths out({});
  for (auto part : split(csv, ',')) {
    auto q = parse_int(part);
    if (!q || *q < 1 || *q > 3) throw UsageError("q set must be a subset of {1,2,3}: '" + std::string(csv) + "'");
    out.mask_ |= 1U << (*q - 1);
  }
  if (out.mask_ == 0) throw UsageError("empty q set");
  return out;
}

std::string QGramLengths::to_string() const {
  std::string out;
  for (int q = 1; q <= 3; ++q) {
    if (!contains(q)) continue;
    if (!out.empty()) out += ',';
    out += std::to_string(q);
  }
  return out;
}

LogFeatureSet extract_qgrams(std::span<const EventKey> process_events, const QGramLengths& lengths) {
  LogFeatureSet grams;
  const std::size_t n = process_events.size();
  for (int q = 1; q <= 3; ++q) {
    if (!lengths.contains(q) || n < static_cast<std::size_t>(q)) continue;
    for (std::size_t i = 0; i + q <= n; ++i) {
      grams.insert(QGram{{process_events.begin() + i, process_events.begin() + i + q}});
    }
  }
  return grams;
}

LogFeatureSet featurize_log(const LogWindow& window, const QGramLengths& lengths) {
  LogFeatureSet all;
  for (const auto& [pid, events] : group_by_process(window)) {
    std::vector<EventKey> keys;
    keys.reserve(events.size());
    for (const auto& e : events) keys.push_back({e.action, e.target});
    all.merge(extract_qgrams(keys, lengths));
  }
  return all;
}

// ---------------------------------------------------------------------------

std::uint32_t KeyInterner::intern(const EventKey& key) {
  auto [it, inserted] = index_.try_emplace(key, static_cast<std::uint32_t>(keys_.size()));
  if (inserted) keys_.push_back(key);
  return it->second;
}

std::optional<std::uint32_t> KeyInterner::find(const EventKey& key) const {
  auto it = index_.find(key);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::size_t PackedGramHash::operator()(const PackedGram& g) const noexcept {
  std::uint64_t h = g.length;
  for (auto id : g.ids) h = mix64(h ^ id);
  return static_cast<std::size_t>(h);
}

PackedLog extract_packed(std::span<const std::uint32_t> key_ids, const QGramLengths& lengths) {
  PackedLog grams;
  const std::size_t n = key_ids.size();
  for (int q = 1; q <= 3; ++q) {
    if (!lengths.contains(q)) continue;
    for (std::size_t i = 0; i + q <= n; ++i) {
      PackedGram g;
      g.length = static_cast<std::uint8_t>(q);
      bool known = true;
      for (int t = 0; t < q; ++t) {
        g.ids[t] = key_ids[i + t];
        known = known && g.ids[t] != kUnknownKey;
      }
      if (known) grams.push_back(g);
    }
  }
  std::sort(grams.begin(), grams.end());
  grams.erase(std::unique(grams.begin(), grams.end()), grams.end());
  return grams;
}

namespace {

using ProcessSequences = std::vector<std::vector<std::uint32_t>>;

template <typename KeyId>
ProcessSequences encode_window(const LogWindow& window, KeyId&& key_id) {
  ProcessSequences out;
  for (const auto& [pid, events] : group_by_process(window)) {
    std::vector<std::uint32_t> ids;
    ids.reserve(events.size());
    for (const auto& e : events) ids.push_back(key_id(EventKey{e.action, e.target}));
    out.push_back(std::move(ids));
  }
  return out;
}

PackedLog extract_window(const ProcessSequences& sequences, const QGramLengths& lengths) {
  PackedLog all;
  for (const auto& seq : sequences) {
    auto grams = extract_packed(seq, lengths);
    all.insert(all.end(), grams.begin(), grams.end());
  }
  std::sort(all.begin(), all.end());
  all.erase(std::unique(all.begin(), all.end()), all.end());
  return all;
}

std::vector<ProcessSequences> encode_build(std::span<const LogWindow> windows, KeyInterner& interner) {
  std::vector<ProcessSequences> encoded;
  encoded.reserve(windows.size());
  for (const auto& w : windows) {
    encoded.push_back(encode_window(w, [&](const EventKey& k) { return interner.intern(k); }));
  }
  return encoded;
}

}  // namespace

std::vector<PackedLog> Featurizer::featurize(std::span<const LogWindow> windows, KeyInterner& interner) const {
  const auto encoded = encode_build(windows, interner);
  std::vector<PackedLog> logs(encoded.size());
  const auto n = static_cast<std::int64_t>(encoded.size());
#pragma omp parallel for schedule(dynamic, 16)
  for (std::int64_t i = 0; i < n; ++i) logs[i] = extract_window(encoded[i], lengths_);
  return logs;
}

std::vector<PackedLog> Featurizer::featurize_frozen(std::span<const LogWindow> windows,
                                                    const KeyInterner& interner) const {
  std::vector<PackedLog> logs(windows.size());
  const auto n = static_cast<std::int64_t>(windows.size());
#pragma omp parallel for schedule(dynamic, 16)
  for (std::int64_t i = 0; i < n; ++i) {
    auto seq = encode_window(windows[i], [&](const EventKey& k) { return interner.find(k).value_or(kUnknownKey); });
    logs[i] = extract_window(seq, lengths_);
  }
  return logs;
}

namespace serial {
std::vector<PackedLog> featurize(std::span<const LogWindow> windows, KeyInterner& interner,
                                 const QGramLengths& lengths) {
  const auto encoded = encode_build(windows, interner);
  std::vector<PackedLog> logs;
  logs.reserve(encoded.size());
  for (const auto& seq : encoded) logs.push_back(extract_window(seq, lengths));
  return logs;
}
}  // namespace serial

// ---------------------------------------------------------------------------

PackedGram FeatureVocabulary::pack(const QGram& gram, bool intern) {
  PackedGram g;
  if (gram.keys.empty() || gram.keys.size() > 3) throw std::invalid_argument("q-gram length must be 1..3");
  g.length = static_cast<std::uint8_t>(gram.keys.size());
  for (std::size_t t = 0; t < gram.keys.size(); ++t) {
    g.ids[t] = intern ? interner_.intern(gram.keys[t]) : interner_.find(gram.keys[t]).value_or(kUnknownKey);
  }
  return g;
}

std::optional<std::uint32_t> FeatureVocabulary::index_of(const QGram& gram) const {
  if (gram.keys.empty() || gram.keys.size() > 3) return std::nullopt;
  PackedGram g;
  g.length = static_cast<std::uint8_t>(gram.keys.size());
  for (std::size_t t = 0; t < gram.keys.size(); ++t) {
    auto id = interner_.find(gram.keys[t]);
    if (!id) return std::nullopt;
    g.ids[t] = *id;
  }
  return index_of(g);
}

std::optional<std::uint32_t> FeatureVocabulary::index_of(const PackedGram& gram) const {
  auto it = index_.find(gram);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::uint32_t FeatureVocabulary::add(const PackedGram& gram) {
  if (auto existing = index_of(gram)) return *existing;
  if (frozen_) throw std::logic_error("vocabulary is frozen");
  const auto idx = static_cast<std::uint32_t>(grams_.size());
  grams_.push_back(gram);
  index_.emplace(gram, idx);
  return idx;
}

std::uint32_t FeatureVocabulary::add(const QGram& gram) {
  if (auto existing = index_of(gram)) return *existing;
  if (frozen_) throw std::logic_error("vocabulary is frozen");
  return add(pack(gram, true));
}

QGram FeatureVocabulary::gram(std::uint32_t index) const {
  const auto& g = grams_.at(index);
  QGram out;
  for (std::size_t t = 0; t < g.length; ++t) out.keys.push_back(interner_.key(g.ids[t]));
  return out;
}

FeatureVocabulary FeatureVocabulary::restrict(std::span<const std::uint32_t> kept) const {
  FeatureVocabulary out;
  for (auto old : kept) out.add(gram(old));
  out.frozen_ = frozen_;
  return out;
}

// ---------------------------------------------------------------------------

void SparseBinaryMatrix::add_row(std::span<const std::uint32_t> columns) {
  for (std::size_t t = 0; t < columns.size(); ++t) {
    if (columns[t] >= cols_) throw std::out_of_range("column index out of range");
    if (t > 0 && columns[t] <= columns[t - 1]) throw std::invalid_argument("row columns must be strictly increasing");
  }
  col_idx_.insert(col_idx_.end(), columns.begin(), columns.end());
  row_ptr_.push_back(col_idx_.size());
}

void SparseBinaryMatrix::set_cols(std::size_t cols) {
  for (auto c : col_idx_) {
    if (c >= cols) throw std::invalid_argument("set_cols would drop stored entries");
  }
  cols_ = cols;
}

double SparseBinaryMatrix::density() const {
  const double cells = static_cast<double>(rows()) * static_cast<double>(cols_);
  return cells > 0 ? static_cast<double>(nnz()) / cells : 0.0;
}

bool SparseBinaryMatrix::get(std::size_t i, std::uint32_t j) const {
  auto r = row(i);
  return std::binary_search(r.begin(), r.end(), j);
}

std::vector<std::uint32_t> SparseBinaryMatrix::column_counts() const {
  std::vector<std::size_t> all(rows());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  return column_counts(all);
}

std::vector<std::uint32_t> SparseBinaryMatrix::column_counts(std::span<const std::size_t> rows) const {
  std::vector<std::uint32_t> counts(cols_, 0);
  const auto n = static_cast<std::int64_t>(rows.size());
#pragma omp parallel
  {
    std::vector<std::uint32_t> local(cols_, 0);
#pragma omp for schedule(static) nowait
    for (std::int64_t t = 0; t < n; ++t) {
      for (auto j : row(rows[t])) ++local[j];
    }
    // Integer sums: the merge order cannot change the result.
#pragma omp critical
    for (std::size_t j = 0; j < cols_; ++j) counts[j] += local[j];
  }
  return counts;
}

namespace serial {
std::vector<std::uint32_t> column_counts(const SparseBinaryMatrix& m, std::span<const std::size_t> rows) {
  std::vector<std::uint32_t> counts(m.cols(), 0);
  for (auto i : rows) {
    for (auto j : m.row(i)) ++counts[j];
  }
  return counts;
}
}  // namespace serial

SparseBinaryMatrix SparseBinaryMatrix::select_rows(std::span<const std::size_t> rows) const {
  SparseBinaryMatrix out(cols_);
  for (auto i : rows) out.add_row(row(i));
  return out;
}

SparseBinaryMatrix SparseBinaryMatrix::select_columns(std::span<const std::uint32_t> kept) const {
  std::vector<std::int64_t> remap(cols_, -1);
  for (std::size_t t = 0; t < kept.size(); ++t) remap.at(kept[t]) = static_cast<std::int64_t>(t);
  SparseBinaryMatrix out(kept.size());
  std::vector<std::uint32_t> buf;
  for (std::size_t i = 0; i < rows(); ++i) {
    buf.clear();
    for (auto j : row(i)) {
      if (remap[j] >= 0) buf.push_back(static_cast<std::uint32_t>(remap[j]));
    }
    std::sort(buf.begin(), buf.end());
    out.add_row(buf);
  }
  return out;
}

SparseBinaryMatrix SparseBinaryMatrix::from_dense(const std::vector<std::vector<int>>& dense) {
  const std::size_t cols = dense.empty() ? 0 : dense.front().size();
  SparseBinaryMatrix out(cols);
  std::vector<std::uint32_t> buf;
  for (const auto& r : dense) {
    if (r.size() != cols) throw std::invalid_argument("ragged dense matrix");
    buf.clear();
    for (std::size_t j = 0; j < cols; ++j) {
      if (r[j] != 0) buf.push_back(static_cast<std::uint32_t>(j));
    }
    out.add_row(buf);
  }
  return out;
}

Dataset Dataset::subset(std::span<const std::size_t> rows) const {
  Dataset out;
  out.matrix = matrix.select_rows(rows);
  for (auto i : rows) {
    out.labels.push_back(labels.at(i));
    out.meta.push_back(meta.at(i));
  }
  return out;
}

Dataset Dataset::select_columns(std::span<const std::uint32_t> kept) const {
  Dataset out;
  out.matrix = matrix.select_columns(kept);
  out.labels = labels;
  out.meta = meta;
  return out;
}

// ---------------------------------------------------------------------------

namespace {

void check_lengths(std::size_t logs, std::size_t labels, std::size_t meta) {
  if (labels != logs) {
    throw DataError("label count " + std::to_string(labels) + " does not match log count " + std::to_string(logs));
  }
  if (meta != logs) {
    throw DataError("metadata count " + std::to_string(meta) + " does not match log count " + std::to_string(logs));
  }
}

Dataset assemble(std::vector<std::vector<std::uint32_t>>& rows, std::span<const std::int8_t> labels,
                 std::span<const RowMeta> meta, std::size_t cols) {
  Dataset ds;
  ds.matrix = SparseBinaryMatrix(cols);
  for (auto& r : rows) {
    std::sort(r.begin(), r.end());
    r.erase(std::unique(r.begin(), r.end()), r.end());
    ds.matrix.add_row(r);
  }
  ds.labels.assign(labels.begin(), labels.end());
  ds.meta.assign(meta.begin(), meta.end());
  return ds;
}

}  // namespace

Dataset build_dataset(std::span<const LogFeatureSet> logs, std::span<const std::int8_t> labels,
                      std::span<const RowMeta> meta, FeatureVocabulary& vocab, VocabMode mode) {
  check_lengths(logs.size(), labels.size(), meta.size());
  std::vector<std::vector<std::uint32_t>> rows(logs.size());
  for (std::size_t i = 0; i < logs.size(); ++i) {
    for (const auto& g : logs[i]) {
      if (mode == VocabMode::Build) {
        rows[i].push_back(vocab.add(g));
      } else if (auto idx = vocab.index_of(g)) {
        rows[i].push_back(*idx);
      }
    }
  }
  return assemble(rows, labels, meta, vocab.size());
}

Dataset build_dataset(std::span<const PackedLog> logs, std::span<const std::int8_t> labels,
                      std::span<const RowMeta> meta, FeatureVocabulary& vocab, VocabMode mode) {
  if (mode == VocabMode::Build) {
    return build_dataset(logs, labels, meta, vocab, [](const PackedGram&) { return true; });
  }
  check_lengths(logs.size(), labels.size(), meta.size());
  std::vector<std::vector<std::uint32_t>> rows(logs.size());
  for (std::size_t i = 0; i < logs.size(); ++i) {
    for (const auto& g : logs[i]) {
      if (auto idx = vocab.index_of(g)) rows[i].push_back(*idx);
    }
  }
  return assemble(rows, labels, meta, vocab.size());
}

Dataset build_dataset(std::span<const PackedLog> logs, std::span<const std::int8_t> labels,
                      std::span<const RowMeta> meta, FeatureVocabulary& vocab,
                      const std::function<bool(const PackedGram&)>& admit) {
  check_lengths(logs.size(), labels.size(), meta.size());
  std::vector<std::vector<std::uint32_t>> rows(logs.size());
  for (std::size_t i = 0; i < logs.size(); ++i) {
    for (const auto& g : logs[i]) {
      if (auto idx = vocab.index_of(g)) {
        rows[i].push_back(*idx);
      } else if (admit(g)) {
        rows[i].push_back(vocab.add(g));
      }
    }
  }
  return assemble(rows, labels, meta, vocab.size());
}

UnderrunResult filter_underrun_logs(const Dataset& dataset, double num_sigma) {
  UnderrunResult result;
  std::vector<std::size_t> sandbox;
  for (std::size_t i = 0; i < dataset.rows(); ++i) {
    if (dataset.meta[i].environment == Environment::Sandbox) sandbox.push_back(i);
  }
  if (sandbox.size() < 2) {
    result.dataset = dataset;
    result.skipped = true;
    return result;
  }
  double sum = 0.0;
  for (auto i : sandbox) sum += static_cast<double>(dataset.matrix.row(i).size());
  const double mean = sum / static_cast<double>(sandbox.size());
  double ss = 0.0;
  for (auto i : sandbox) {
    const double d = static_cast<double>(dataset.matrix.row(i).size()) - mean;
    ss += d * d;
  }
  const double sd = std::sqrt(ss / static_cast<double>(sandbox.size() - 1));
  const double cutoff = mean - num_sigma * sd;
  result.mean = mean;
  result.stddev = sd;

  std::vector<std::size_t> keep;
  for (std::size_t i = 0; i < dataset.rows(); ++i) {
    const bool under = dataset.meta[i].environment == Environment::Sandbox &&
                       static_cast<double>(dataset.matrix.row(i).size()) < cutoff;
    if (under) {
      result.removed_rows.push_back(i);
      result.removed_ids.push_back(dataset.meta[i].sample_id);
    } else {
      keep.push_back(i);
    }
  }
  result.dataset = dataset.subset(keep);
  return result;
}

}  // namespace sentinel
