#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <functional>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "sentinel/events.hpp"

namespace sentinel {

struct EventKey {
  ActionKind action = ActionKind::FileWrite;
  std::string target;

  auto operator<=>(const EventKey&) const = default;
  bool operator==(const EventKey&) const = default;

  // Stable across runs and platforms (FNV-1a over action byte and target).
  std::uint64_t hash() const;
  std::string to_string() const;  // action:target with '|' escaped
};

struct QGram {
  std::vector<EventKey> keys;

  auto operator<=>(const QGram&) const = default;
  bool operator==(const QGram&) const = default;

  std::size_t length() const { return keys.size(); }
  std::uint64_t hash() const;
  std::string to_string() const;  // keys joined by unescaped '|'
  static std::optional<QGram> parse(std::string_view text);
};

using LogFeatureSet = std::set<QGram>;

/// Allowed gram lengths, a subset of {1, 2, 3}.
class QGramLengths {
 public:
  QGramLengths() : mask_(0b111) {}
  explicit QGramLengths(std::initializer_list<int> lengths);
  static QGramLengths parse(std::string_view csv);  // "1,2,3"

  bool contains(int q) const { return q >= 1 && q <= 3 && (mask_ >> (q - 1)) & 1U; }
  std::string to_string() const;

 private:
  unsigned mask_;
};

LogFeatureSet extract_qgrams(std::span<const EventKey> process_events, const QGramLengths& lengths);
LogFeatureSet featurize_log(const LogWindow& window, const QGramLengths& lengths);

// ---------------------------------------------------------------------------
// Interned representation used by the bulk path.

inline constexpr std::uint32_t kUnknownKey = 0xffffffffU;

class KeyInterner {
 public:
  std::uint32_t intern(const EventKey& key);
  std::optional<std::uint32_t> find(const EventKey& key) const;
  const EventKey& key(std::uint32_t id) const { return keys_.at(id); }
  std::size_t size() const { return keys_.size(); }

 private:
  struct KeyHash {
    std::size_t operator()(const EventKey& k) const { return static_cast<std::size_t>(k.hash()); }
  };
  std::vector<EventKey> keys_;
  std::unordered_map<EventKey, std::uint32_t, KeyHash> index_;
};

struct PackedGram {
  std::array<std::uint32_t, 3> ids{kUnknownKey, kUnknownKey, kUnknownKey};
  std::uint8_t length = 0;

  auto operator<=>(const PackedGram&) const = default;
  bool operator==(const PackedGram&) const = default;
};

struct PackedGramHash {
  std::size_t operator()(const PackedGram& g) const noexcept;
};

// Sorted, deduplicated grams of one log. Grams touching kUnknownKey are dropped.
using PackedLog = std::vector<PackedGram>;

PackedLog extract_packed(std::span<const std::uint32_t> key_ids, const QGramLengths& lengths);

/// Turns windows into packed gram sets. Key interning is sequential in window
/// order; gram extraction runs in parallel over windows.
class Featurizer {
 public:
  explicit Featurizer(QGramLengths lengths) : lengths_(lengths) {}

  // Interns unseen keys (build mode).
  std::vector<PackedLog> featurize(std::span<const LogWindow> windows, KeyInterner& interner) const;
  // Lookup only; unseen keys map to kUnknownKey (frozen mode).
  std::vector<PackedLog> featurize_frozen(std::span<const LogWindow> windows, const KeyInterner& interner) const;

  const QGramLengths& lengths() const { return lengths_; }

 private:
  std::vector<std::vector<std::vector<std::uint32_t>>> encode(std::span<const LogWindow> windows,
                                                             KeyInterner* interner,
                                                             const KeyInterner& lookup) const;
  QGramLengths lengths_;
};

namespace serial {
std::vector<PackedLog> featurize(std::span<const LogWindow> windows, KeyInterner& interner,
                                 const QGramLengths& lengths);
}

/// Bidirectional QGram <-> dense column index. Index order is first-seen order;
/// grams new to a log are numbered in that log's container order (QGram order
/// for sets, interned-id order for packed logs).
class FeatureVocabulary {
 public:
  std::optional<std::uint32_t> index_of(const QGram& gram) const;
  std::optional<std::uint32_t> index_of(const PackedGram& gram) const;
  // Throws std::logic_error once frozen.
  std::uint32_t add(const PackedGram& gram);
  std::uint32_t add(const QGram& gram);

  QGram gram(std::uint32_t index) const;
  const PackedGram& packed(std::uint32_t index) const { return grams_.at(index); }
  std::size_t size() const { return grams_.size(); }

  void freeze() { frozen_ = true; }
  bool frozen() const { return frozen_; }

  KeyInterner& interner() { return interner_; }
  const KeyInterner& interner() const { return interner_; }

  // New vocabulary holding old indices `kept` at positions 0..kept.size()-1.
  FeatureVocabulary restrict(std::span<const std::uint32_t> kept) const;

 private:
  PackedGram pack(const QGram& gram, bool intern);

  KeyInterner interner_;
  std::vector<PackedGram> grams_;
  std::unordered_map<PackedGram, std::uint32_t, PackedGramHash> index_;
  bool frozen_ = false;
};

/// M x N binary matrix in CSR form. Only the positions of ones are stored.
class SparseBinaryMatrix {
 public:
  SparseBinaryMatrix() = default;
  explicit SparseBinaryMatrix(std::size_t cols) : cols_(cols) {}

  // `columns` must be strictly increasing and < cols().
  void add_row(std::span<const std::uint32_t> columns);
  void set_cols(std::size_t cols);

  std::size_t rows() const { return row_ptr_.size() - 1; }
  std::size_t cols() const { return cols_; }
  std::size_t nnz() const { return col_idx_.size(); }
  double density() const;

  std::span<const std::uint32_t> row(std::size_t i) const {
    return {col_idx_.data() + row_ptr_[i], row_ptr_[i + 1] - row_ptr_[i]};
  }
  bool get(std::size_t i, std::uint32_t j) const;

  // Number of ones per column over all rows, or over the given rows.
  std::vector<std::uint32_t> column_counts() const;
  std::vector<std::uint32_t> column_counts(std::span<const std::size_t> rows) const;

  SparseBinaryMatrix select_rows(std::span<const std::size_t> rows) const;
  // Keeps old columns `kept` renumbered 0..kept.size()-1.
  SparseBinaryMatrix select_columns(std::span<const std::uint32_t> kept) const;

  static SparseBinaryMatrix from_dense(const std::vector<std::vector<int>>& dense);

  bool operator==(const SparseBinaryMatrix&) const = default;

 private:
  std::size_t cols_ = 0;
  std::vector<std::size_t> row_ptr_{0};
  std::vector<std::uint32_t> col_idx_;
};

namespace serial {
std::vector<std::uint32_t> column_counts(const SparseBinaryMatrix& m, std::span<const std::size_t> rows);
}

struct RowMeta {
  Environment environment = Environment::Sandbox;
  std::string family = "UNKNOWN";
  std::optional<int> compile_year;
  std::string sample_id;

  bool operator==(const RowMeta&) const = default;
};

struct Dataset {
  SparseBinaryMatrix matrix;
  std::vector<std::int8_t> labels;  // +1 malicious, -1 benign
  std::vector<RowMeta> meta;

  std::size_t rows() const { return labels.size(); }
  Dataset subset(std::span<const std::size_t> rows) const;
  Dataset select_columns(std::span<const std::uint32_t> kept) const;
};

enum class VocabMode { Build, Frozen };

// Throws DataError on label/metadata length mismatch.
Dataset build_dataset(std::span<const LogFeatureSet> logs, std::span<const std::int8_t> labels,
                      std::span<const RowMeta> meta, FeatureVocabulary& vocab, VocabMode mode);
Dataset build_dataset(std::span<const PackedLog> logs, std::span<const std::int8_t> labels,
                      std::span<const RowMeta> meta, FeatureVocabulary& vocab, VocabMode mode);

// Gram-level predicate applied in build mode (probabilistic prefilter).
Dataset build_dataset(std::span<const PackedLog> logs, std::span<const std::int8_t> labels,
                      std::span<const RowMeta> meta, FeatureVocabulary& vocab,
                      const std::function<bool(const PackedGram&)>& admit);

struct UnderrunResult {
  Dataset dataset;
  std::vector<std::size_t> removed_rows;
  std::vector<std::string> removed_ids;
  double mean = 0.0;
  double stddev = 0.0;
  bool skipped = false;  // fewer than two sandbox rows
};

// Drops sandbox rows whose feature count is below mean - 2 * sample stddev.
UnderrunResult filter_underrun_logs(const Dataset& dataset, double num_sigma = 2.0);

}  // namespace sentinel
