#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <unordered_set>
#include <vector>

#include "sentinel/featurize.hpp"

namespace sentinel {

/// Cosine between each binary column and the label vector:
///   c_j = (a_j . y) / (||a_j|| ||y||),  c_j = 0 for an all-zero column.
/// One pass over the stored ones. Per-column sums are integers, so the
/// result does not depend on the thread count.
std::vector<double> uncentered_correlation(const SparseBinaryMatrix& matrix,
                                           std::span<const std::int8_t> labels);

namespace serial {
std::vector<double> uncentered_correlation(const SparseBinaryMatrix& matrix,
                                           std::span<const std::int8_t> labels);
}

struct FeatureSelection {
  std::vector<std::uint32_t> kept;          // new index -> old index
  std::vector<std::int64_t> old_to_new;     // -1 when dropped
  std::vector<double> scores;               // c_j of kept features, by new index
};

inline constexpr std::size_t kDefaultTopK = 50'000;

// Keeps the K largest |c_j|; ties go to the smaller index. `kept` is sorted by
// old index so the retained columns keep their relative order.
FeatureSelection top_k_select(std::span<const double> scores, std::size_t k = kDefaultTopK);

void write_selection(std::ostream& out, const FeatureSelection& selection);
FeatureSelection read_selection(std::istream& in, std::size_t old_feature_count);

/// Count-min sketch. Estimates never undercount, so threshold tests have no
/// false negatives. `exact` switches to a hash map for reference runs.
class ApproximateCounter {
 public:
  struct Config {
    std::size_t width = 1 << 20;
    std::size_t depth = 4;
    std::uint64_t seed = 0x5eed;
    bool exact = false;
  };

  explicit ApproximateCounter(Config config);

  void add(std::uint64_t key, std::uint32_t count = 1);
  std::uint64_t estimate(std::uint64_t key) const;
  // Sketches with identical config add cell-wise.
  void merge(const ApproximateCounter& other);

  const Config& config() const { return config_; }

 private:
  std::size_t cell(std::size_t row, std::uint64_t key) const;

  Config config_;
  std::vector<std::uint64_t> seeds_;
  std::vector<std::uint64_t> table_;
  std::unordered_map<std::uint64_t, std::uint64_t> exact_;
};

/// Two passes over a re-iterable stream of gram keys: count, then approve
/// keys whose estimated count reaches `threshold`.
using GramStream = std::function<void(const std::function<void(std::uint64_t)>&)>;
std::unordered_set<std::uint64_t> prefilter_by_count(const GramStream& stream, std::uint64_t threshold,
                                                     ApproximateCounter::Config config);

// Stable 64-bit key for a packed gram under a given interner.
std::uint64_t gram_key(const PackedGram& gram, const KeyInterner& interner);

}  // namespace sentinel
