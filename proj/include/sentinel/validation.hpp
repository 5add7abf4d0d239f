#pragma once

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "sentinel/featurize.hpp"
#include "sentinel/lr.hpp"

namespace sentinel {

enum class SplitScheme { RandomKFold, TimeGap, Family };

std::string_view to_string(SplitScheme scheme);

struct Fold {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

struct SplitPlan {
  SplitScheme scheme = SplitScheme::RandomKFold;
  std::vector<Fold> folds;
  std::size_t k = 0;
  int split_year = 0;
  int gap = 0;
  std::vector<std::string> excluded_families;
};

/// Sandbox rows in k label-stratified folds. Training side of every fold is
/// the other k-1 sandbox folds plus every enterprise row.
SplitPlan random_kfold_plan(const Dataset& dataset, std::size_t k = 10, std::uint64_t seed = 1);

struct TimeGapOptions {
  int min_year = 1995;
  int max_year = 2014;
  std::uint64_t seed = 1;
};

/// One single-fold plan per gap. All plans share one training side: malware
/// compiled before `split_year`, half of the malware compiled in it, half of
/// the benign sandbox rows and all enterprise rows. The test side holds the
/// untrained malware compiled in or after split_year + gap plus the other
/// benign half. Years outside [min_year, max_year] or missing are excluded.
std::vector<SplitPlan> time_gap_plan(const Dataset& dataset, int split_year, std::span<const int> gaps,
                                     const TimeGapOptions& options = {});

// Median sanitized malware compile year.
int default_split_year(const Dataset& dataset, int min_year = 1995, int max_year = 2014);

/// Malware families distributed over k folds (no family on both sides);
/// excluded families removed everywhere; benign sandbox rows permuted across
/// folds; enterprise rows always train.
SplitPlan family_plan(const Dataset& dataset, std::size_t k,
                      std::span<const std::string> excluded = {}, std::uint64_t seed = 1);

struct BinaryRow {
  std::span<const std::uint32_t> indices;
  std::size_t dim = 0;
};

// Elementwise OR of an enterprise row and a sandbox malware row.
std::vector<std::uint32_t> synthesize_enterprise_malicious(BinaryRow enterprise, BinaryRow malware);

struct SyntheticTestSet {
  SparseBinaryMatrix matrix;
  std::vector<std::int8_t> labels;
  std::vector<std::size_t> source_rows;  // malware row for positives, enterprise row for negatives
};

// Positives: each malware row ORed with enterprise row (k mod E) in id order.
// Negatives: the enterprise rows themselves.
SyntheticTestSet build_synthetic_test(const Dataset& dataset, std::span<const std::size_t> malware_rows,
                                      std::span<const std::size_t> enterprise_rows);

struct ScrubResult {
  LRModel model;
  std::vector<std::uint32_t> removed;
};

inline constexpr double kDefaultScrubPrevalence = 0.01;

// Zeroes positive weights of features present in more than `prevalence` of
// the benign sandbox rows. The intercept is untouched.
ScrubResult scrub_environment_features(const LRModel& model, const SparseBinaryMatrix& matrix,
                                       std::span<const std::size_t> benign_sandbox_rows,
                                       double prevalence = kDefaultScrubPrevalence);

struct RocPoint {
  double fpr = 0.0;
  double tpr = 0.0;
  double threshold = std::numeric_limits<double>::infinity();
};

struct ROCCurve {
  std::vector<RocPoint> points;
  std::size_t positives = 0;
  std::size_t negatives = 0;

  double auc() const;
};

// Threshold sweep over distinct scores, descending; flag when score >= threshold.
ROCCurve roc_curve(std::span<const double> scores, std::span<const std::int8_t> labels);

// Best TPR among operating points with FPR <= target (no interpolation).
double tpr_at_fpr(const ROCCurve& curve, double fpr_target);

struct ImportanceEntry {
  std::uint32_t feature = 0;
  double weight = 0.0;
  std::size_t malware_count = 0;
  double importance = 0.0;
};

struct ImportanceTable {
  std::vector<ImportanceEntry> entries;  // nonzero-weight features, descending importance
  double positive_weight_sum = 0.0;
  double negative_weight_sum = 0.0;
};

// importance_j = (# malware rows containing j) * |x_j|; ties by feature index.
ImportanceTable feature_importance(const LRModel& model, const SparseBinaryMatrix& matrix,
                                   std::span<const std::size_t> malware_rows);

}  // namespace sentinel
