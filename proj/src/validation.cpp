#include "sentinel/validation.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <set>

#include "sentinel/error.hpp"
#include "sentinel/labeler.hpp"

namespace sentinel {

std::string_view to_string(SplitScheme scheme) {
  switch (scheme) {
    case SplitScheme::RandomKFold: return "random";
    case SplitScheme::TimeGap: return "time";
    case SplitScheme::Family: return "family";
  }
  return "random";
}

namespace {

void shuffle(std::vector<std::size_t>& v, std::mt19937_64& rng) {
  for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[rng() % i]);
}

bool is_sandbox(const Dataset& ds, std::size_t i) { return ds.meta[i].environment == Environment::Sandbox; }
bool is_enterprise(const Dataset& ds, std::size_t i) { return ds.meta[i].environment == Environment::Enterprise; }

}  // namespace

SplitPlan random_kfold_plan(const Dataset& dataset, std::size_t k, std::uint64_t seed) {
  if (k < 2) throw UsageError("random k-fold needs k >= 2");
  std::vector<std::size_t> sandbox, enterprise;
  for (std::size_t i = 0; i < dataset.rows(); ++i) {
    if (is_sandbox(dataset, i)) sandbox.push_back(i);
    if (is_enterprise(dataset, i)) enterprise.push_back(i);
  }
  if (sandbox.size() < k) throw DataError("fewer sandbox rows than folds");
  std::vector<std::int8_t> labels;
  for (auto i : sandbox) labels.push_back(dataset.labels[i]);
  const auto assignment = stratified_folds(labels, k, seed);

  SplitPlan plan;
  plan.scheme = SplitScheme::RandomKFold;
  plan.k = k;
  plan.folds.resize(k);
  for (std::size_t f = 0; f < k; ++f) {
    auto& fold = plan.folds[f];
    for (std::size_t t = 0; t < sandbox.size(); ++t) (assignment[t] == f ? fold.test : fold.train).push_back(sandbox[t]);
    fold.train.insert(fold.train.end(), enterprise.begin(), enterprise.end());
    std::sort(fold.train.begin(), fold.train.end());
  }
  return plan;
}

int default_split_year(const Dataset& dataset, int min_year, int max_year) {
  std::vector<int> years;
  for (std::size_t i = 0; i < dataset.rows(); ++i) {
    if (dataset.labels[i] <= 0) continue;
    if (auto y = sanitize_compile_year(dataset.meta[i].compile_year, min_year, max_year)) years.push_back(*y);
  }
  if (years.empty()) throw DataError("no malware rows with a usable compile year");
  std::sort(years.begin(), years.end());
  return years[(years.size() - 1) / 2];
}

std::vector<SplitPlan> time_gap_plan(const Dataset& dataset, int split_year, std::span<const int> gaps,
                                     const TimeGapOptions& options) {
  std::vector<std::size_t> benign_sandbox, enterprise;
  std::vector<std::pair<std::size_t, int>> malware;
  for (std::size_t i = 0; i < dataset.rows(); ++i) {
    if (dataset.labels[i] > 0) {
      if (auto y = sanitize_compile_year(dataset.meta[i].compile_year, options.min_year, options.max_year)) {
        malware.emplace_back(i, *y);
      }
    } else if (is_sandbox(dataset, i)) {
      benign_sandbox.push_back(i);
    } else if (is_enterprise(dataset, i)) {
      enterprise.push_back(i);
    }
  }
  std::mt19937_64 rng(options.seed);
  shuffle(benign_sandbox, rng);
  const std::size_t half = benign_sandbox.size() / 2;
  std::vector<std::size_t> benign_train(benign_sandbox.begin(), benign_sandbox.begin() + static_cast<std::ptrdiff_t>(half));
  std::vector<std::size_t> benign_test(benign_sandbox.begin() + static_cast<std::ptrdiff_t>(half), benign_sandbox.end());

  std::vector<std::size_t> train = enterprise;
  train.insert(train.end(), benign_train.begin(), benign_train.end());
  // Malware compiled in the split year itself is halved: one half trains, the
  // other is only tested at gap 0, so no sample sits on both sides.
  std::vector<std::size_t> boundary;
  std::size_t train_malware = 0;
  for (const auto& [i, y] : malware) {
    if (y < split_year) {
      train.push_back(i);
      ++train_malware;
    } else if (y == split_year) {
      boundary.push_back(i);
    }
  }
  shuffle(boundary, rng);
  const std::size_t boundary_train = (boundary.size() + 1) / 2;
  train.insert(train.end(), boundary.begin(), boundary.begin() + static_cast<std::ptrdiff_t>(boundary_train));
  train_malware += boundary_train;
  const std::vector<std::size_t> boundary_test(boundary.begin() + static_cast<std::ptrdiff_t>(boundary_train),
                                               boundary.end());
  std::sort(train.begin(), train.end());
  if (train_malware == 0) throw DataError("time split: training side has no malware compiled by " + std::to_string(split_year));
  if (benign_test.empty()) throw DataError("time split: test side has no benign rows");

  std::vector<SplitPlan> plans;
  for (int gap : gaps) {
    if (gap < 0) throw UsageError("time gap must be non-negative");
    SplitPlan plan;
    plan.scheme = SplitScheme::TimeGap;
    plan.k = 1;
    plan.split_year = split_year;
    plan.gap = gap;
    Fold fold;
    fold.train = train;
    fold.test = benign_test;
    for (const auto& [i, y] : malware) {
      if (y > split_year && y >= split_year + gap) fold.test.push_back(i);
    }
    if (gap == 0) fold.test.insert(fold.test.end(), boundary_test.begin(), boundary_test.end());
    if (fold.test.size() == benign_test.size()) {
      throw DataError("time split: test side has no malware compiled in or after " + std::to_string(split_year + gap));
    }
    std::sort(fold.test.begin(), fold.test.end());
    plan.folds.push_back(std::move(fold));
    plans.push_back(std::move(plan));
  }
  return plans;
}

SplitPlan family_plan(const Dataset& dataset, std::size_t k, std::span<const std::string> excluded, std::uint64_t seed) {
  if (k < 2) throw UsageError("family split needs k >= 2");
  const std::set<std::string> drop(excluded.begin(), excluded.end());
  std::map<std::string, std::vector<std::size_t>> by_family;
  std::vector<std::size_t> benign_sandbox, enterprise;
  for (std::size_t i = 0; i < dataset.rows(); ++i) {
    if (dataset.labels[i] > 0) {
      if (!drop.contains(dataset.meta[i].family)) by_family[dataset.meta[i].family].push_back(i);
    } else if (is_sandbox(dataset, i)) {
      benign_sandbox.push_back(i);
    } else if (is_enterprise(dataset, i)) {
      enterprise.push_back(i);
    }
  }
  if (by_family.size() < k) {
    throw DataError("family split: " + std::to_string(by_family.size()) + " families for " + std::to_string(k) + " folds");
  }
  std::vector<std::string> families;
  for (const auto& [name, rows] : by_family) families.push_back(name);
  std::mt19937_64 rng(seed);
  std::vector<std::size_t> order(families.size());
  for (std::size_t t = 0; t < order.size(); ++t) order[t] = t;
  shuffle(order, rng);
  shuffle(benign_sandbox, rng);

  SplitPlan plan;
  plan.scheme = SplitScheme::Family;
  plan.k = k;
  plan.excluded_families.assign(excluded.begin(), excluded.end());
  plan.folds.resize(k);
  std::vector<std::size_t> fold_of_row(dataset.rows(), k);
  for (std::size_t t = 0; t < order.size(); ++t) {
    for (auto i : by_family[families[order[t]]]) fold_of_row[i] = t % k;
  }
  for (std::size_t t = 0; t < benign_sandbox.size(); ++t) fold_of_row[benign_sandbox[t]] = t % k;
  for (std::size_t f = 0; f < k; ++f) {
    auto& fold = plan.folds[f];
    for (std::size_t i = 0; i < dataset.rows(); ++i) {
      if (fold_of_row[i] < k) {
        (fold_of_row[i] == f ? fold.test : fold.train).push_back(i);
      } else if (is_enterprise(dataset, i)) {
        fold.train.push_back(i);
      }
    }
  }
  return plan;
}

// ---------------------------------------------------------------------------

std::vector<std::uint32_t> synthesize_enterprise_malicious(BinaryRow enterprise, BinaryRow malware) {
  if (enterprise.dim != malware.dim) {
    throw DataError("feature spaces differ: " + std::to_string(enterprise.dim) + " vs " + std::to_string(malware.dim));
  }
  for (auto row : {enterprise, malware}) {
    if (!row.indices.empty() && row.indices.back() >= row.dim) throw DataError("row index outside feature space");
  }
  std::vector<std::uint32_t> out;
  out.reserve(enterprise.indices.size() + malware.indices.size());
  std::set_union(enterprise.indices.begin(), enterprise.indices.end(), malware.indices.begin(), malware.indices.end(),
                 std::back_inserter(out));
  return out;
}

SyntheticTestSet build_synthetic_test(const Dataset& dataset, std::span<const std::size_t> malware_rows,
                                      std::span<const std::size_t> enterprise_rows) {
  if (enterprise_rows.empty()) throw DataError("synthetic test set needs enterprise rows");
  std::vector<std::size_t> partners(enterprise_rows.begin(), enterprise_rows.end());
  std::sort(partners.begin(), partners.end());
  const auto& m = dataset.matrix;
  SyntheticTestSet out;
  out.matrix = SparseBinaryMatrix(m.cols());
  for (std::size_t t = 0; t < malware_rows.size(); ++t) {
    const auto e = partners[t % partners.size()];
    out.matrix.add_row(synthesize_enterprise_malicious({m.row(e), m.cols()}, {m.row(malware_rows[t]), m.cols()}));
    out.labels.push_back(1);
    out.source_rows.push_back(malware_rows[t]);
  }
  for (auto e : partners) {
    out.matrix.add_row(m.row(e));
    out.labels.push_back(-1);
    out.source_rows.push_back(e);
  }
  return out;
}

ScrubResult scrub_environment_features(const LRModel& model, const SparseBinaryMatrix& matrix,
                                       std::span<const std::size_t> benign_sandbox_rows, double prevalence) {
  ScrubResult result;
  result.model = model;
  if (benign_sandbox_rows.empty()) return result;
  const auto counts = matrix.column_counts(benign_sandbox_rows);
  const double n = static_cast<double>(benign_sandbox_rows.size());
  auto& w = result.model.weights;
  std::erase_if(w, [&](const auto& entry) {
    const auto [j, weight] = entry;
    const bool remove = weight > 0.0 && j < counts.size() && static_cast<double>(counts[j]) / n > prevalence;
    if (remove) result.removed.push_back(j);
    return remove;
  });
  return result;
}

// ---------------------------------------------------------------------------

double ROCCurve::auc() const {
  double area = 0.0;
  for (std::size_t t = 1; t < points.size(); ++t) {
    area += (points[t].fpr - points[t - 1].fpr) * (points[t].tpr + points[t - 1].tpr) * 0.5;
  }
  return area;
}

ROCCurve roc_curve(std::span<const double> scores, std::span<const std::int8_t> labels) {
  if (scores.size() != labels.size()) throw DataError("score and label counts differ");
  ROCCurve curve;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (std::isnan(scores[i])) throw DataError("NaN score");
    (labels[i] > 0 ? curve.positives : curve.negatives)++;
  }
  if (curve.positives == 0 || curve.negatives == 0) throw DataError("ROC needs both positive and negative samples");

  std::vector<std::size_t> order(scores.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return scores[a] > scores[b]; });

  const double p = static_cast<double>(curve.positives);
  const double n = static_cast<double>(curve.negatives);
  curve.points.push_back({0.0, 0.0, std::numeric_limits<double>::infinity()});
  std::size_t tp = 0, fp = 0;
  for (std::size_t t = 0; t < order.size();) {
    const double threshold = scores[order[t]];
    while (t < order.size() && scores[order[t]] == threshold) {
      (labels[order[t]] > 0 ? tp : fp)++;
      ++t;
    }
    curve.points.push_back({static_cast<double>(fp) / n, static_cast<double>(tp) / p, threshold});
  }
  return curve;
}

double tpr_at_fpr(const ROCCurve& curve, double fpr_target) {
  double best = 0.0;
  for (const auto& pt : curve.points) {
    if (pt.fpr <= fpr_target) best = std::max(best, pt.tpr);
  }
  return best;
}

ImportanceTable feature_importance(const LRModel& model, const SparseBinaryMatrix& matrix,
                                   std::span<const std::size_t> malware_rows) {
  ImportanceTable table;
  const auto counts = matrix.column_counts(malware_rows);
  for (const auto& [j, w] : model.weights) {
    if (w == 0.0) continue;
    ImportanceEntry e;
    e.feature = j;
    e.weight = w;
    e.malware_count = j < counts.size() ? counts[j] : 0;
    e.importance = static_cast<double>(e.malware_count) * std::abs(w);
    table.entries.push_back(e);
    (w > 0 ? table.positive_weight_sum : table.negative_weight_sum) += w;
  }
  std::sort(table.entries.begin(), table.entries.end(), [](const auto& a, const auto& b) {
    return a.importance != b.importance ? a.importance > b.importance : a.feature < b.feature;
  });
  return table;
}

}  // namespace sentinel
