#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "oracles.hpp"
#include "sentinel/error.hpp"
#include "sentinel/validation.hpp"

using namespace sentinel;

namespace {

Dataset make_dataset(std::size_t sandbox_pos, std::size_t sandbox_neg, std::size_t enterprise) {
  Dataset ds;
  ds.matrix = SparseBinaryMatrix(1);
  auto add = [&](std::int8_t y, Environment env) {
    ds.matrix.add_row(std::span<const std::uint32_t>{});
    ds.labels.push_back(y);
    RowMeta m;
    m.environment = env;
    ds.meta.push_back(m);
  };
  for (std::size_t i = 0; i < sandbox_pos; ++i) add(1, Environment::Sandbox);
  for (std::size_t i = 0; i < sandbox_neg; ++i) add(-1, Environment::Sandbox);
  for (std::size_t i = 0; i < enterprise; ++i) add(-1, Environment::Enterprise);
  return ds;
}

bool disjoint(std::vector<std::size_t> a, std::vector<std::size_t> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  std::vector<std::size_t> both;
  std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(both));
  return both.empty();
}

}  // namespace

TEST_CASE("random k-fold counts") {
  auto ds = make_dataset(5, 5, 5);
  auto plan = random_kfold_plan(ds, 5, 1);
  REQUIRE(plan.folds.size() == 5);
  std::vector<int> seen(ds.rows(), 0);
  for (const auto& f : plan.folds) {
    CHECK(f.test.size() == 2);
    CHECK(f.train.size() == 13);
    CHECK(disjoint(f.train, f.test));
    for (auto i : f.test) {
      CHECK(ds.meta[i].environment == Environment::Sandbox);
      ++seen[i];
    }
    for (std::size_t e = 10; e < 15; ++e) CHECK(std::count(f.train.begin(), f.train.end(), e) == 1);
  }
  for (std::size_t i = 0; i < 10; ++i) CHECK(seen[i] == 1);
  for (std::size_t i = 10; i < 15; ++i) CHECK(seen[i] == 0);
  CHECK_THROWS_AS(random_kfold_plan(ds, 1), UsageError);
}

TEST_CASE("time gap example") {
  auto ds = make_dataset(3, 4, 2);
  ds.meta[0].compile_year = 2010;
  ds.meta[1].compile_year = 2011;
  ds.meta[2].compile_year = 2013;
  std::vector<int> gaps{0, 1, 2};
  auto plans = time_gap_plan(ds, 2011, gaps);
  REQUIRE(plans.size() == 3);
  auto malware = [&](const std::vector<std::size_t>& rows) {
    std::set<std::size_t> out;
    for (auto i : rows)
      if (ds.labels[i] > 0) out.insert(i);
    return out;
  };
  for (const auto& p : plans) CHECK(malware(p.folds[0].train) == std::set<std::size_t>{0, 1});
  CHECK(malware(plans[2].folds[0].test) == std::set<std::size_t>{2});
  CHECK(malware(plans[1].folds[0].test) == std::set<std::size_t>{2});
  // The lone split-year sample trains, so gap 0 tests the same malware as gap 1.
  CHECK(malware(plans[0].folds[0].test) == std::set<std::size_t>{2});
  // Benign sandbox halves and enterprise rows.
  for (const auto& p : plans) {
    const auto& f = p.folds[0];
    CHECK(disjoint(f.train, f.test));
    CHECK(std::count(f.train.begin(), f.train.end(), 7) == 1);
    CHECK(std::count(f.train.begin(), f.train.end(), 8) == 1);
    CHECK(f.test.size() - malware(f.test).size() == 2);
    CHECK(f.train == plans[0].folds[0].train);
  }
  std::vector<int> far{5};
  CHECK_THROWS_AS(time_gap_plan(ds, 2011, far), DataError);
  CHECK_THROWS_AS(time_gap_plan(ds, 2005, gaps), DataError);
  CHECK(default_split_year(ds) == 2011);
}

TEST_CASE("split-year malware is halved between the sides") {
  auto ds = make_dataset(5, 2, 0);
  for (std::size_t i = 0; i < 4; ++i) ds.meta[i].compile_year = 2010;
  ds.meta[4].compile_year = 2009;
  std::vector<int> gaps{0};
  auto plans = time_gap_plan(ds, 2010, gaps, {1995, 2014, 5});
  const auto& f = plans[0].folds[0];
  std::size_t train_y = 0, test_y = 0;
  for (std::size_t i = 0; i < 4; ++i) {
    train_y += std::count(f.train.begin(), f.train.end(), i);
    test_y += std::count(f.test.begin(), f.test.end(), i);
  }
  CHECK(train_y == 2);
  CHECK(test_y == 2);
  CHECK(disjoint(f.train, f.test));
  CHECK_THROWS_AS(time_gap_plan(ds, 2010, std::vector<int>{1}), DataError);
}

TEST_CASE("time gap drops unusable years") {
  auto ds = make_dataset(4, 2, 0);
  ds.meta[0].compile_year = 2008;
  ds.meta[1].compile_year = 1990;  // before the sane range
  ds.meta[2].compile_year = 2012;
  std::vector<int> gaps{0};
  auto plans = time_gap_plan(ds, 2009, gaps);
  const auto& f = plans[0].folds[0];
  for (std::size_t i : {1, 3}) {
    CHECK(std::count(f.train.begin(), f.train.end(), i) == 0);
    CHECK(std::count(f.test.begin(), f.test.end(), i) == 0);
  }
}

TEST_CASE("family plan examples") {
  auto ds = make_dataset(5, 4, 1);
  ds.meta[0].family = "f1";
  ds.meta[1].family = "f1";
  ds.meta[2].family = "f2";
  ds.meta[3].family = "trojan.win32.generic";
  ds.meta[4].family = "f2";
  std::vector<std::string> excluded{"trojan.win32.generic"};
  auto plan = family_plan(ds, 2, excluded, 3);
  REQUIRE(plan.folds.size() == 2);
  std::set<std::set<std::string>> test_families;
  for (const auto& f : plan.folds) {
    std::set<std::string> tr, te;
    for (auto i : f.train)
      if (ds.labels[i] > 0) tr.insert(ds.meta[i].family);
    for (auto i : f.test)
      if (ds.labels[i] > 0) te.insert(ds.meta[i].family);
    CHECK(tr.size() == 1);
    CHECK(te.size() == 1);
    CHECK(tr != te);
    test_families.insert(te);
    CHECK(std::count(f.train.begin(), f.train.end(), 3) == 0);
    CHECK(std::count(f.test.begin(), f.test.end(), 3) == 0);
    CHECK(std::count(f.train.begin(), f.train.end(), 9) == 1);
    CHECK(std::count(f.test.begin(), f.test.end(), 9) == 0);
  }
  CHECK(test_families.size() == 2);
  CHECK_THROWS_AS(family_plan(ds, 3, excluded), DataError);
  CHECK_THROWS_AS(family_plan(ds, 1, excluded), UsageError);
}

TEST_CASE("randomized plan hygiene") {
  std::mt19937_64 rng(31);
  const std::vector<int> gaps{0, 1, 2};
  const std::vector<std::string> excluded{"trojan.win32.generic"};
  for (int trial = 0; trial < 100; ++trial) {
    auto ds = oracle::random_plan_dataset(rng, 60, 10, 12);
    for (const auto& f : random_kfold_plan(ds, 5, trial).folds) CHECK(disjoint(f.train, f.test));

    auto plans = time_gap_plan(ds, 2004, gaps, {1995, 2014, static_cast<std::uint64_t>(trial)});
    for (std::size_t g = 0; g < plans.size(); ++g) {
      const auto& f = plans[g].folds[0];
      CHECK(disjoint(f.train, f.test));
      if (g > 0) CHECK(std::includes(plans[g - 1].folds[0].test.begin(), plans[g - 1].folds[0].test.end(),
                                     f.test.begin(), f.test.end()));
    }

    auto fam = family_plan(ds, 4, excluded, trial);
    for (const auto& f : fam.folds) {
      CHECK(disjoint(f.train, f.test));
      std::set<std::string> tr, te;
      for (auto i : f.train)
        if (ds.labels[i] > 0) tr.insert(ds.meta[i].family);
      for (auto i : f.test)
        if (ds.labels[i] > 0) te.insert(ds.meta[i].family);
      for (const auto& name : te) CHECK(!tr.contains(name));
      CHECK(!tr.contains(excluded[0]));
      CHECK(!te.contains(excluded[0]));
    }
  }
}

TEST_CASE("synthetic OR composition") {
  std::vector<std::uint32_t> e{0, 2}, c{2, 3};
  CHECK(synthesize_enterprise_malicious({e, 4}, {c, 4}) == std::vector<std::uint32_t>{0, 2, 3});
  CHECK(synthesize_enterprise_malicious({e, 4}, {{}, 4}) == e);
  CHECK_THROWS_AS(synthesize_enterprise_malicious({e, 4}, {c, 5}), DataError);

  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<std::uint32_t> a, b;
    for (std::uint32_t j = 0; j < 64; ++j) {
      if (rng() % 4 == 0) a.push_back(j);
      if (rng() % 5 == 0) b.push_back(j);
    }
    std::size_t overlap = 0;
    for (auto j : a) overlap += std::binary_search(b.begin(), b.end(), j);
    auto s = synthesize_enterprise_malicious({a, 64}, {b, 64});
    CHECK(s.size() == a.size() + b.size() - overlap);
    CHECK(std::is_sorted(s.begin(), s.end()));
    CHECK(std::adjacent_find(s.begin(), s.end()) == s.end());
  }
}

TEST_CASE("synthetic test set pairs malware with enterprise rows in order") {
  auto ds = make_dataset(3, 0, 2);
  ds.matrix = SparseBinaryMatrix::from_dense({{1, 0, 0, 0}, {0, 1, 0, 0}, {0, 0, 1, 0}, {0, 0, 0, 1}, {1, 1, 0, 0}});
  std::vector<std::size_t> mal{0, 1, 2}, ent{3, 4};
  auto t = build_synthetic_test(ds, mal, ent);
  REQUIRE(t.matrix.rows() == 5);
  CHECK(t.labels == std::vector<std::int8_t>{1, 1, 1, -1, -1});
  auto row = [&](std::size_t i) { return std::vector<std::uint32_t>(t.matrix.row(i).begin(), t.matrix.row(i).end()); };
  CHECK(row(0) == std::vector<std::uint32_t>{0, 3});
  CHECK(row(1) == std::vector<std::uint32_t>{0, 1});
  CHECK(row(2) == std::vector<std::uint32_t>{2, 3});
  CHECK(row(3) == std::vector<std::uint32_t>{3});
  CHECK(row(4) == std::vector<std::uint32_t>{0, 1});
  CHECK(t.source_rows == std::vector<std::size_t>{0, 1, 2, 3, 4});
  CHECK_THROWS_AS(build_synthetic_test(ds, mal, {}), DataError);
}

TEST_CASE("scrub thresholds") {
  // Column 0 in 2 of 100 benign rows, column 1 in exactly 1, column 2 in 2 with negative weight.
  std::vector<std::vector<int>> dense(100, std::vector<int>(4, 0));
  dense[0][0] = dense[1][0] = 1;
  dense[2][1] = 1;
  dense[3][2] = dense[4][2] = 1;
  auto m = SparseBinaryMatrix::from_dense(dense);
  std::vector<std::size_t> benign(100);
  for (std::size_t i = 0; i < 100; ++i) benign[i] = i;
  LRModel model;
  model.num_features = 4;
  model.intercept = -0.2;
  model.weights = {{0, 0.4}, {1, 0.4}, {2, -0.4}, {3, 0.7}};
  auto r = scrub_environment_features(model, m, benign);
  CHECK(r.removed == std::vector<std::uint32_t>{0});
  CHECK(r.model.weight(0) == 0.0);
  CHECK(r.model.weight(1) == 0.4);
  CHECK(r.model.weight(2) == -0.4);
  CHECK(r.model.weight(3) == 0.7);
  CHECK(r.model.intercept == -0.2);

  // Samples without removed features keep their scores.
  std::vector<std::uint32_t> clean{1, 3}, dirty{0, 3};
  CHECK(predict_proba(r.model, clean) == predict_proba(model, clean));
  CHECK(predict_proba(r.model, dirty) < predict_proba(model, dirty));
}

TEST_CASE("ROC examples") {
  std::vector<double> s{0.9, 0.8, 0.4, 0.2};
  std::vector<std::int8_t> y{1, 1, -1, -1}, inv{-1, -1, 1, 1};
  auto c = roc_curve(s, y);
  bool corner = false;
  for (const auto& p : c.points) corner |= p.fpr == 0.0 && p.tpr == 1.0;
  CHECK(corner);
  CHECK(c.auc() == doctest::Approx(1.0));
  CHECK(roc_curve(s, inv).auc() == doctest::Approx(0.0));
  CHECK(tpr_at_fpr(c, 0.0) == 1.0);
  CHECK(tpr_at_fpr(c, 1e-3) == 1.0);

  std::vector<std::int8_t> one{1, 1, 1, 1};
  CHECK_THROWS_AS(roc_curve(s, one), DataError);

  // Ties move together: two equal scores with opposite labels give a diagonal step.
  std::vector<double> tied{0.5, 0.5};
  std::vector<std::int8_t> ty{1, -1};
  auto t = roc_curve(tied, ty);
  REQUIRE(t.points.size() == 2);
  CHECK(t.points[1].fpr == 1.0);
  CHECK(t.points[1].tpr == 1.0);
  CHECK(t.auc() == doctest::Approx(0.5));
}

TEST_CASE("ROC matches brute-force confusion matrices") {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t n = 2 + rng() % 500;
    std::vector<double> s(n);
    // Coarse scores so ties are common.
    for (auto& v : s) v = static_cast<double>(rng() % 50) / 50.0;
    auto y = oracle::random_labels(rng, n);
    auto c = roc_curve(s, y);
    auto ref = oracle::brute_roc(s, y);
    REQUIRE(c.points.size() == ref.thresholds.size() + 1);
    CHECK(c.points[0].fpr == 0.0);
    CHECK(c.points[0].tpr == 0.0);
    for (std::size_t k = 0; k < ref.thresholds.size(); ++k) {
      CHECK(c.points[k + 1].threshold == ref.thresholds[k]);
      CHECK(c.points[k + 1].fpr == doctest::Approx(ref.fpr[k]).epsilon(1e-15));
      CHECK(c.points[k + 1].tpr == doctest::Approx(ref.tpr[k]).epsilon(1e-15));
    }
    // TPR at FPR: exhaustive scan over the brute-force points plus the origin.
    for (double target : {0.0, 1e-3, 1e-2, 0.1, 0.5, 1.0}) {
      double best = 0.0;
      for (std::size_t k = 0; k < ref.fpr.size(); ++k)
        if (ref.fpr[k] <= target) best = std::max(best, ref.tpr[k]);
      CHECK(tpr_at_fpr(c, target) == doctest::Approx(best));
    }
  }
}

TEST_CASE("ROC is invariant to increasing transforms") {
  std::mt19937_64 rng(18);
  std::normal_distribution<double> nd;
  std::vector<double> s(300);
  for (auto& v : s) v = nd(rng);
  auto y = oracle::random_labels(rng, 300);
  std::vector<double> t(300);
  for (std::size_t i = 0; i < 300; ++i) t[i] = std::exp(3 * s[i]) + 7;
  auto a = roc_curve(s, y), b = roc_curve(t, y);
  REQUIRE(a.points.size() == b.points.size());
  for (std::size_t k = 0; k < a.points.size(); ++k) {
    CHECK(a.points[k].fpr == b.points[k].fpr);
    CHECK(a.points[k].tpr == b.points[k].tpr);
  }
  CHECK(a.auc() == b.auc());
}

TEST_CASE("feature importance") {
  std::vector<std::vector<int>> dense(50, std::vector<int>(3, 0));
  for (int i = 0; i < 40; ++i) dense[i][0] = 1;
  for (int i = 0; i < 50; ++i) dense[i][1] = 1;
  for (int i = 0; i < 10; ++i) dense[i][2] = 1;
  auto m = SparseBinaryMatrix::from_dense(dense);
  LRModel model;
  model.num_features = 3;
  model.weights = {{0, 0.5}, {2, -1.0}};
  std::vector<std::size_t> mal(50);
  for (std::size_t i = 0; i < 50; ++i) mal[i] = i;
  auto t = feature_importance(model, m, mal);
  REQUIRE(t.entries.size() == 2);
  CHECK(t.entries[0].feature == 0);
  CHECK(t.entries[0].importance == doctest::Approx(20.0));
  CHECK(t.entries[0].malware_count == 40);
  CHECK(t.entries[1].importance == doctest::Approx(10.0));
  CHECK(t.positive_weight_sum == 0.5);
  CHECK(t.negative_weight_sum == -1.0);

  // Equal importance falls back to index order.
  model.weights = {{0, 0.25}, {2, 1.0}};
  auto tie = feature_importance(model, m, mal);
  CHECK(tie.entries[0].feature == 0);
  CHECK(tie.entries[1].feature == 2);
}
