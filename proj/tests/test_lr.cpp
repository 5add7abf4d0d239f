#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "oracles.hpp"
#include "sentinel/error.hpp"
#include "sentinel/lr.hpp"
#include "sentinel/parallel.hpp"

using namespace sentinel;

namespace {

PathConfig explicit_grid(std::vector<double> lambdas) {
  PathConfig c;
  c.lambdas = std::move(lambdas);
  c.tolerance = 1e-10;
  return c;
}

}  // namespace

TEST_CASE("objective at zero is M log 2") {
  auto m = SparseBinaryMatrix::from_dense({{1, 0}, {0, 1}, {1, 1}, {0, 0}});
  std::vector<std::int8_t> y{1, -1, 1, -1};
  std::vector<double> x{0.0, 0.0};
  CHECK(objective(m, y, x, 0.0, 3.0) == doctest::Approx(4 * std::log(2.0)).epsilon(1e-14));
  // One row, weight 1 on its only feature, lambda 0.5.
  auto one = SparseBinaryMatrix::from_dense({{1}});
  std::vector<std::int8_t> y1{-1};
  std::vector<double> w{1.0};
  CHECK(objective(one, y1, w, -1.0, 0.5) == doctest::Approx(std::log(2.0) + 0.5).epsilon(1e-14));
}

TEST_CASE("smooth gradient matches finite differences") {
  std::mt19937_64 rng(3);
  auto dense = oracle::random_dense(rng, 30, 6, 0.4);
  auto m = SparseBinaryMatrix::from_dense(dense);
  auto y = oracle::random_labels(rng, 30);
  std::normal_distribution<double> nd;
  std::vector<double> x(6);
  for (auto& v : x) v = nd(rng);
  const double b = 0.3;
  std::vector<double> g(6);
  double gb = 0;
  smooth_gradient(m, y, x, b, g, gb);
  const double h = 1e-6;
  for (std::size_t j = 0; j < 6; ++j) {
    auto xp = x, xm = x;
    xp[j] += h;
    xm[j] -= h;
    double fd = (objective(m, y, xp, b, 0) - objective(m, y, xm, b, 0)) / (2 * h);
    CHECK(g[j] == doctest::Approx(fd).epsilon(1e-6));
  }
  double fd = (objective(m, y, x, b + h, 0) - objective(m, y, x, b - h, 0)) / (2 * h);
  CHECK(gb == doctest::Approx(fd).epsilon(1e-6));
}

TEST_CASE("predict_proba examples") {
  LRModel model;
  model.num_features = 3;
  model.intercept = 0.0;
  model.weights = {{1, std::log(3.0)}};
  std::vector<std::uint32_t> empty, with_one{1}, other{0, 2};
  CHECK(predict_proba(model, empty) == doctest::Approx(0.5));
  CHECK(predict_proba(model, with_one) == doctest::Approx(0.75));
  CHECK(predict_proba(model, other) == doctest::Approx(0.5));
  CHECK(logistic(800.0) == 1.0);
  CHECK(logistic(-800.0) >= 0.0);
  CHECK(log1p_exp_neg(-800.0) == doctest::Approx(800.0));
  CHECK(std::isfinite(log1p_exp_neg(800.0)));
}

TEST_CASE("probability is monotone in every feature with positive weight") {
  std::mt19937_64 rng(9);
  std::normal_distribution<double> nd;
  LRModel model;
  model.num_features = 8;
  model.intercept = nd(rng);
  for (std::uint32_t j = 0; j < 8; ++j) model.weights.emplace_back(j, nd(rng));
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<std::uint32_t> row;
    for (std::uint32_t j = 0; j < 8; ++j)
      if (rng() % 2) row.push_back(j);
    const double p = predict_proba(model, row);
    for (std::uint32_t j = 0; j < 8; ++j) {
      if (std::binary_search(row.begin(), row.end(), j)) continue;
      auto more = row;
      more.insert(std::lower_bound(more.begin(), more.end(), j), j);
      const double q = predict_proba(model, more);
      if (model.weight(j) > 0) CHECK(q > p);
      if (model.weight(j) < 0) CHECK(q < p);
    }
  }
}

TEST_CASE("null model at lambda_max") {
  std::mt19937_64 rng(4);
  auto dense = oracle::random_dense(rng, 60, 12, 0.3);
  auto m = SparseBinaryMatrix::from_dense(dense);
  auto y = oracle::random_labels(rng, 60, 0.3);
  const double npos = static_cast<double>(std::count(y.begin(), y.end(), 1));
  const double nneg = 60 - npos;
  CHECK(null_intercept(y) == doctest::Approx(std::log(npos / nneg)).epsilon(1e-12));

  // lambda_max = max_j |A_j^T (y01 - p0)| with p0 the base rate.
  const double p0 = npos / 60.0;
  double lmax = 0;
  for (std::size_t j = 0; j < 12; ++j) {
    double g = 0;
    for (std::size_t i = 0; i < 60; ++i) g += dense[i][j] * ((y[i] > 0 ? 1.0 : 0.0) - p0);
    lmax = std::max(lmax, std::abs(g));
  }
  CHECK(lambda_max(m, y) == doctest::Approx(lmax).epsilon(1e-12));

  auto path = fit_path(m, y, PathConfig{});
  REQUIRE(!path.models.empty());
  CHECK(path.lambdas.front() == doctest::Approx(lmax));
  CHECK(path.models.front().weights.empty());
  CHECK(std::abs(path.models.front().intercept - std::log(npos / nneg)) < 1e-8);
  for (std::size_t t = 1; t < path.lambdas.size(); ++t) CHECK(path.lambdas[t] < path.lambdas[t - 1]);
}

TEST_CASE("lambda grid is geometric") {
  PathConfig c;
  auto g = lambda_grid(2.0, c);
  REQUIRE(g.size() == 100);
  CHECK(g.front() == doctest::Approx(2.0));
  CHECK(g.back() == doctest::Approx(2e-4));
  for (std::size_t t = 1; t < g.size(); ++t) CHECK(g[t] / g[t - 1] == doctest::Approx(g[1] / g[0]));
}

TEST_CASE("single class is rejected") {
  auto m = SparseBinaryMatrix::from_dense({{1}, {0}});
  std::vector<std::int8_t> y{1, 1};
  CHECK_THROWS_AS(fit_path(m, y, PathConfig{}), DataError);
}

TEST_CASE("an indicator feature gets positive weight") {
  // Feature 0 is on for most positives and no negatives; feature 1 is noise.
  std::vector<std::vector<int>> dense;
  std::vector<std::int8_t> y;
  for (int i = 0; i < 40; ++i) {
    const bool pos = i < 20;
    dense.push_back({pos && i % 5 != 0 ? 1 : 0, i % 3 == 0 ? 1 : 0});
    y.push_back(pos ? 1 : -1);
  }
  auto m = SparseBinaryMatrix::from_dense(dense);
  auto path = fit_path(m, y, explicit_grid({lambda_max(m, y) * 0.1}));
  CHECK(path.models.back().weight(0) > 0);
}

TEST_CASE("coordinate descent reaches the same objective as accelerated proximal gradient") {
  std::mt19937_64 rng(21);
  for (int instance = 0; instance < 3; ++instance) {
    auto dense = oracle::random_dense(rng, 20, 10, 0.35);
    auto m = SparseBinaryMatrix::from_dense(dense);
    auto y = oracle::random_labels(rng, 20);
    const double lmax = lambda_max(m, y);
    std::vector<double> grid;
    for (double r : {0.9, 0.5, 0.25, 0.1, 0.05}) grid.push_back(r * lmax);
    auto path = fit_path(m, y, explicit_grid(grid));
    REQUIRE(path.models.size() == grid.size());
    for (std::size_t t = 0; t < grid.size(); ++t) {
      const auto ref = oracle::fista(dense, y, grid[t]);
      const auto x = path.models[t].dense_weights();
      const double ours = oracle::lr_objective(dense, y, x, path.models[t].intercept, grid[t]);
      CAPTURE(instance);
      CAPTURE(t);
      CHECK(std::abs(ours - ref.objective) <= 1e-6 * std::max(1.0, std::abs(ref.objective)));
      CHECK(path.models[t].objective_value == doctest::Approx(ours).epsilon(1e-10));
    }
  }
}

TEST_CASE("objective never increases across passes") {
  std::mt19937_64 rng(5);
  auto dense = oracle::random_dense(rng, 200, 40, 0.15);
  auto m = SparseBinaryMatrix::from_dense(dense);
  auto y = oracle::random_labels(rng, 200);
  PathConfig c;
  c.num_lambdas = 30;
  c.min_ratio = 1e-3;
  c.early_stop = false;
  FitTrace trace;
  auto path = fit_path(m, y, c, &trace);
  REQUIRE(trace.objective_per_pass.size() > path.lambdas.size());
  // Within one lambda the objective is non-increasing; a new (smaller) lambda
  // can only lower it further at the warm start.
  std::size_t increases = 0;
  for (std::size_t k = 1; k < trace.objective_per_pass.size(); ++k) {
    const double prev = trace.objective_per_pass[k - 1], cur = trace.objective_per_pass[k];
    if (cur > prev + 1e-12 * std::max(1.0, std::abs(prev))) ++increases;
  }
  CHECK(increases == 0);
}

TEST_CASE("solutions satisfy the optimality conditions") {
  std::mt19937_64 rng(6);
  auto dense = oracle::random_dense(rng, 300, 60, 0.1);
  auto m = SparseBinaryMatrix::from_dense(dense);
  auto y = oracle::random_labels(rng, 300);
  PathConfig c;
  c.num_lambdas = 20;
  c.min_ratio = 1e-2;
  c.early_stop = false;
  auto path = fit_path(m, y, c);
  for (const auto& model : path.models) {
    CHECK(model.converged);
    auto r = kkt_residual(m, y, model);
    CAPTURE(model.lambda);
    CHECK(r.max_zero_violation < 1e-4);
    CHECK(r.max_active_residual < 1e-4);
    CHECK(std::abs(r.intercept_gradient) < 1e-4);
  }
}

TEST_CASE("duplicated columns give the same predictions") {
  std::mt19937_64 rng(8);
  auto dense = oracle::random_dense(rng, 80, 6, 0.3);
  auto y = oracle::random_labels(rng, 80);
  auto wide = dense;
  for (auto& r : wide) r.push_back(r[2]);
  auto m = SparseBinaryMatrix::from_dense(dense);
  auto mw = SparseBinaryMatrix::from_dense(wide);
  const double lam = 0.1 * lambda_max(m, y);
  auto a = fit_path(m, y, explicit_grid({lam})).models.back();
  auto b = fit_path(mw, y, explicit_grid({lam})).models.back();
  auto pa = predict_proba(a, m);
  auto pb = predict_proba(b, mw);
  for (std::size_t i = 0; i < pa.size(); ++i) CHECK(std::abs(pa[i] - pb[i]) < 1e-4);
  CHECK(b.weight(2) + b.weight(6) == doctest::Approx(a.weight(2)).epsilon(1e-4));
}

TEST_CASE("one standard error rule") {
  std::vector<double> loss{0.30, 0.25, 0.24, 0.26};
  std::vector<double> se(4, 0.02);
  CHECK(one_standard_error_index(loss, se) == 1);
  std::vector<double> flat(5, 0.4), zero(5, 0.0);
  CHECK(one_standard_error_index(flat, zero) == 0);
  std::vector<double> tight{0.5, 0.3, 0.2}, tight_se{0.0, 0.0, 0.0};
  CHECK(one_standard_error_index(tight, tight_se) == 2);
}

TEST_CASE("stratified folds balance the classes") {
  std::vector<std::int8_t> y;
  for (int i = 0; i < 37; ++i) y.push_back(i < 12 ? 1 : -1);
  auto f = stratified_folds(y, 5, 77);
  REQUIRE(f.size() == y.size());
  std::vector<int> pos(5), all(5);
  for (std::size_t i = 0; i < y.size(); ++i) {
    REQUIRE(f[i] < 5);
    ++all[f[i]];
    if (y[i] > 0) ++pos[f[i]];
  }
  CHECK(*std::max_element(pos.begin(), pos.end()) - *std::min_element(pos.begin(), pos.end()) <= 1);
  CHECK(*std::max_element(all.begin(), all.end()) - *std::min_element(all.begin(), all.end()) <= 1);
  CHECK(stratified_folds(y, 5, 77) == f);
  CHECK(stratified_folds(y, 5, 78) != f);
}

TEST_CASE("leave-one-out CV matches brute-force refits") {
  std::mt19937_64 rng(12);
  const std::size_t M = 10;
  auto dense = oracle::random_dense(rng, M, 5, 0.4);
  auto y = oracle::random_labels(rng, M);
  // Make the problem non-separable so every refit has a finite optimum.
  dense.push_back(dense[0]);
  y.push_back(static_cast<std::int8_t>(-y[0]));
  dense.erase(dense.begin() + 9);
  y.erase(y.begin() + 9);
  auto m = SparseBinaryMatrix::from_dense(dense);
  const double lmax = lambda_max(m, y);
  std::vector<double> grid;
  for (double r : {1.0, 0.7, 0.5, 0.35, 0.25, 0.15}) grid.push_back(r * lmax);
  auto cv = cv_select_lambda(m, y, M, explicit_grid(grid), 1);
  REQUIRE(cv.lambdas.size() == grid.size());

  std::vector<double> mean(grid.size(), 0.0), se(grid.size(), 0.0);
  std::vector<std::vector<double>> losses(grid.size());
  for (std::size_t out = 0; out < M; ++out) {
    oracle::Dense train;
    std::vector<std::int8_t> ty;
    for (std::size_t i = 0; i < M; ++i) {
      if (i == out) continue;
      train.push_back(dense[i]);
      ty.push_back(y[i]);
    }
    for (std::size_t t = 0; t < grid.size(); ++t) {
      auto s = oracle::fista(train, ty, grid[t]);
      double eta = s.b;
      for (std::size_t j = 0; j < 5; ++j) eta += dense[out][j] * s.x[j];
      losses[t].push_back(oracle::softplus_neg(y[out] * eta));
    }
  }
  for (std::size_t t = 0; t < grid.size(); ++t) {
    mean[t] = std::accumulate(losses[t].begin(), losses[t].end(), 0.0) / M;
    double ss = 0;
    for (double l : losses[t]) ss += (l - mean[t]) * (l - mean[t]);
    se[t] = std::sqrt(ss / (M - 1)) / std::sqrt(double(M));
    CAPTURE(t);
    CHECK(cv.mean_loss[t] == doctest::Approx(mean[t]).epsilon(1e-4));
    CHECK(cv.std_error[t] == doctest::Approx(se[t]).epsilon(1e-3));
  }
  std::size_t best = std::min_element(mean.begin(), mean.end()) - mean.begin();
  std::size_t expect = 0;
  while (mean[expect] > mean[best] + se[best]) ++expect;
  CHECK(cv.chosen_index == expect);
  CHECK(cv.chosen_lambda == grid[expect]);
}

TEST_CASE("parallel CV equals serial CV") {
  std::mt19937_64 rng(13);
  auto dense = oracle::random_dense(rng, 120, 30, 0.2);
  auto y = oracle::random_labels(rng, 120);
  auto m = SparseBinaryMatrix::from_dense(dense);
  PathConfig c;
  c.num_lambdas = 25;
  auto ref = serial::cv_select_lambda(m, y, 5, c, 3);
  for (int threads : {1, 2, 4}) {
    set_thread_count(threads);
    auto par = cv_select_lambda(m, y, 5, c, 3);
    CHECK(par.lambdas == ref.lambdas);
    CHECK(par.mean_loss == ref.mean_loss);
    CHECK(par.std_error == ref.std_error);
    CHECK(par.chosen_index == ref.chosen_index);
    CHECK(par.model.weights == ref.model.weights);
  }
  set_thread_count(0);
}

TEST_CASE("CV argument errors") {
  auto m = SparseBinaryMatrix::from_dense({{1}, {0}, {1}});
  std::vector<std::int8_t> y{1, -1, 1};
  CHECK_THROWS_AS(cv_select_lambda(m, y, 1, PathConfig{}, 0), UsageError);
  CHECK_THROWS_AS(cv_select_lambda(m, y, 4, PathConfig{}, 0), UsageError);
}

TEST_CASE("model file round trip and parallel prediction") {
  std::mt19937_64 rng(14);
  auto dense = oracle::random_dense(rng, 100, 20, 0.3);
  auto y = oracle::random_labels(rng, 100);
  auto m = SparseBinaryMatrix::from_dense(dense);
  auto model = fit_path(m, y, explicit_grid({0.05 * lambda_max(m, y)})).models.back();
  REQUIRE(!model.weights.empty());
  std::stringstream ss;
  write_model(ss, model);
  auto back = read_model(ss);
  CHECK(back.num_features == model.num_features);
  CHECK(back.intercept == model.intercept);
  CHECK(back.lambda == model.lambda);
  CHECK(back.weights == model.weights);
  for (int threads : {1, 3}) {
    set_thread_count(threads);
    CHECK(predict_proba(model, m) == serial::predict_proba(model, m));
  }
  set_thread_count(0);

  std::istringstream bad("3 0 0\n5\t1.0\n");
  CHECK_THROWS_AS(read_model(bad), DataError);
  std::istringstream unsorted("3 0 0\n1\t1.0\n0\t2.0\n");
  CHECK_THROWS_AS(read_model(unsorted), DataError);
  std::istringstream header("3 0\n");
  CHECK_THROWS_AS(read_model(header), DataError);
}
