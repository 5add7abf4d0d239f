// Wall-clock comparison of the OpenMP kernels against their serial
// reference versions on random data. Every pair is also checked for equal
// output.
//
//   sentinel_bench --rows 4000 --cols 20000 --threads 4

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <functional>
#include <random>
#include <string>

#include "sentinel/featurize.hpp"
#include "sentinel/lr.hpp"
#include "sentinel/parallel.hpp"
#include "sentinel/select.hpp"

using namespace sentinel;

namespace {

double seconds(const std::function<void()>& f, int reps) {
  double best = 1e300;
  for (int r = 0; r < reps; ++r) {
    const auto t0 = std::chrono::steady_clock::now();
    f();
    best = std::min(best, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
  }
  return best;
}

void row(const char* name, double serial, double parallel, bool same) {
  std::printf("%-24s %10.4f %10.4f %8.2fx  %s\n", name, serial, parallel, serial / parallel,
              same ? "same" : "DIFFERENT");
}

SparseBinaryMatrix random_matrix(std::mt19937_64& rng, std::size_t m, std::size_t n, std::size_t per_row) {
  SparseBinaryMatrix mat(n);
  std::uniform_int_distribution<std::uint32_t> col(0, static_cast<std::uint32_t>(n - 1));
  std::vector<std::uint32_t> r;
  for (std::size_t i = 0; i < m; ++i) {
    r.clear();
    for (std::size_t k = 0; k < per_row; ++k) r.push_back(col(rng));
    std::sort(r.begin(), r.end());
    r.erase(std::unique(r.begin(), r.end()), r.end());
    mat.add_row(r);
  }
  return mat;
}

std::vector<LogWindow> random_windows(std::mt19937_64& rng, std::size_t count, std::size_t keys) {
  std::vector<LogWindow> out(count);
  std::uniform_int_distribution<std::size_t> key(0, keys - 1);
  for (std::size_t w = 0; w < count; ++w) {
    out[w].window_id = "w" + std::to_string(w);
    for (int e = 0; e < 200; ++e) {
      NormalizedEvent ev;
      ev.timestamp_ms = e;
      ev.process_id = rng() % 8;
      ev.action = static_cast<ActionKind>(rng() % 6);
      ev.target = "C:\\bench\\" + std::to_string(key(rng));
      out[w].events.push_back(std::move(ev));
    }
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"serial vs parallel kernel timings"};
  std::size_t rows = 4000, cols = 20000, per_row = 150, windows = 2000;
  int threads = 0, reps = 3;
  std::uint64_t seed = 1;
  app.add_option("--rows", rows);
  app.add_option("--cols", cols);
  app.add_option("--per-row", per_row, "ones per row before deduplication");
  app.add_option("--windows", windows);
  app.add_option("--threads", threads);
  app.add_option("--reps", reps);
  app.add_option("--seed", seed);
  CLI11_PARSE(app, argc, argv);
  set_thread_count(threads);

  std::mt19937_64 rng(seed);
  const auto mat = random_matrix(rng, rows, cols, per_row);
  std::vector<std::int8_t> labels(rows);
  for (auto& y : labels) y = rng() % 2 ? 1 : -1;
  std::vector<std::size_t> all(rows);
  for (std::size_t i = 0; i < rows; ++i) all[i] = i;

  std::printf("%zu x %zu, %zu nonzeros, %d threads\n", rows, cols, mat.nnz(), thread_count());
  std::printf("%-24s %10s %10s %9s\n", "kernel", "serial s", "omp s", "speedup");

  {
    std::vector<double> a, b;
    const double ts = seconds([&] { a = serial::uncentered_correlation(mat, labels); }, reps);
    const double tp = seconds([&] { b = uncentered_correlation(mat, labels); }, reps);
    row("correlation", ts, tp, a == b);
  }
  {
    std::vector<std::uint32_t> a, b;
    const double ts = seconds([&] { a = serial::column_counts(mat, all); }, reps);
    const double tp = seconds([&] { b = mat.column_counts(all); }, reps);
    row("column_counts", ts, tp, a == b);
  }
  {
    const auto logs = random_windows(rng, windows, 500);
    const Featurizer featurizer(QGramLengths::parse("1,2,3"));
    std::vector<PackedLog> a, b;
    const double ts = seconds([&] {
      KeyInterner interner;
      a = serial::featurize(logs, interner, featurizer.lengths());
    }, reps);
    const double tp = seconds([&] {
      KeyInterner interner;
      b = featurizer.featurize(logs, interner);
    }, reps);
    row("featurize", ts, tp, a == b);
  }

  // A model with 2000 nonzero weights for prediction, a smaller problem for CV.
  LRModel model;
  model.num_features = cols;
  std::normal_distribution<double> nd;
  for (std::uint32_t j = 0; j < cols; j += std::max<std::size_t>(1, cols / 2000)) model.weights.emplace_back(j, nd(rng));
  {
    std::vector<double> a, b;
    const double ts = seconds([&] { a = serial::predict_proba(model, mat); }, reps);
    const double tp = seconds([&] { b = predict_proba(model, mat); }, reps);
    row("predict_proba", ts, tp, a == b);
  }
  {
    const auto small = random_matrix(rng, std::min<std::size_t>(rows, 1000), 2000, 40);
    std::vector<std::int8_t> y(small.rows());
    // Labels tied to a few columns so the path has something to find.
    for (std::size_t i = 0; i < small.rows(); ++i) {
      int s = 0;
      for (auto j : small.row(i)) s += j < 20;
      y[i] = (s > 0) != (rng() % 10 == 0) ? 1 : -1;
    }
    PathConfig config;
    config.num_lambdas = 30;
    CVResult a, b;
    const double ts = seconds([&] { a = serial::cv_select_lambda(small, y, 10, config, seed); }, 1);
    const double tp = seconds([&] { b = cv_select_lambda(small, y, 10, config, seed); }, 1);
    row("cv_select_lambda", ts, tp, a.mean_loss == b.mean_loss && a.model.weights == b.model.weights);
  }
  return 0;
}
