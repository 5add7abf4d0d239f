#include "sentinel/lr.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>
#include <random>
#include <stdexcept>
#include <unordered_map>

#include "sentinel/error.hpp"
#include "sentinel/util.hpp"

namespace sentinel {

double log1p_exp_neg(double z) {
  return z > 0 ? std::log1p(std::exp(-z)) : -z + std::log1p(std::exp(z));
}

double logistic(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double LRModel::margin(std::span<const std::uint32_t> row) const {
  double sum = 0.0;
  for (auto j : row) {
    if (j >= num_features) throw std::out_of_range("feature index outside model dimension");
    sum += weight(j);
  }
  return sum + intercept;
}

double LRModel::weight(std::uint32_t j) const {
  auto it = std::lower_bound(weights.begin(), weights.end(), j,
                             [](const auto& w, std::uint32_t key) { return w.first < key; });
  return it != weights.end() && it->first == j ? it->second : 0.0;
}

std::vector<double> LRModel::dense_weights() const {
  std::vector<double> x(num_features, 0.0);
  for (const auto& [j, w] : weights) x[j] = w;
  return x;
}

LRModel LRModel::from_dense(std::span<const double> x, double b, double lambda) {
  LRModel m;
  m.num_features = x.size();
  for (std::size_t j = 0; j < x.size(); ++j) {
    if (x[j] != 0.0) m.weights.emplace_back(static_cast<std::uint32_t>(j), x[j]);
  }
  m.intercept = b;
  m.lambda = lambda;
  return m;
}

namespace {

void check_problem(const SparseBinaryMatrix& matrix, std::span<const std::int8_t> labels) {
  if (labels.size() != matrix.rows()) {
    throw DataError("label count " + std::to_string(labels.size()) + " does not match matrix rows " +
                    std::to_string(matrix.rows()));
  }
}

inline double target(std::int8_t y) { return y > 0 ? 1.0 : 0.0; }

inline double soft_threshold(double z, double gamma) {
  if (z > gamma) return z - gamma;
  if (z < -gamma) return z + gamma;
  return 0.0;
}

// Column-major copy of a binary matrix.
struct ColumnIndex {
  std::vector<std::size_t> ptr;
  std::vector<std::uint32_t> rows;

  explicit ColumnIndex(const SparseBinaryMatrix& m) : ptr(m.cols() + 1, 0), rows(m.nnz()) {
    for (std::size_t i = 0; i < m.rows(); ++i) {
      for (auto j : m.row(i)) ++ptr[j + 1];
    }
    std::partial_sum(ptr.begin(), ptr.end(), ptr.begin());
    std::vector<std::size_t> fill(ptr.begin(), ptr.end() - 1);
    for (std::size_t i = 0; i < m.rows(); ++i) {
      for (auto j : m.row(i)) rows[fill[j]++] = static_cast<std::uint32_t>(i);
    }
  }

  std::span<const std::uint32_t> column(std::size_t j) const { return {rows.data() + ptr[j], ptr[j + 1] - ptr[j]}; }
  std::size_t cols() const { return ptr.size() - 1; }
};

double column_gradient(std::span<const std::uint32_t> col, std::span<const double> eta,
                       std::span<const std::int8_t> labels) {
  double g = 0.0;
  for (auto i : col) g += logistic(eta[i]) - target(labels[i]);
  return g;
}

double total_loss(std::span<const double> eta, std::span<const std::int8_t> labels) {
  double loss = 0.0;
  for (std::size_t i = 0; i < eta.size(); ++i) loss += log1p_exp_neg(labels[i] * eta[i]);
  return loss;
}

// First column of every group of identical nonempty columns. Duplicates share
// gradient and curvature, so putting all their mass on one copy is an exact
// minimizer of the l1 problem and spares the solver a flat valley.
std::vector<std::uint32_t> distinct_columns(const ColumnIndex& cols) {
  std::unordered_map<std::uint64_t, std::vector<std::uint32_t>> buckets;
  std::vector<std::uint32_t> out;
  for (std::size_t j = 0; j < cols.cols(); ++j) {
    const auto col = cols.column(j);
    if (col.empty()) continue;
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (auto i : col) h = mix64(h ^ i);
    auto& bucket = buckets[h];
    const bool seen = std::any_of(bucket.begin(), bucket.end(), [&](std::uint32_t k) {
      const auto other = cols.column(k);
      return std::equal(col.begin(), col.end(), other.begin(), other.end());
    });
    if (seen) continue;
    bucket.push_back(static_cast<std::uint32_t>(j));
    out.push_back(static_cast<std::uint32_t>(j));
  }
  return out;
}

// Probability and loss of one row from a shared exp(-|eta|).
struct RowState {
  double p;
  double loss;
};

inline RowState row_state(double eta, std::int8_t y) {
  const double e = std::exp(-std::abs(eta));
  const double z = y * eta;
  return {eta >= 0 ? 1.0 / (1.0 + e) : e / (1.0 + e), std::log1p(e) + (z > 0 ? 0.0 : -z)};
}

// Above this many active features the dense Newton model gets too large and
// the solver stays with exact coordinate moves.
inline constexpr std::size_t kMaxNewtonActive = 2048;

/// Coordinate descent state for one problem; reused along the path.
/// Per-row probabilities and losses are cached and refreshed only for rows
/// whose margin moves.
class Solver {
 public:
  Solver(const SparseBinaryMatrix& matrix, std::span<const std::int8_t> labels)
      : cols_(matrix), labels_(labels), x_(matrix.cols(), 0.0), eta_(matrix.rows(), 0.0),
        p_(matrix.rows(), 0.5), loss_(matrix.rows(), 0.0), trial_(matrix.rows()),
        distinct_(distinct_columns(cols_)) {}

  void reset_null(double b) {
    std::fill(x_.begin(), x_.end(), 0.0);
    b_ = b;
    std::fill(eta_.begin(), eta_.end(), b);
    for (std::size_t i = 0; i < eta_.size(); ++i) {
      const auto s = row_state(b, labels_[i]);
      p_[i] = s.p;
      loss_[i] = s.loss;
    }
  }

  std::span<const double> eta() const { return eta_; }
  const std::vector<double>& x() const { return x_; }
  double b() const { return b_; }

  double objective(double lambda) const {
    double l1 = 0.0;
    for (double v : x_) l1 += std::abs(v);
    return total_loss(eta_, labels_) + lambda * l1;
  }

  // Returns passes used; `converged` reports whether the tolerance was met.
  std::size_t fit(double lambda, const PathConfig& cfg, bool& converged, FitTrace* trace) {
    std::size_t passes = 0;
    converged = false;
    std::vector<std::uint32_t> active;
    while (passes < cfg.max_passes) {
      double delta = full_sweep(lambda);
      ++passes;
      record(trace, lambda);
      if (delta < cfg.tolerance) {
        converged = true;
        break;
      }
      active.clear();
      for (std::size_t j = 0; j < x_.size(); ++j) {
        if (x_[j] != 0.0) active.push_back(static_cast<std::uint32_t>(j));
      }
      while (passes < cfg.max_passes) {
        auto step = newton_step(active, lambda, cfg.tolerance);
        if (!step) {
          // No decrease along the Newton direction: fall back to exact coordinate moves.
          step = 0.0;
          for (auto j : active) *step = std::max(*step, update_coordinate(j, lambda));
          *step = std::max(*step, update_intercept());
        }
        ++passes;
        record(trace, lambda);
        if (*step < cfg.tolerance) break;
      }
    }
    return passes;
  }

 private:
  void record(FitTrace* trace, double lambda) const {
    if (trace) trace->objective_per_pass.push_back(objective(lambda));
  }

  double full_sweep(double lambda) {
    double delta = 0.0;
    for (auto j : distinct_) delta = std::max(delta, update_coordinate(j, lambda));
    return std::max(delta, update_intercept());
  }

  /// One proximal Newton step on the active set: coordinate descent on the
  /// second-order model of the loss (dense active-set Hessian), then a
  /// backtracking search on the true objective. Returns the largest applied
  /// change, or nullopt when no tried step length decreases the objective.
  std::optional<double> newton_step(std::span<const std::uint32_t> active, double lambda, double tol) {
    const std::size_t m = eta_.size();
    const std::size_t a = active.size();
    if (a > kMaxNewtonActive) return std::nullopt;
    double hb = 0.0, rb = 0.0;
    w_.resize(m);
    for (std::size_t i = 0; i < m; ++i) {
      w_[i] = p_[i] * (1.0 - p_[i]);
      hb += w_[i];
      rb += p_[i] - target(labels_[i]);
    }
    if (hb <= 1e-12) return std::nullopt;

    // Active-set Hessian H[k][l] = sum of w_i over rows holding both features.
    row_ptr_.assign(m + 1, 0);
    for (auto j : active) {
      for (auto i : cols_.column(j)) ++row_ptr_[i + 1];
    }
    std::partial_sum(row_ptr_.begin(), row_ptr_.end(), row_ptr_.begin());
    row_slots_.resize(row_ptr_.back());
    fill_.assign(row_ptr_.begin(), row_ptr_.end() - 1);
    r_.assign(a, 0.0);
    for (std::size_t k = 0; k < a; ++k) {
      for (auto i : cols_.column(active[k])) {
        row_slots_[fill_[i]++] = static_cast<std::uint32_t>(k);
        r_[k] += p_[i] - target(labels_[i]);
      }
    }
    hess_.assign(a * a, 0.0);
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t s = row_ptr_[i]; s < row_ptr_[i + 1]; ++s) {
        for (std::size_t t = row_ptr_[i]; t < row_ptr_[i + 1]; ++t) hess_[row_slots_[s] * a + row_slots_[t]] += w_[i];
      }
    }

    // Coordinate descent on the quadratic model; r_ and rb hold its gradient.
    d_.assign(a, 0.0);
    double db = 0.0;
    constexpr int kMaxInner = 10'000;
    constexpr double kInnerRelTol = 1e-2;
    double inner_tol = 0.1 * tol;
    for (int it = 0; it < kMaxInner; ++it) {
      double delta = 0.0;
      for (std::size_t k = 0; k < a; ++k) {
        const double h = hess_[k * a + k];
        if (h <= 1e-12) continue;
        const double cur = x_[active[k]] + d_[k];
        const double delta_k = soft_threshold(h * cur - r_[k], lambda) / h - cur;
        if (delta_k == 0.0) continue;
        d_[k] += delta_k;
        const double* hk = hess_.data() + k * a;  // symmetric: row k is column k
        for (std::size_t l = 0; l < a; ++l) r_[l] += hk[l] * delta_k;
        rb += h * delta_k;
        delta = std::max(delta, std::abs(delta_k));
      }
      const double delta_b = -rb / hb;
      db += delta_b;
      for (std::size_t l = 0; l < a; ++l) r_[l] += hess_[l * a + l] * delta_b;
      rb += hb * delta_b;
      delta = std::max(delta, std::abs(delta_b));
      // The inner problem only needs to be solved to the scale of the step.
      if (it == 0) inner_tol = std::max(inner_tol, kInnerRelTol * delta);
      if (delta < inner_tol) break;
    }
    u_.assign(m, db);
    for (std::size_t k = 0; k < a; ++k) {
      if (d_[k] == 0.0) continue;
      for (auto i : cols_.column(active[k])) u_[i] += d_[k];
    }

    double l1_before = 0.0;
    for (auto j : active) l1_before += std::abs(x_[j]);
    double before = 0.0;
    for (std::size_t i = 0; i < m; ++i) before += loss_[i];
    before += lambda * l1_before;

    double alpha = 1.0;
    for (int halving = 0; halving < 30; ++halving, alpha *= 0.5) {
      double l1 = l1_before;
      for (std::size_t k = 0; k < active.size(); ++k) {
        l1 += std::abs(x_[active[k]] + alpha * d_[k]) - std::abs(x_[active[k]]);
      }
      double after = lambda * l1;
      for (std::size_t i = 0; i < m; ++i) {
        trial_[i] = row_state(eta_[i] + alpha * u_[i], labels_[i]);
        after += trial_[i].loss;
      }
      if (after > before) continue;
      double step = std::abs(alpha * db);
      for (std::size_t k = 0; k < active.size(); ++k) {
        const std::uint32_t j = active[k];
        const double next = x_[j] + alpha * d_[k];
        step = std::max(step, std::abs(next - x_[j]));
        x_[j] = next;
      }
      b_ += alpha * db;
      for (std::size_t i = 0; i < m; ++i) {
        eta_[i] += alpha * u_[i];
        p_[i] = trial_[i].p;
        loss_[i] = trial_[i].loss;
      }
      return step;
    }
    return std::nullopt;
  }

  // Evaluates the rows of `col` at margin + d into trial_; returns their loss sum.
  double trial_loss(std::span<const std::uint32_t> col, double d) {
    double loss = 0.0;
    for (auto i : col) {
      trial_[i] = row_state(eta_[i] + d, labels_[i]);
      loss += trial_[i].loss;
    }
    return loss;
  }

  void commit(std::span<const std::uint32_t> col, double d) {
    for (auto i : col) {
      eta_[i] += d;
      p_[i] = trial_[i].p;
      loss_[i] = trial_[i].loss;
    }
  }

  void commit_fresh(std::span<const std::uint32_t> col, double d) {
    for (auto i : col) {
      eta_[i] += d;
      const auto s = row_state(eta_[i], labels_[i]);
      p_[i] = s.p;
      loss_[i] = s.loss;
    }
  }

  double update_coordinate(std::size_t j, double lambda) {
    const auto col = cols_.column(j);
    if (col.empty()) return 0.0;
    double g = 0.0, h = 0.0;
    for (auto i : col) {
      const double p = p_[i];
      g += p - target(labels_[i]);
      h += p * (1.0 - p);
    }
    const double old = x_[j];
    double next = old;
    if (h > 1e-12) {
      next = soft_threshold(h * old - g, lambda) / h;
      if (next == old) return 0.0;
      double before = 0.0;
      for (auto i : col) before += loss_[i];
      before += lambda * std::abs(old);
      const double after = trial_loss(col, next - old) + lambda * std::abs(next);
      if (after <= before) {
        x_[j] = next;
        commit(col, next - old);
        return std::abs(next - old);
      }
    }
    // 1/4 bounds the logistic curvature, so this step never increases the objective.
    const double bound = 0.25 * static_cast<double>(col.size());
    next = soft_threshold(bound * old - g, lambda) / bound;
    const double d = next - old;
    if (d == 0.0) return 0.0;
    x_[j] = next;
    commit_fresh(col, d);
    return std::abs(d);
  }

  double update_intercept() {
    const std::size_t m = eta_.size();
    double g = 0.0, h = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      g += p_[i] - target(labels_[i]);
      h += p_[i] * (1.0 - p_[i]);
    }
    double d = 0.0;
    if (h > 1e-12) {
      d = -g / h;
      if (d == 0.0) return 0.0;
      double before = 0.0, after = 0.0;
      for (std::size_t i = 0; i < m; ++i) {
        before += loss_[i];
        trial_[i] = row_state(eta_[i] + d, labels_[i]);
        after += trial_[i].loss;
      }
      if (after <= before) {
        b_ += d;
        for (std::size_t i = 0; i < m; ++i) {
          eta_[i] += d;
          p_[i] = trial_[i].p;
          loss_[i] = trial_[i].loss;
        }
        return std::abs(d);
      }
    }
    d = -g / (0.25 * static_cast<double>(m));
    if (d == 0.0) return 0.0;
    b_ += d;
    for (std::size_t i = 0; i < m; ++i) {
      eta_[i] += d;
      const auto s = row_state(eta_[i], labels_[i]);
      p_[i] = s.p;
      loss_[i] = s.loss;
    }
    return std::abs(d);
  }

  ColumnIndex cols_;
  std::span<const std::int8_t> labels_;
  std::vector<double> x_;
  double b_ = 0.0;
  std::vector<double> eta_;
  std::vector<double> p_;
  std::vector<double> loss_;
  std::vector<RowState> trial_;
  std::vector<std::uint32_t> distinct_;
  std::vector<double> u_;  // margin change of the Newton direction
  std::vector<double> d_;  // weight change of the Newton direction, by active slot
  std::vector<double> w_, r_, hess_;
  std::vector<std::size_t> row_ptr_, fill_;
  std::vector<std::uint32_t> row_slots_;
};

std::pair<std::size_t, std::size_t> class_counts(std::span<const std::int8_t> labels) {
  std::size_t pos = 0, neg = 0;
  for (auto y : labels) {
    if (y == 1) {
      ++pos;
    } else if (y == -1) {
      ++neg;
    } else {
      throw DataError("labels must be -1 or +1");
    }
  }
  return {pos, neg};
}

}  // namespace

double objective(const SparseBinaryMatrix& matrix, std::span<const std::int8_t> labels, std::span<const double> x,
                 double b, double lambda) {
  check_problem(matrix, labels);
  if (x.size() != matrix.cols()) throw DataError("weight vector length does not match feature count");
  double loss = 0.0;
  for (std::size_t i = 0; i < matrix.rows(); ++i) {
    double eta = b;
    for (auto j : matrix.row(i)) eta += x[j];
    loss += log1p_exp_neg(labels[i] * eta);
  }
  double l1 = 0.0;
  for (double v : x) l1 += std::abs(v);
  return loss + lambda * l1;
}

void smooth_gradient(const SparseBinaryMatrix& matrix, std::span<const std::int8_t> labels, std::span<const double> x,
                     double b, std::span<double> grad_x, double& grad_b) {
  check_problem(matrix, labels);
  if (x.size() != matrix.cols() || grad_x.size() != matrix.cols()) {
    throw DataError("weight vector length does not match feature count");
  }
  std::fill(grad_x.begin(), grad_x.end(), 0.0);
  grad_b = 0.0;
  for (std::size_t i = 0; i < matrix.rows(); ++i) {
    double eta = b;
    for (auto j : matrix.row(i)) eta += x[j];
    const double r = logistic(eta) - target(labels[i]);
    for (auto j : matrix.row(i)) grad_x[j] += r;
    grad_b += r;
  }
}

double predict_proba(const LRModel& model, std::span<const std::uint32_t> row) {
  return logistic(model.margin(row));
}

std::vector<double> predict_proba(const LRModel& model, const SparseBinaryMatrix& matrix) {
  const auto x = model.dense_weights();
  std::vector<double> p(matrix.rows());
  const auto m = static_cast<std::int64_t>(matrix.rows());
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < m; ++i) {
    double sum = 0.0;
    for (auto j : matrix.row(i)) sum += j < x.size() ? x[j] : 0.0;
    p[i] = logistic(sum + model.intercept);
  }
  return p;
}

namespace serial {
std::vector<double> predict_proba(const LRModel& model, const SparseBinaryMatrix& matrix) {
  std::vector<double> p;
  p.reserve(matrix.rows());
  for (std::size_t i = 0; i < matrix.rows(); ++i) p.push_back(sentinel::predict_proba(model, matrix.row(i)));
  return p;
}
}  // namespace serial

double null_intercept(std::span<const std::int8_t> labels) {
  auto [pos, neg] = class_counts(labels);
  if (pos == 0 || neg == 0) throw DataError("labels contain a single class");
  return std::log(static_cast<double>(pos) / static_cast<double>(neg));
}

double lambda_max(const SparseBinaryMatrix& matrix, std::span<const std::int8_t> labels) {
  check_problem(matrix, labels);
  const double b0 = null_intercept(labels);
  const ColumnIndex cols(matrix);
  const std::vector<double> eta(matrix.rows(), b0);
  double best = 0.0;
  for (std::size_t j = 0; j < cols.cols(); ++j) best = std::max(best, std::abs(column_gradient(cols.column(j), eta, labels)));
  return best;
}

std::vector<double> lambda_grid(double lmax, const PathConfig& config) {
  if (!config.lambdas.empty()) {
    for (std::size_t t = 1; t < config.lambdas.size(); ++t) {
      if (!(config.lambdas[t] < config.lambdas[t - 1])) throw UsageError("lambda grid must be strictly decreasing");
    }
    return config.lambdas;
  }
  if (lmax <= 0.0) return {0.0};
  if (config.num_lambdas == 0) throw UsageError("lambda count must be positive");
  if (!(config.min_ratio > 0.0 && config.min_ratio < 1.0)) throw UsageError("lambda min ratio must be in (0,1)");
  std::vector<double> grid(config.num_lambdas);
  const double step = config.num_lambdas > 1 ? std::log(config.min_ratio) / static_cast<double>(config.num_lambdas - 1) : 0.0;
  for (std::size_t t = 0; t < grid.size(); ++t) grid[t] = lmax * std::exp(step * static_cast<double>(t));
  grid[0] = lmax;
  return grid;
}

LambdaPath fit_path(const SparseBinaryMatrix& matrix, std::span<const std::int8_t> labels, const PathConfig& config,
                    FitTrace* trace) {
  check_problem(matrix, labels);
  const double b0 = null_intercept(labels);
  LambdaPath path;
  path.lambda_max = lambda_max(matrix, labels);
  const auto grid = lambda_grid(path.lambda_max, config);

  Solver solver(matrix, labels);
  solver.reset_null(b0);
  const double null_dev = 2.0 * total_loss(solver.eta(), labels);
  double prev_explained = 0.0;

  for (std::size_t t = 0; t < grid.size(); ++t) {
    const double lambda = grid[t];
    bool converged = false;
    const std::size_t passes = solver.fit(lambda, config, converged, trace);

    LRModel model = LRModel::from_dense(solver.x(), solver.b(), lambda);
    model.passes = passes;
    model.converged = converged;
    model.objective_value = solver.objective(lambda);
    path.lambdas.push_back(lambda);
    path.models.push_back(std::move(model));

    if (config.early_stop && null_dev > 0.0) {
      const double explained = 1.0 - 2.0 * total_loss(solver.eta(), labels) / null_dev;
      if (explained >= config.max_dev_ratio) break;
      if (t >= 5 && explained - prev_explained < config.min_dev_change * explained) break;
      prev_explained = explained;
    }
  }
  return path;
}

KktResidual kkt_residual(const SparseBinaryMatrix& matrix, std::span<const std::int8_t> labels, const LRModel& model) {
  const auto x = model.dense_weights();
  std::vector<double> g(x.size());
  double gb = 0.0;
  smooth_gradient(matrix, labels, x, model.intercept, g, gb);
  KktResidual r;
  r.intercept_gradient = std::abs(gb);
  for (std::size_t j = 0; j < x.size(); ++j) {
    if (x[j] == 0.0) {
      r.max_zero_violation = std::max(r.max_zero_violation, std::abs(g[j]) - model.lambda);
    } else {
      r.max_active_residual = std::max(r.max_active_residual, std::abs(g[j] + model.lambda * (x[j] > 0 ? 1.0 : -1.0)));
    }
  }
  r.max_zero_violation = std::max(r.max_zero_violation, 0.0);
  return r;
}

// ---------------------------------------------------------------------------

std::size_t one_standard_error_index(std::span<const double> mean_loss, std::span<const double> std_error) {
  if (mean_loss.empty() || mean_loss.size() != std_error.size()) throw std::invalid_argument("bad CV curve");
  const auto best = static_cast<std::size_t>(std::min_element(mean_loss.begin(), mean_loss.end()) - mean_loss.begin());
  const double limit = mean_loss[best] + std_error[best];
  for (std::size_t t = 0; t < mean_loss.size(); ++t) {
    if (mean_loss[t] <= limit) return t;
  }
  return best;
}

std::vector<std::size_t> stratified_folds(std::span<const std::int8_t> labels, std::size_t folds, std::uint64_t seed) {
  if (folds < 2) throw UsageError("need at least 2 folds");
  std::vector<std::size_t> pos, neg;
  for (std::size_t i = 0; i < labels.size(); ++i) (labels[i] > 0 ? pos : neg).push_back(i);
  std::mt19937_64 rng(seed);
  auto shuffle = [&](std::vector<std::size_t>& v) {
    for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[rng() % i]);
  };
  shuffle(pos);
  shuffle(neg);
  std::vector<std::size_t> fold(labels.size());
  std::size_t slot = 0;
  for (auto i : pos) fold[i] = slot++ % folds;
  for (auto i : neg) fold[i] = slot++ % folds;
  return fold;
}

namespace {

struct FoldCurve {
  std::vector<double> loss;  // mean validation loss per lambda
};

FoldCurve run_fold(const SparseBinaryMatrix& matrix, std::span<const std::int8_t> labels,
                   std::span<const std::size_t> assignment, std::size_t f, const PathConfig& fold_config) {
  std::vector<std::size_t> train, valid;
  for (std::size_t i = 0; i < assignment.size(); ++i) (assignment[i] == f ? valid : train).push_back(i);
  std::vector<std::int8_t> train_labels;
  for (auto i : train) train_labels.push_back(labels[i]);
  auto [pos, neg] = class_counts(train_labels);
  if (pos == 0 || neg == 0) {
    throw DataError("CV fold " + std::to_string(f) + " training side holds a single class");
  }
  const auto path = fit_path(matrix.select_rows(train), train_labels, fold_config);
  FoldCurve curve;
  for (const auto& model : path.models) {
    double loss = 0.0;
    for (auto i : valid) loss += log1p_exp_neg(labels[i] * model.margin(matrix.row(i)));
    curve.loss.push_back(valid.empty() ? 0.0 : loss / static_cast<double>(valid.size()));
  }
  return curve;
}

template <bool Parallel>
CVResult cv_impl(const SparseBinaryMatrix& matrix, std::span<const std::int8_t> labels, std::size_t folds,
                 const PathConfig& config, std::uint64_t seed) {
  check_problem(matrix, labels);
  if (folds < 2) throw UsageError("CV needs at least 2 folds");
  if (folds > matrix.rows()) throw UsageError("more CV folds than samples");
  const auto full = fit_path(matrix, labels, config);
  const auto assignment = stratified_folds(labels, folds, seed);

  PathConfig fold_config = config;
  fold_config.lambdas = full.lambdas;

  std::vector<FoldCurve> curves(folds);
  const auto nf = static_cast<std::int64_t>(folds);
  if constexpr (Parallel) {
    std::vector<std::string> errors(folds);
#pragma omp parallel for schedule(dynamic)
    for (std::int64_t f = 0; f < nf; ++f) {
      try {
        curves[f] = run_fold(matrix, labels, assignment, static_cast<std::size_t>(f), fold_config);
      } catch (const std::exception& e) {
        errors[f] = e.what();
      }
    }
    for (const auto& e : errors) {
      if (!e.empty()) throw DataError(e);
    }
  } else {
    for (std::int64_t f = 0; f < nf; ++f) curves[f] = run_fold(matrix, labels, assignment, static_cast<std::size_t>(f), fold_config);
  }

  std::size_t length = full.lambdas.size();
  for (const auto& c : curves) length = std::min(length, c.loss.size());

  CVResult result;
  result.lambdas.assign(full.lambdas.begin(), full.lambdas.begin() + static_cast<std::ptrdiff_t>(length));
  const double k = static_cast<double>(folds);
  for (std::size_t t = 0; t < length; ++t) {
    double sum = 0.0;
    for (const auto& c : curves) sum += c.loss[t];
    const double mean = sum / k;
    double ss = 0.0;
    for (const auto& c : curves) ss += (c.loss[t] - mean) * (c.loss[t] - mean);
    result.mean_loss.push_back(mean);
    result.std_error.push_back(std::sqrt(ss / (k - 1.0)) / std::sqrt(k));
  }
  result.chosen_index = one_standard_error_index(result.mean_loss, result.std_error);
  result.chosen_lambda = result.lambdas[result.chosen_index];
  result.model = full.models[result.chosen_index];
  return result;
}

}  // namespace

CVResult cv_select_lambda(const SparseBinaryMatrix& matrix, std::span<const std::int8_t> labels, std::size_t folds,
                          const PathConfig& config, std::uint64_t seed) {
  return cv_impl<true>(matrix, labels, folds, config, seed);
}

namespace serial {
CVResult cv_select_lambda(const SparseBinaryMatrix& matrix, std::span<const std::int8_t> labels, std::size_t folds,
                          const PathConfig& config, std::uint64_t seed) {
  return cv_impl<false>(matrix, labels, folds, config, seed);
}
}  // namespace serial

// ---------------------------------------------------------------------------

void write_model(std::ostream& out, const LRModel& model) {
  out << model.num_features << ' ' << format_double(model.intercept) << ' ' << format_double(model.lambda) << '\n';
  for (const auto& [j, w] : model.weights) out << j << '\t' << format_double(w) << '\n';
}

LRModel read_model(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw DataError("model file: missing header");
  const auto head = split(trim(line), ' ');
  LRModel model;
  if (head.size() != 3) throw DataError("model file: header must be 'N b lambda'");
  auto n = parse_int(head[0]);
  auto b = parse_double(head[1]);
  auto lambda = parse_double(head[2]);
  if (!n || *n < 0 || !b || !lambda) throw DataError("model file: header must be 'N b lambda'");
  model.num_features = static_cast<std::size_t>(*n);
  model.intercept = *b;
  model.lambda = *lambda;
  std::size_t line_number = 1;
  while (std::getline(in, line)) {
    ++line_number;
    if (trim(line).empty()) continue;
    const auto f = split(trim(line), '\t');
    auto j = f.size() == 2 ? parse_int(f[0]) : std::nullopt;
    auto w = f.size() == 2 ? parse_double(f[1]) : std::nullopt;
    if (!j || !w || *j < 0 || static_cast<std::size_t>(*j) >= model.num_features ||
        (!model.weights.empty() && static_cast<std::uint32_t>(*j) <= model.weights.back().first)) {
      throw DataError("model file line " + std::to_string(line_number) + ": expected increasing feature_index<TAB>weight");
    }
    model.weights.emplace_back(static_cast<std::uint32_t>(*j), *w);
  }
  return model;
}

}  // namespace sentinel
