#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "sentinel/featurize.hpp"

namespace sentinel {

struct LRModel {
  std::size_t num_features = 0;
  std::vector<std::pair<std::uint32_t, double>> weights;  // nonzeros, sorted by index
  double intercept = 0.0;
  double lambda = 0.0;
  std::size_t passes = 0;
  double objective_value = 0.0;
  bool converged = true;

  double margin(std::span<const std::uint32_t> row) const;
  double weight(std::uint32_t j) const;
  std::vector<double> dense_weights() const;
  static LRModel from_dense(std::span<const double> x, double b, double lambda);
};

// log(1 + exp(-z)) without overflow.
double log1p_exp_neg(double z);
double logistic(double z);

/// Sum_i log(1 + exp(-y_i (a_i x + b))) + lambda ||x||_1. The intercept is unpenalized.
double objective(const SparseBinaryMatrix& matrix, std::span<const std::int8_t> labels,
                 std::span<const double> x, double b, double lambda);

// Gradient of the smooth (unpenalized) part with respect to x and b.
void smooth_gradient(const SparseBinaryMatrix& matrix, std::span<const std::int8_t> labels,
                     std::span<const double> x, double b, std::span<double> grad_x, double& grad_b);

double predict_proba(const LRModel& model, std::span<const std::uint32_t> row);
std::vector<double> predict_proba(const LRModel& model, const SparseBinaryMatrix& matrix);

namespace serial {
std::vector<double> predict_proba(const LRModel& model, const SparseBinaryMatrix& matrix);
}

struct PathConfig {
  std::size_t num_lambdas = 100;
  double min_ratio = 1e-4;                // lambda_min / lambda_max
  double tolerance = 1e-7;                // max coordinate update
  std::size_t max_passes = 100'000;
  std::vector<double> lambdas;            // explicit decreasing grid overrides the above
  bool early_stop = true;                 // deviance-based path truncation (geometric grid only)
  double max_dev_ratio = 0.999;
  double min_dev_change = 1e-5;
};

struct LambdaPath {
  std::vector<double> lambdas;
  std::vector<LRModel> models;
  double lambda_max = 0.0;
};

// Null-model intercept log(n+ / n-) and the smallest lambda with x = 0 optimal.
double null_intercept(std::span<const std::int8_t> labels);
double lambda_max(const SparseBinaryMatrix& matrix, std::span<const std::int8_t> labels);
std::vector<double> lambda_grid(double lambda_max, const PathConfig& config);

// Optional per-pass objective trace (for monotonicity checks).
struct FitTrace {
  std::vector<double> objective_per_pass;
};

/// Warm-started cyclic coordinate descent along a decreasing lambda grid.
/// Each coordinate takes a proximal Newton step, falling back to the
/// 1/4-curvature majorizer whenever the Newton step fails to decrease the
/// coordinate objective, so every pass is non-increasing.
/// Throws DataError when labels contain a single class.
LambdaPath fit_path(const SparseBinaryMatrix& matrix, std::span<const std::int8_t> labels,
                    const PathConfig& config, FitTrace* trace = nullptr);

struct KktResidual {
  double max_zero_violation = 0.0;    // max(|g_j| - lambda, 0) over x_j = 0
  double max_active_residual = 0.0;   // |g_j + lambda sign(x_j)| over x_j != 0
  double intercept_gradient = 0.0;
};
KktResidual kkt_residual(const SparseBinaryMatrix& matrix, std::span<const std::int8_t> labels,
                         const LRModel& model);

struct CVResult {
  std::vector<double> lambdas;
  std::vector<double> mean_loss;
  std::vector<double> std_error;
  std::size_t chosen_index = 0;
  double chosen_lambda = 0.0;
  LRModel model;  // refit on all rows at chosen_lambda
};

// Largest lambda (smallest index) whose mean loss is within one standard
// error of the minimum.
std::size_t one_standard_error_index(std::span<const double> mean_loss, std::span<const double> std_error);

// Stratified fold assignment (positives first, negatives continue the rotation).
std::vector<std::size_t> stratified_folds(std::span<const std::int8_t> labels, std::size_t folds,
                                          std::uint64_t seed);

inline constexpr std::size_t kDefaultCvFolds = 20;

/// Internal k-fold CV over the full-data lambda grid, mean per-sample logistic
/// loss on each validation fold, one-standard-error choice, refit on all rows.
CVResult cv_select_lambda(const SparseBinaryMatrix& matrix, std::span<const std::int8_t> labels,
                          std::size_t folds, const PathConfig& config, std::uint64_t seed);

namespace serial {
CVResult cv_select_lambda(const SparseBinaryMatrix& matrix, std::span<const std::int8_t> labels,
                          std::size_t folds, const PathConfig& config, std::uint64_t seed);
}

// Header `N b lambda`, then `feature_index<TAB>weight` for nonzeros.
void write_model(std::ostream& out, const LRModel& model);
LRModel read_model(std::istream& in);

}  // namespace sentinel
