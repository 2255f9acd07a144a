#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hypuc/json_io.hpp"

namespace hypuc {

struct ScoredRecord {
  double mean = 0.0;
  double sigma = 1.0;
  double target = 0.0;
};

struct RegressionMetrics {
  double mse = 0.0;
  double mae = 0.0;
  double pearson = 0.0;   // NaN when either vector is constant
  double spearman = 0.0;  // NaN when either vector is constant
  bool correlation_defined = true;
};

RegressionMetrics regression_metrics(std::span<const double> predicted, std::span<const double> target);

// Average (1-based) ranks, ties share the mean of their positions.
std::vector<double> average_ranks(std::span<const double> v);
// NaN when either input has zero variance.
double pearson(std::span<const double> a, std::span<const double> b);
double spearman(std::span<const double> a, std::span<const double> b);

// Mean of 0.5 log(2 pi sigma^2) + e^2 / (2 sigma^2).
double gaussian_nll(std::span<const ScoredRecord> records);

// Records binned by predicted variance into equal-width bins;
// sum_b |B_b|/N * |mean e^2 - mean sigma^2| over non-empty bins.
double uce(std::span<const ScoredRecord> records, std::size_t n_bins = 10);

// Half-width convention of the prediction interval.
enum class IntervalConvention {
  // [y_hat -+ (C^-1(alpha) / 2) sigma], C^-1 the one-sided normal quantile
  // rounded to three decimals (1.645 at alpha = 0.95).
  half_quantile,
  // [y_hat -+ z sigma], z the two-sided quantile Phi^-1((1 + alpha) / 2).
  standard_z,
};

struct IntervalMetrics {
  double alpha = 0.95;
  double coverage = 0.0;
  double mean_length = 0.0;
};

double interval_half_width_factor(double alpha, IntervalConvention convention);
IntervalMetrics interval_metrics(std::span<const ScoredRecord> records, double alpha = 0.95,
                                 IntervalConvention convention = IntervalConvention::half_quantile);

struct ClassificationMetrics {
  double auc = 0.0;  // NaN when only one class is present
  double sensitivity = 0.0;
  double specificity = 0.0;
  double ppv = 0.0;
  double npv = 0.0;
  double threshold = 0.0;
  bool auc_defined = true;
};

// Mann-Whitney AUC with half credit for ties.
double auc(std::span<const double> scores, std::span<const int> labels);
// Positive prediction iff score > threshold.
ClassificationMetrics classification_metrics(std::span<const double> scores, std::span<const int> labels,
                                             double threshold);

struct EvalReport {
  RegressionMetrics regression;
  double uce = 0.0;
  double nll = 0.0;
  std::vector<IntervalMetrics> intervals;  // in the order requested
  IntervalConvention convention = IntervalConvention::half_quantile;
  std::optional<ClassificationMetrics> classification;
};

EvalReport evaluate(std::span<const ScoredRecord> records, std::span<const double> alphas = {},
                    IntervalConvention convention = IntervalConvention::half_quantile);

json to_json(const EvalReport& r);
// Aligned plain-text table in the column order
// MSE MAE Spear Pears UCE NLL I(alpha) <len>, plus classification columns if present.
std::string format_table(const EvalReport& r, const std::string& row_label);

}  // namespace hypuc
