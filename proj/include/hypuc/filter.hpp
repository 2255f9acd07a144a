#pragma once

#include <span>
#include <string>
#include <vector>

#include "hypuc/metrics.hpp"

namespace hypuc {

// Differential entropy of N(mu, sigma^2): 0.5 log(2 pi e sigma^2).
double entropy(double sigma_calib);

struct EntropyThreshold {
  double q = 1.0;
  double tau = 0.0;
  std::string source = "valid";
};

// Linear-interpolation quantile of sorted order statistics, position (n - 1) q.
double quantile_linear(std::vector<double> values, double q);

EntropyThreshold fit_threshold(std::span<const double> entropies, double q, std::string source = "valid");

struct Partition {
  std::vector<std::size_t> kept;     // entropy <= tau
  std::vector<std::size_t> flagged;  // entropy > tau
};

// Records carry calibrated sigma.
Partition partition(std::span<const ScoredRecord> records, const EntropyThreshold& thr);

struct FilterRow {
  double q = 1.0;
  double tau = 0.0;
  double kept_fraction = 1.0;
  double mae = 0.0;
  double mse = 0.0;
};

// One row per q. Thresholds come from `reference_entropies` (the validation
// split); q >= 1 keeps every record.
std::vector<FilterRow> filtering_curve(std::span<const ScoredRecord> records,
                                       std::span<const double> reference_entropies, std::span<const double> q_grid);

// {1.0, 0.9, ..., 0.1}
std::vector<double> default_q_grid();

std::string filter_curve_csv(std::span<const FilterRow> rows);

}  // namespace hypuc
