#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hypuc/json_io.hpp"

namespace hypuc {

struct PredictionRecord {
  std::string id;
  double mean = 0.0;
  double sigma = 1.0;
  std::optional<double> target;  // absent at deployment
};

// Closed-form minimiser of M log s + (1 / 2s^2) sum (e_i / sigma_i)^2:
// s* = sqrt(mean((e_i / sigma_i)^2)). Records must carry targets.
double global_scale(std::span<const PredictionRecord> records);

// The same objective minimised numerically: golden-section search on log s
// to bracket the minimum, then bisection on the sign of the derivative.
double global_scale_numeric(std::span<const PredictionRecord> records);

// M log s + (1 / 2s^2) sum (e_i / sigma_i)^2.
double global_scale_objective(std::span<const PredictionRecord> records, double s);

inline constexpr int kCalibrationFormatVersion = 1;
inline constexpr double kStrictNudge = 1e-9;

struct CalibrationArtifact {
  double s_star = 1.0;
  double y_min = 0.0;
  double delta = 1.0;
  double xi = 0.95;
  std::vector<double> eta{1.0};
  double fallback_eta = 1.0;
  std::size_t min_bin_count = 1;  // bins with fewer validation records use fallback_eta
  std::string source_checkpoint_hash;

  std::size_t n_bins() const { return eta.size(); }
  // Bin containing y_hat; values outside the fitted range clamp to the end bins.
  std::size_t bin_of(double y_hat) const;
  // eta_bin(y_hat) * s* * sigma
  double calibrate(double y_hat, double sigma) const;

  // Single-factor calibration: every bin scale equals one.
  static CalibrationArtifact global_only(double s_star);
  static CalibrationArtifact identity() { return global_only(1.0); }
};

// Smallest order statistic of the ratios whose selection covers strictly more
// than a fraction xi of them, nudged up by kStrictNudge (relative) so the
// strict inequality ratio < eta holds for the covered samples.
double bin_scale(std::vector<double> ratios, double xi);

// Bins of width delta spanning min/max of {y} u {y_hat}; records are assigned
// by predicted value. Bins holding fewer than min_bin_count records (in
// particular empty bins) get fallback_eta. Requires at least 10 bins.
CalibrationArtifact fit_hyperfine(std::span<const PredictionRecord> records, double s_star, double delta, double xi,
                                  std::size_t min_bin_count = 1);

// Fraction of records per bin with |y_hat - y| < sigma_calib; NaN for empty bins.
std::vector<double> bin_coverage(const CalibrationArtifact& art, std::span<const PredictionRecord> records);

json to_json(const CalibrationArtifact& a);
CalibrationArtifact calibration_from_json(const json& j);
void save_calibration(const CalibrationArtifact& a, const std::filesystem::path& path);
CalibrationArtifact load_calibration(const std::filesystem::path& path);

}  // namespace hypuc
