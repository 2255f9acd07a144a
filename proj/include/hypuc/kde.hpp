#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace hypuc {

// Gaussian kernel density estimate over a fixed set of anchors.
class DensityModel {
 public:
  // Anchors within this many bandwidths of the query contribute to density().
  static constexpr double kTruncation = 8.0;

  DensityModel() = default;

  double bandwidth() const { return h_; }
  std::size_t size() const { return anchors_.size(); }
  std::span<const double> anchors() const { return anchors_; }

  // (1 / (n h)) sum_i phi((y - y_i) / h), summed over anchors within 8h of y.
  double density(double y) const;
  // Same sum over every anchor; used to bound the truncation error.
  double density_exact(double y) const;

  friend DensityModel fit_kde(std::span<const double> targets, double h);

 private:
  std::vector<double> anchors_;  // sorted
  double h_ = 1.0;
};

DensityModel fit_kde(std::span<const double> targets, double h);

// Inverse-density loss weights w(y) = rho(y)^-exponent, divided by the mean
// raw weight over the training targets unless normalisation is disabled.
class WeightScheme {
 public:
  WeightScheme(DensityModel density, double exponent, std::span<const double> train_targets,
               bool normalize = true);

  double exponent() const { return exponent_; }
  double normalizer() const { return normalizer_; }
  const DensityModel& density() const { return density_; }

  double raw_weight(double y) const;
  double weight(double y) const { return raw_weight(y) / normalizer_; }
  // Normalised weight of each training target, in the order they were given.
  std::span<const double> train_weights() const { return train_weights_; }

 private:
  DensityModel density_;
  double exponent_;
  double normalizer_ = 1.0;
  std::vector<double> train_weights_;
};

WeightScheme make_weights(const DensityModel& m, double exponent, std::span<const double> train_targets,
                          bool normalize = true);

}  // namespace hypuc
