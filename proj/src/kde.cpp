#include "hypuc/kde.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "hypuc/error.hpp"

namespace hypuc {
namespace {

constexpr double kInvSqrt2Pi = 0.3989422804014327;

inline double std_normal_pdf(double z) { return kInvSqrt2Pi * std::exp(-0.5 * z * z); }

}  // namespace

DensityModel fit_kde(std::span<const double> targets, double h) {
  if (targets.empty()) throw FitError("fit_kde: empty target set");
  if (!(h > 0.0) || !std::isfinite(h)) throw DomainError("fit_kde: bandwidth must be positive");
  DensityModel m;
  m.anchors_.assign(targets.begin(), targets.end());
  for (double y : m.anchors_)
    if (!std::isfinite(y)) throw FitError("fit_kde: non-finite target");
  std::sort(m.anchors_.begin(), m.anchors_.end());
  m.h_ = h;
  return m;
}

double DensityModel::density(double y) const {
  const double reach = kTruncation * h_;
  const auto lo = std::lower_bound(anchors_.begin(), anchors_.end(), y - reach);
  const auto hi = std::upper_bound(lo, anchors_.end(), y + reach);
  double sum = 0.0;
  for (auto it = lo; it != hi; ++it) sum += std_normal_pdf((y - *it) / h_);
  return sum / (static_cast<double>(anchors_.size()) * h_);
}

double DensityModel::density_exact(double y) const {
  double sum = 0.0;
  for (double a : anchors_) sum += std_normal_pdf((y - a) / h_);
  return sum / (static_cast<double>(anchors_.size()) * h_);
}

WeightScheme::WeightScheme(DensityModel density, double exponent, std::span<const double> train_targets,
                           bool normalize)
    : density_(std::move(density)), exponent_(exponent) {
  if (!(exponent >= 0.0) || !std::isfinite(exponent)) throw DomainError("weight exponent must be >= 0");
  train_weights_.reserve(train_targets.size());
  double total = 0.0;
  for (double y : train_targets) {
    const double w = raw_weight(y);
    train_weights_.push_back(w);
    total += w;
  }
  if (normalize && !train_weights_.empty()) {
    normalizer_ = total / static_cast<double>(train_weights_.size());
    for (double& w : train_weights_) w /= normalizer_;
  }
}

double WeightScheme::raw_weight(double y) const {
  if (exponent_ == 0.0) return 1.0;
  // Far from every anchor the truncated density underflows to zero; fall back
  // to the exact sum there so weights stay finite.
  double rho = density_.density(y);
  if (!(rho > 0.0)) rho = density_.density_exact(y);
  if (!(rho > 0.0)) rho = std::numeric_limits<double>::min();
  return std::pow(rho, -exponent_);
}

WeightScheme make_weights(const DensityModel& m, double exponent, std::span<const double> train_targets,
                          bool normalize) {
  return WeightScheme(m, exponent, train_targets, normalize);
}

}  // namespace hypuc
