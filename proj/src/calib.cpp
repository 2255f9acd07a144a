#include "hypuc/calib.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "hypuc/error.hpp"

namespace hypuc {
namespace {

double sum_squared_ratios(std::span<const PredictionRecord> records) {
  if (records.empty()) throw CalibrationError("global_scale: empty record set");
  double sum = 0.0;
  for (const auto& r : records) {
    if (!(r.sigma > 0.0)) throw CalibrationError("global_scale: sigma must be positive");
    if (!r.target) throw CalibrationError("global_scale: record '" + r.id + "' has no target");
    const double z = (r.mean - *r.target) / r.sigma;
    sum += z * z;
  }
  return sum;
}

}  // namespace

double global_scale_objective(std::span<const PredictionRecord> records, double s) {
  const double m = static_cast<double>(records.size());
  return m * std::log(s) + sum_squared_ratios(records) / (2.0 * s * s);
}

double global_scale(std::span<const PredictionRecord> records) {
  const double s = std::sqrt(sum_squared_ratios(records) / static_cast<double>(records.size()));
  if (!(s > 0.0)) throw CalibrationError("global_scale: all residuals are zero");
  return s;
}

double global_scale_numeric(std::span<const PredictionRecord> records) {
  const double m = static_cast<double>(records.size());
  const double ss = sum_squared_ratios(records);
  if (!(ss > 0.0)) throw CalibrationError("global_scale: all residuals are zero");
  const auto f = [&](double log_s) {
    const double s = std::exp(log_s);
    return m * log_s + ss / (2.0 * s * s);
  };
  // Bracket wide enough for any ratio scale representable in double.
  double a = -350.0, b = 350.0;
  constexpr double inv_phi = 0.6180339887498949;
  double c = b - inv_phi * (b - a), d = a + inv_phi * (b - a);
  double fc = f(c), fd = f(d);
  for (int it = 0; it < 200 && b - a > 1e-6; ++it) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - inv_phi * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + inv_phi * (b - a);
      fd = f(d);
    }
  }
  // The objective is flat at the minimum, so refine on the derivative
  // d/ds = M/s - ss/s^3, whose sign changes exactly once.
  double lo = std::exp(a - 1e-3), hi = std::exp(b + 1e-3);
  const auto slope = [&](double s) { return m / s - ss / (s * s * s); };
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    (slope(mid) < 0.0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

std::size_t CalibrationArtifact::bin_of(double y_hat) const {
  if (eta.empty()) return 0;
  const double pos = (y_hat - y_min) / delta;
  if (!(pos > 0.0)) return 0;  // also catches NaN
  const double last = static_cast<double>(eta.size() - 1);
  if (pos >= last) return eta.size() - 1;
  return static_cast<std::size_t>(pos);
}

double CalibrationArtifact::calibrate(double y_hat, double sigma) const {
  const double e = eta.empty() ? fallback_eta : eta[bin_of(y_hat)];
  return e * s_star * sigma;
}

CalibrationArtifact CalibrationArtifact::global_only(double s_star) {
  CalibrationArtifact a;
  a.s_star = s_star;
  a.y_min = 0.0;
  a.delta = 1.0;
  a.eta = {1.0};
  return a;
}

double bin_scale(std::vector<double> ratios, double xi) {
  if (ratios.empty()) throw CalibrationError("bin_scale: empty bin");
  if (!(xi > 0.0 && xi < 1.0)) throw DomainError("xi must lie in (0, 1)");
  std::sort(ratios.begin(), ratios.end());
  const double n = static_cast<double>(ratios.size());
  // Smallest count k with k / n > xi.
  std::size_t k = static_cast<std::size_t>(std::floor(xi * n)) + 1;
  while (k > 1 && static_cast<double>(k - 1) / n > xi) --k;
  while (static_cast<double>(k) / n <= xi) ++k;
  k = std::min(k, ratios.size());
  const double r = ratios[k - 1];
  return r > 0.0 ? r * (1.0 + kStrictNudge) : kStrictNudge;
}

CalibrationArtifact fit_hyperfine(std::span<const PredictionRecord> records, double s_star, double delta,
                                  double xi, std::size_t min_bin_count) {
  if (!(delta > 0.0) || !std::isfinite(delta)) throw DomainError("fit_hyperfine: delta must be positive");
  if (!(xi > 0.0 && xi < 1.0)) throw DomainError("fit_hyperfine: xi must lie in (0, 1)");
  if (!(s_star > 0.0)) throw DomainError("fit_hyperfine: s* must be positive");
  if (records.empty()) throw CalibrationError("fit_hyperfine: empty record set");

  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (const auto& r : records) {
    if (!r.target) throw CalibrationError("fit_hyperfine: record '" + r.id + "' has no target");
    if (!(r.sigma > 0.0)) throw CalibrationError("fit_hyperfine: sigma must be positive");
    lo = std::min({lo, r.mean, *r.target});
    hi = std::max({hi, r.mean, *r.target});
  }
  const auto bins = static_cast<std::size_t>(std::max(1.0, std::ceil((hi - lo) / delta)));
  if (bins < 10)
    throw DomainError("fit_hyperfine: delta too coarse, only " + std::to_string(bins) + " bins (need >= 10)");

  CalibrationArtifact art;
  art.s_star = s_star;
  art.y_min = lo;
  art.delta = delta;
  art.xi = xi;
  art.min_bin_count = std::max<std::size_t>(min_bin_count, 1);
  art.eta.assign(bins, art.fallback_eta);

  std::vector<std::vector<double>> ratios(bins);
  for (const auto& r : records)
    ratios[art.bin_of(r.mean)].push_back(std::abs(r.mean - *r.target) / (s_star * r.sigma));
  for (std::size_t b = 0; b < bins; ++b)
    if (ratios[b].size() >= art.min_bin_count) art.eta[b] = bin_scale(std::move(ratios[b]), xi);
  return art;
}

std::vector<double> bin_coverage(const CalibrationArtifact& art, std::span<const PredictionRecord> records) {
  std::vector<double> hits(art.n_bins(), 0.0), counts(art.n_bins(), 0.0);
  for (const auto& r : records) {
    if (!r.target) continue;
    const std::size_t b = art.bin_of(r.mean);
    counts[b] += 1.0;
    if (std::abs(r.mean - *r.target) < art.calibrate(r.mean, r.sigma)) hits[b] += 1.0;
  }
  std::vector<double> out(art.n_bins());
  for (std::size_t b = 0; b < out.size(); ++b)
    out[b] = counts[b] > 0.0 ? hits[b] / counts[b] : std::numeric_limits<double>::quiet_NaN();
  return out;
}

json to_json(const CalibrationArtifact& a) {
  return json{{"format_version", kCalibrationFormatVersion},
              {"s_star", a.s_star},
              {"y_min", a.y_min},
              {"delta", a.delta},
              {"xi", a.xi},
              {"eta", a.eta},
              {"fallback_eta", a.fallback_eta},
              {"min_bin_count", a.min_bin_count},
              {"source_checkpoint_hash", a.source_checkpoint_hash}};
}

CalibrationArtifact calibration_from_json(const json& j) {
  const int version = j.at("format_version").get<int>();
  if (version != kCalibrationFormatVersion)
    throw SchemaError("unsupported calibration format_version " + std::to_string(version));
  CalibrationArtifact a;
  a.s_star = j.at("s_star").get<double>();
  a.y_min = j.at("y_min").get<double>();
  a.delta = j.at("delta").get<double>();
  a.xi = j.at("xi").get<double>();
  a.eta = j.at("eta").get<std::vector<double>>();
  a.fallback_eta = j.at("fallback_eta").get<double>();
  a.min_bin_count = j.value("min_bin_count", std::size_t{1});
  a.source_checkpoint_hash = j.value("source_checkpoint_hash", std::string());
  if (!(a.s_star > 0.0) || !(a.delta > 0.0) || a.eta.empty()) throw SchemaError("invalid calibration artifact");
  for (double e : a.eta)
    if (!(e > 0.0) || !std::isfinite(e)) throw SchemaError("calibration eta must be finite and positive");
  return a;
}

void save_calibration(const CalibrationArtifact& a, const std::filesystem::path& path) {
  write_text_file(path, dump_canonical(to_json(a)));
}

CalibrationArtifact load_calibration(const std::filesystem::path& path) {
  return calibration_from_json(read_json_file(path));
}

}  // namespace hypuc
