#include "hypuc/filter.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "hypuc/error.hpp"
#include "hypuc/json_io.hpp"

namespace hypuc {

double entropy(double sigma_calib) {
  if (!(sigma_calib > 0.0)) throw DomainError("entropy: sigma must be positive");
  return 0.5 * std::log(2.0 * std::numbers::pi * std::numbers::e * sigma_calib * sigma_calib);
}

double quantile_linear(std::vector<double> values, double q) {
  if (values.empty()) throw FitError("quantile of an empty set");
  if (!(q > 0.0 && q <= 1.0)) throw DomainError("quantile level must lie in (0, 1]");
  std::sort(values.begin(), values.end());
  const double pos = (static_cast<double>(values.size()) - 1.0) * q;
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

EntropyThreshold fit_threshold(std::span<const double> entropies, double q, std::string source) {
  EntropyThreshold t;
  t.q = q;
  t.tau = quantile_linear(std::vector<double>(entropies.begin(), entropies.end()), q);
  t.source = std::move(source);
  return t;
}

Partition partition(std::span<const ScoredRecord> records, const EntropyThreshold& thr) {
  Partition p;
  for (std::size_t i = 0; i < records.size(); ++i)
    (entropy(records[i].sigma) > thr.tau ? p.flagged : p.kept).push_back(i);
  return p;
}

std::vector<FilterRow> filtering_curve(std::span<const ScoredRecord> records,
                                       std::span<const double> reference_entropies, std::span<const double> q_grid) {
  std::vector<FilterRow> rows;
  for (double q : q_grid) {
    EntropyThreshold thr;
    thr.q = q;
    thr.tau = q >= 1.0 ? std::numeric_limits<double>::infinity() : fit_threshold(reference_entropies, q).tau;
    const Partition p = partition(records, thr);
    FilterRow row;
    row.q = q;
    row.tau = thr.tau;
    row.kept_fraction =
        records.empty() ? 0.0 : static_cast<double>(p.kept.size()) / static_cast<double>(records.size());
    double abs_sum = 0.0, sq_sum = 0.0;
    for (std::size_t i : p.kept) {
      const double e = records[i].mean - records[i].target;
      abs_sum += std::abs(e);
      sq_sum += e * e;
    }
    const double n = static_cast<double>(p.kept.size());
    row.mae = n > 0 ? abs_sum / n : std::numeric_limits<double>::quiet_NaN();
    row.mse = n > 0 ? sq_sum / n : std::numeric_limits<double>::quiet_NaN();
    rows.push_back(row);
  }
  return rows;
}

std::vector<double> default_q_grid() {
  std::vector<double> q;
  for (int k = 10; k >= 1; --k) q.push_back(k / 10.0);
  return q;
}

std::string filter_curve_csv(std::span<const FilterRow> rows) {
  std::string out = "q,kept_fraction,mae,mse\n";
  for (const auto& r : rows)
    out += format_double(r.q) + "," + format_double(r.kept_fraction) + "," + format_double(r.mae) + "," +
           format_double(r.mse) + "\n";
  return out;
}

}  // namespace hypuc
