#include "hypuc/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

#include <boost/math/distributions/normal.hpp>
#include <fmt/format.h>

#include "hypuc/error.hpp"

namespace hypuc {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

void require_same_size(std::size_t a, std::size_t b, const char* what) {
  if (a != b) throw ShapeError(std::string(what) + ": input sizes differ");
}

}  // namespace

std::vector<double> average_ranks(std::span<const double> v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(v.size());
  std::size_t i = 0;
  while (i < idx.size()) {
    std::size_t j = i;
    while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[idx[k]] = r;
    i = j + 1;
  }
  return ranks;
}

double pearson(std::span<const double> a, std::span<const double> b) {
  require_same_size(a.size(), b.size(), "pearson");
  const std::size_t n = a.size();
  if (n < 2) return kNaN;
  const double ma = std::accumulate(a.begin(), a.end(), 0.0) / static_cast<double>(n);
  const double mb = std::accumulate(b.begin(), b.end(), 0.0) / static_cast<double>(n);
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double da = a[i] - ma, db = b[i] - mb;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  if (saa == 0.0 || sbb == 0.0) return kNaN;
  return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

double spearman(std::span<const double> a, std::span<const double> b) {
  const auto ra = average_ranks(a);
  const auto rb = average_ranks(b);
  return pearson(ra, rb);
}

RegressionMetrics regression_metrics(std::span<const double> predicted, std::span<const double> target) {
  require_same_size(predicted.size(), target.size(), "regression_metrics");
  RegressionMetrics m;
  if (predicted.empty()) {
    m.mse = m.mae = m.pearson = m.spearman = kNaN;
    m.correlation_defined = false;
    return m;
  }
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    const double e = predicted[i] - target[i];
    m.mse += e * e;
    m.mae += std::abs(e);
  }
  m.mse /= static_cast<double>(predicted.size());
  m.mae /= static_cast<double>(predicted.size());
  m.pearson = pearson(predicted, target);
  m.spearman = spearman(predicted, target);
  m.correlation_defined = !std::isnan(m.pearson) && !std::isnan(m.spearman);
  return m;
}

double gaussian_nll(std::span<const ScoredRecord> records) {
  if (records.empty()) return kNaN;
  double sum = 0.0;
  for (const auto& r : records) {
    if (!(r.sigma > 0.0)) throw DomainError("gaussian_nll: sigma must be positive");
    const double var = r.sigma * r.sigma;
    const double e = r.mean - r.target;
    sum += 0.5 * std::log(2.0 * std::numbers::pi * var) + e * e / (2.0 * var);
  }
  return sum / static_cast<double>(records.size());
}

double uce(std::span<const ScoredRecord> records, std::size_t n_bins) {
  if (records.empty()) return kNaN;
  if (n_bins == 0) throw DomainError("uce: n_bins must be positive");
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (const auto& r : records) {
    if (!(r.sigma > 0.0)) throw DomainError("uce: sigma must be positive");
    const double var = r.sigma * r.sigma;
    lo = std::min(lo, var);
    hi = std::max(hi, var);
  }
  const double width = (hi - lo) / static_cast<double>(n_bins);
  std::vector<double> err(n_bins, 0.0), var(n_bins, 0.0), count(n_bins, 0.0);
  for (const auto& r : records) {
    const double v = r.sigma * r.sigma;
    std::size_t b = width > 0.0 ? static_cast<std::size_t>((v - lo) / width) : 0;
    b = std::min(b, n_bins - 1);
    const double e = r.mean - r.target;
    err[b] += e * e;
    var[b] += v;
    count[b] += 1.0;
  }
  const double n = static_cast<double>(records.size());
  double total = 0.0;
  for (std::size_t b = 0; b < n_bins; ++b)
    if (count[b] > 0.0) total += (count[b] / n) * std::abs(err[b] / count[b] - var[b] / count[b]);
  return total;
}

double interval_half_width_factor(double alpha, IntervalConvention convention) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw DomainError("interval alpha must lie in (0, 1)");
  const boost::math::normal_distribution<double> normal;
  if (convention == IntervalConvention::standard_z) return boost::math::quantile(normal, 0.5 * (1.0 + alpha));
  const double c = std::round(boost::math::quantile(normal, alpha) * 1000.0) / 1000.0;
  return 0.5 * c;
}

IntervalMetrics interval_metrics(std::span<const ScoredRecord> records, double alpha, IntervalConvention convention) {
  const double k = interval_half_width_factor(alpha, convention);
  IntervalMetrics m;
  m.alpha = alpha;
  if (records.empty()) {
    m.coverage = m.mean_length = kNaN;
    return m;
  }
  double inside = 0.0, length = 0.0;
  for (const auto& r : records) {
    const double half = k * r.sigma;
    if (r.target >= r.mean - half && r.target <= r.mean + half) inside += 1.0;
    length += 2.0 * half;
  }
  m.coverage = inside / static_cast<double>(records.size());
  m.mean_length = length / static_cast<double>(records.size());
  return m;
}

double auc(std::span<const double> scores, std::span<const int> labels) {
  require_same_size(scores.size(), labels.size(), "auc");
  double n_pos = 0.0, rank_sum = 0.0;
  const auto ranks = average_ranks(scores);
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (labels[i]) {
      n_pos += 1.0;
      rank_sum += ranks[i];
    }
  const double n_neg = static_cast<double>(labels.size()) - n_pos;
  if (n_pos == 0.0 || n_neg == 0.0) return kNaN;
  return (rank_sum - n_pos * (n_pos + 1.0) / 2.0) / (n_pos * n_neg);
}

ClassificationMetrics classification_metrics(std::span<const double> scores, std::span<const int> labels,
                                             double threshold) {
  require_same_size(scores.size(), labels.size(), "classification_metrics");
  ClassificationMetrics m;
  m.threshold = threshold;
  m.auc = auc(scores, labels);
  m.auc_defined = !std::isnan(m.auc);
  double tp = 0, fp = 0, tn = 0, fn = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const bool pred = scores[i] > threshold;
    if (labels[i])
      (pred ? tp : fn) += 1.0;
    else
      (pred ? fp : tn) += 1.0;
  }
  const auto ratio = [](double a, double b) { return b > 0.0 ? a / b : kNaN; };
  m.sensitivity = ratio(tp, tp + fn);
  m.specificity = ratio(tn, tn + fp);
  m.ppv = ratio(tp, tp + fp);
  m.npv = ratio(tn, tn + fn);
  return m;
}

EvalReport evaluate(std::span<const ScoredRecord> records, std::span<const double> alphas,
                    IntervalConvention convention) {
  EvalReport r;
  std::vector<double> pred, target;
  pred.reserve(records.size());
  target.reserve(records.size());
  for (const auto& s : records) {
    pred.push_back(s.mean);
    target.push_back(s.target);
  }
  r.regression = regression_metrics(pred, target);
  r.uce = uce(records);
  r.nll = gaussian_nll(records);
  r.convention = convention;
  static constexpr double kDefaultAlpha[] = {0.95};
  if (alphas.empty()) alphas = kDefaultAlpha;
  for (double a : alphas) r.intervals.push_back(interval_metrics(records, a, convention));
  return r;
}

namespace {

json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

}  // namespace

json to_json(const EvalReport& r) {
  json j{{"mse", number_or_null(r.regression.mse)},
         {"mae", number_or_null(r.regression.mae)},
         {"spearman", number_or_null(r.regression.spearman)},
         {"pearson", number_or_null(r.regression.pearson)},
         {"correlation_defined", r.regression.correlation_defined},
         {"uce", number_or_null(r.uce)},
         {"nll", number_or_null(r.nll)},
         {"interval_convention", r.convention == IntervalConvention::standard_z ? "standard_z" : "half_quantile"}};
  json rows = json::array();
  for (const auto& iv : r.intervals)
    rows.push_back({{"alpha", iv.alpha}, {"coverage", number_or_null(iv.coverage)},
                    {"mean_length", number_or_null(iv.mean_length)}});
  j["intervals"] = rows;
  const IntervalMetrics* headline = nullptr;
  for (const auto& iv : r.intervals)
    if (iv.alpha == 0.95) headline = &iv;
  j["interval_coverage_095"] = headline ? number_or_null(headline->coverage) : json(nullptr);
  j["mean_interval_len_095"] = headline ? number_or_null(headline->mean_length) : json(nullptr);
  if (r.classification) {
    const auto& c = *r.classification;
    j["classification"] = {{"auc", number_or_null(c.auc)},
                           {"auc_defined", c.auc_defined},
                           {"sensitivity", number_or_null(c.sensitivity)},
                           {"specificity", number_or_null(c.specificity)},
                           {"ppv", number_or_null(c.ppv)},
                           {"npv", number_or_null(c.npv)},
                           {"threshold", c.threshold}};
  }
  return j;
}

std::string format_table(const EvalReport& r, const std::string& row_label) {
  std::vector<std::string> head{"Method", "MSE", "MAE", "Spear.", "Pears.", "UCE", "NLL"};
  std::vector<std::string> row{row_label};
  const auto num = [](double v) { return std::isfinite(v) ? fmt::format("{:.4f}", v) : std::string("nan"); };
  for (double v : {r.regression.mse, r.regression.mae, r.regression.spearman, r.regression.pearson, r.uce, r.nll})
    row.push_back(num(v));
  for (const auto& iv : r.intervals) {
    head.push_back(fmt::format("I({:g})", iv.alpha));
    row.push_back(num(iv.coverage));
    head.push_back(fmt::format("<len({:g})>", iv.alpha));
    row.push_back(num(iv.mean_length));
  }
  if (r.classification) {
    const auto& c = *r.classification;
    for (auto [name, v] : {std::pair{"AUC", c.auc}, {"Sensiti.", c.sensitivity}, {"Specifi.", c.specificity},
                           {"PPV", c.ppv}, {"NPV", c.npv}}) {
      head.push_back(name);
      row.push_back(num(v));
    }
  }
  std::string out;
  for (const auto* line : {&head, &row}) {
    for (std::size_t i = 0; i < line->size(); ++i) {
      const std::size_t w = std::max(head[i].size(), row[i].size()) + 2;
      out += i == 0 ? fmt::format("{:<{}}", (*line)[i], w) : fmt::format("{:>{}}", (*line)[i], w);
    }
    out += '\n';
  }
  return out;
}

}  // namespace hypuc
