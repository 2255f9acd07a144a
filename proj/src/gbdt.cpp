#include "hypuc/gbdt.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "hypuc/error.hpp"
#include "hypuc/net.hpp"

namespace hypuc {

void FeatureMatrix::push_row(std::span<const double> r) {
  if (r.size() != n_features) throw ShapeError("feature row has the wrong width");
  values.insert(values.end(), r.begin(), r.end());
}

std::size_t Tree::leaf_index(std::span<const double> x) const {
  if (splits.empty()) return 0;
  int node = 0;
  for (;;) {
    const Split& s = splits[static_cast<std::size_t>(node)];
    const int child = x[static_cast<std::size_t>(s.feature)] <= s.threshold ? s.left : s.right;
    if (child < 0) return static_cast<std::size_t>(-child - 1);
    node = child;
  }
}

double Tree::predict(std::span<const double> x) const { return leaves[leaf_index(x)]; }

std::size_t Tree::depth() const {
  if (splits.empty()) return 0;
  std::size_t best = 0;
  std::vector<std::pair<int, std::size_t>> stack{{0, 1}};
  while (!stack.empty()) {
    auto [node, d] = stack.back();
    stack.pop_back();
    best = std::max(best, d);
    const Split& s = splits[static_cast<std::size_t>(node)];
    for (int c : {s.left, s.right})
      if (c >= 0) stack.push_back({c, d + 1});
  }
  return best;
}

double Forest::raw_score(std::span<const double> x) const {
  double sum = 0.0;
  for (const Tree& t : trees) sum += t.predict(x);
  return base + nu * sum;
}

double Forest::predict_proba(std::span<const double> x) const { return sigmoid(raw_score(x)); }

void GbdtConfig::validate() const {
  if (max_depth == 0) throw ConfigError("gbdt max_depth must be >= 1");
  if (!(nu >= 0.0 && nu <= 1.0)) throw ConfigError("gbdt nu must lie in [0, 1]");
  if (min_leaf == 0) throw ConfigError("gbdt min_leaf must be >= 1");
}

json to_json(const GbdtConfig& c) {
  return json{{"n_trees", c.n_trees}, {"max_depth", c.max_depth}, {"nu", c.nu}, {"min_leaf", c.min_leaf}};
}

GbdtConfig gbdt_config_from_json(const json& j) {
  GbdtConfig c;
  c.n_trees = j.value("n_trees", c.n_trees);
  c.max_depth = j.value("max_depth", c.max_depth);
  c.nu = j.value("nu", c.nu);
  c.min_leaf = j.value("min_leaf", c.min_leaf);
  return c;
}

namespace {

constexpr double kMinGain = 1e-12;
constexpr double kMinHessian = 1e-12;

class TreeBuilder {
 public:
  TreeBuilder(const FeatureMatrix& x, std::span<const double> residual, std::span<const double> hessian,
              const GbdtConfig& cfg)
      : x_(x), r_(residual), h_(hessian), cfg_(cfg) {}

  Tree build() {
    std::vector<std::size_t> all(x_.rows());
    std::iota(all.begin(), all.end(), 0);
    grow(all, 0);
    return std::move(tree_);
  }

 private:
  int make_leaf(const std::vector<std::size_t>& idx) {
    double g = 0.0, h = 0.0;
    for (std::size_t i : idx) {
      g += r_[i];
      h += h_[i];
    }
    tree_.leaves.push_back(g / std::max(h, kMinHessian));
    return -static_cast<int>(tree_.leaves.size());
  }

  int grow(std::vector<std::size_t>& idx, std::size_t depth) {
    const std::size_t n = idx.size();
    if (depth >= cfg_.max_depth || n < 2 * cfg_.min_leaf) return make_leaf(idx);

    double total = 0.0;
    for (std::size_t i : idx) total += r_[i];
    const double parent = total * total / static_cast<double>(n);

    double best_gain = kMinGain;
    int best_feature = -1;
    double best_threshold = 0.0;
    std::vector<std::size_t> order = idx;
    for (std::size_t f = 0; f < x_.n_features; ++f) {
      const auto value = [&](std::size_t i) { return x_.values[i * x_.n_features + f]; };
      std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return value(a) < value(b); });
      double left = 0.0;
      for (std::size_t k = 0; k + 1 < n; ++k) {
        left += r_[order[k]];
        const std::size_t nl = k + 1, nr = n - nl;
        if (nl < cfg_.min_leaf) continue;
        if (nr < cfg_.min_leaf) break;
        const double a = value(order[k]), b = value(order[k + 1]);
        if (!(a < b)) continue;
        const double right = total - left;
        const double gain = left * left / static_cast<double>(nl) + right * right / static_cast<double>(nr) - parent;
        if (gain > best_gain) {
          best_gain = gain;
          best_feature = static_cast<int>(f);
          best_threshold = 0.5 * (a + b);
        }
      }
    }
    if (best_feature < 0) return make_leaf(idx);

    std::vector<std::size_t> left_idx, right_idx;
    for (std::size_t i : idx)
      (x_.values[i * x_.n_features + static_cast<std::size_t>(best_feature)] <= best_threshold ? left_idx : right_idx)
          .push_back(i);
    const int me = static_cast<int>(tree_.splits.size());
    tree_.splits.push_back({best_feature, best_threshold, 0, 0});
    idx.clear();
    idx.shrink_to_fit();
    const int l = grow(left_idx, depth + 1);
    const int r = grow(right_idx, depth + 1);
    tree_.splits[static_cast<std::size_t>(me)].left = l;
    tree_.splits[static_cast<std::size_t>(me)].right = r;
    return me;
  }

  const FeatureMatrix& x_;
  std::span<const double> r_;
  std::span<const double> h_;
  const GbdtConfig& cfg_;
  Tree tree_;
};

double mean_log_loss(std::span<const double> score, std::span<const int> labels) {
  double sum = 0.0;
  for (std::size_t i = 0; i < score.size(); ++i) {
    const double f = score[i];
    // log(1 + e^f) - y f, computed without overflow
    const double softplus_f = f > 0.0 ? f + std::log1p(std::exp(-f)) : std::log1p(std::exp(f));
    sum += softplus_f - (labels[i] ? f : 0.0);
  }
  return sum / static_cast<double>(score.size());
}

}  // namespace

GbdtTrainResult train_gbdt(const FeatureMatrix& x, std::span<const int> labels, const GbdtConfig& cfg) {
  cfg.validate();
  const std::size_t n = x.rows();
  if (n != labels.size()) throw ShapeError("train_gbdt: feature rows and labels differ in length");
  double positives = 0.0;
  for (int y : labels) positives += y ? 1.0 : 0.0;
  if (positives == 0.0 || positives == static_cast<double>(n))
    throw FitError("train_gbdt: labels must contain both classes");

  GbdtTrainResult out;
  Forest& forest = out.forest;
  const double prior = positives / static_cast<double>(n);
  forest.base = std::log(prior / (1.0 - prior));
  forest.nu = cfg.nu;
  forest.max_depth = cfg.max_depth;
  forest.n_features = x.n_features;

  std::vector<double> score(n, forest.base), residual(n), hessian(n);
  out.loss_history.push_back(mean_log_loss(score, labels));
  for (std::size_t round = 0; round < cfg.n_trees; ++round) {
    for (std::size_t i = 0; i < n; ++i) {
      const double p = sigmoid(score[i]);
      residual[i] = (labels[i] ? 1.0 : 0.0) - p;
      hessian[i] = p * (1.0 - p);
    }
    Tree tree = TreeBuilder(x, residual, hessian, cfg).build();
    for (std::size_t i = 0; i < n; ++i) score[i] += cfg.nu * tree.predict(x.row(i));
    forest.trees.push_back(std::move(tree));
    out.loss_history.push_back(mean_log_loss(score, labels));
  }
  return out;
}

double predict_proba(const Forest& f, double y_hat, double sigma_calib) {
  const double x[2] = {y_hat, sigma_calib};
  return f.predict_proba(x);
}

int predict_class(const Forest& f, double y_hat, double sigma_calib, double cut) {
  return predict_proba(f, y_hat, sigma_calib) > cut ? 1 : 0;
}

json to_json(const Forest& f) {
  json trees = json::array();
  for (const Tree& t : f.trees) {
    json splits = json::array();
    for (const auto& s : t.splits) splits.push_back(json::array({s.feature, s.threshold, s.left, s.right}));
    trees.push_back({{"splits", splits}, {"leaves", t.leaves}});
  }
  return json{{"format_version", kForestFormatVersion},
              {"base", f.base},
              {"nu", f.nu},
              {"max_depth", f.max_depth},
              {"n_features", f.n_features},
              {"trees", trees}};
}

Forest forest_from_json(const json& j) {
  const int version = j.at("format_version").get<int>();
  if (version != kForestFormatVersion) throw SchemaError("unsupported forest format_version");
  Forest f;
  f.base = j.at("base").get<double>();
  f.nu = j.at("nu").get<double>();
  f.max_depth = j.value("max_depth", f.max_depth);
  f.n_features = j.value("n_features", f.n_features);
  for (const json& jt : j.at("trees")) {
    Tree t;
    for (const json& s : jt.at("splits"))
      t.splits.push_back({s.at(0).get<int>(), s.at(1).get<double>(), s.at(2).get<int>(), s.at(3).get<int>()});
    t.leaves = jt.at("leaves").get<std::vector<double>>();
    if (t.leaves.empty()) throw SchemaError("forest tree without leaves");
    f.trees.push_back(std::move(t));
  }
  return f;
}

void save_forest(const Forest& f, const std::filesystem::path& path) { write_text_file(path, dump_canonical(to_json(f))); }

Forest load_forest(const std::filesystem::path& path) { return forest_from_json(read_json_file(path)); }

}  // namespace hypuc
