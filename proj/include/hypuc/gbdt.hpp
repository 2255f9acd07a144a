#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

#include "hypuc/json_io.hpp"

namespace hypuc {

// Row-major feature matrix.
struct FeatureMatrix {
  std::size_t n_features = 2;
  std::vector<double> values;

  std::size_t rows() const { return n_features ? values.size() / n_features : 0; }
  std::span<const double> row(std::size_t i) const {
    return std::span<const double>(values).subspan(i * n_features, n_features);
  }
  void push_row(std::span<const double> r);
};

// Binary regression tree. A child reference c >= 0 is an index into splits;
// c < 0 refers to leaves[-c - 1]. A tree with no splits is the single leaf 0.
struct Tree {
  struct Split {
    int feature = 0;
    double threshold = 0.0;  // x[feature] <= threshold goes left
    int left = -1;
    int right = -1;
  };
  std::vector<Split> splits;
  std::vector<double> leaves;

  double predict(std::span<const double> x) const;
  // Leaf reached by x (index into leaves).
  std::size_t leaf_index(std::span<const double> x) const;
  std::size_t depth() const;
};

struct Forest {
  std::vector<Tree> trees;
  double nu = 0.1;
  double base = 0.0;  // log-odds of the training prior
  std::size_t max_depth = 3;
  std::size_t n_features = 2;

  double raw_score(std::span<const double> x) const;
  double predict_proba(std::span<const double> x) const;
};

struct GbdtConfig {
  std::size_t n_trees = 100;
  std::size_t max_depth = 3;
  double nu = 0.1;
  std::size_t min_leaf = 20;

  void validate() const;
};

json to_json(const GbdtConfig& c);
GbdtConfig gbdt_config_from_json(const json& j);

struct GbdtTrainResult {
  Forest forest;
  // Mean logistic loss on the training set before boosting and after each round.
  std::vector<double> loss_history;
};

// Logistic-loss gradient boosting. Each round fits a least-squares tree to the
// residuals label - p with exact greedy midpoint splits (ties go to the lower
// feature index, then the lower threshold) and sets every leaf to the one-step
// Newton value sum(r) / sum(p (1 - p)).
GbdtTrainResult train_gbdt(const FeatureMatrix& features, std::span<const int> labels, const GbdtConfig& cfg);

double predict_proba(const Forest& f, double y_hat, double sigma_calib);
int predict_class(const Forest& f, double y_hat, double sigma_calib, double cut = 0.5);

inline constexpr int kForestFormatVersion = 1;

json to_json(const Forest& f);
Forest forest_from_json(const json& j);
void save_forest(const Forest& f, const std::filesystem::path& path);
Forest load_forest(const std::filesystem::path& path);

}  // namespace hypuc
