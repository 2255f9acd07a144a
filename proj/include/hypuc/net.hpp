#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "hypuc/data.hpp"
#include "hypuc/json_io.hpp"
#include "hypuc/kde.hpp"

namespace hypuc {

enum class TrunkKind { conv, dense };
enum class Activation { relu, tanh };

// Shape of the two-headed regressor. The trunk is either a stack of
// conv(k, same padding) -> activation -> avg-pool(2) blocks followed by dense
// layers, or dense layers applied directly to the raw series. Each head is an
// optional hidden layer plus a scalar output.
struct Architecture {
  std::size_t input_len = 128;
  TrunkKind trunk = TrunkKind::conv;
  std::vector<std::size_t> conv_channels{16, 32, 32};
  std::size_t kernel_size = 5;
  std::vector<std::size_t> dense_units{64, 32};
  std::size_t head_hidden = 16;
  Activation activation = Activation::relu;
  double sigma_floor = 1e-4;

  void validate() const;
  bool operator==(const Architecture&) const = default;
};

json to_json(const Architecture& a);
Architecture architecture_from_json(const json& j);

struct Prediction {
  double mean = 0.0;
  double sigma = 1.0;
};

namespace detail {
class Layer;
struct Tape;
}  // namespace detail

// Parameters and layer graph of the regressor. Copies share the immutable
// layer descriptions and own their parameter vector.
class RegressorModel {
 public:
  RegressorModel(const Architecture& arch, std::uint64_t seed);

  const Architecture& architecture() const { return arch_; }
  std::uint64_t seed() const { return seed_; }
  std::size_t param_count() const { return params_.size(); }
  std::span<const double> params() const { return params_; }
  std::span<double> params() { return params_; }

  // Parameter range of the scale head's output layer (weights then bias).
  std::span<double> scale_output_params();
  std::span<double> mean_output_params();

  Prediction forward(std::span<const double> series) const;

  // Mapping between training targets and raw task units, carried so a
  // checkpoint is self-contained.
  TargetTransform transform;

 private:
  friend struct detail::Tape;
  friend class ModelAccess;

  struct Slot {
    std::shared_ptr<const detail::Layer> layer;
    std::size_t offset = 0;
  };

  Architecture arch_;
  std::uint64_t seed_;
  std::vector<Slot> trunk_;
  std::vector<Slot> mean_head_;
  std::vector<Slot> scale_head_;
  std::vector<double> params_;
};

double softplus(double x);
double sigmoid(double x);

struct TrainConfig {
  double lambda1 = 1.0;
  double lambda2 = 0.2;
  double lambda3 = 1e-4;
  double bandwidth = 1.0;
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  std::size_t epochs = 20;
  std::size_t batch_size = 64;
  std::uint64_t seed = 0;
  bool normalize_weights = true;

  void validate() const;
};

json to_json(const TrainConfig& c);
TrainConfig train_config_from_json(const json& j);

struct LossBreakdown {
  double weighted_l1 = 0.0;
  double gauss_nll = 0.0;
  double total = 0.0;
};

// Per-sample objective value and its derivatives w.r.t. the mean and sigma outputs.
struct SampleLoss {
  LossBreakdown loss;
  double d_mean = 0.0;
  double d_sigma = 0.0;
};

// lambda1 * w|e| + lambda3 * (e^2 / sigma^2 + log sigma^2), e = mean - y.
// The L1 subgradient at e == 0 is 0.
LossBreakdown hypuc_loss(double mean, double sigma, double y, double weight, const TrainConfig& cfg);
SampleLoss hypuc_loss_grad(double mean, double sigma, double y, double weight, const TrainConfig& cfg);

using SampleObjective = std::function<SampleLoss(double mean, double sigma, double y, double weight)>;

struct BatchItem {
  std::span<const double> series;
  double target = 0.0;  // training space
  double weight = 1.0;
};

struct GradientSet {
  LossBreakdown loss;         // batch means
  std::vector<double> grad;   // d(mean total)/d(param), same layout as params()
};

// Reverse-mode gradient of the batch-mean objective. A custom objective
// replaces the default hypuc_loss_grad.
GradientSet backward(const RegressorModel& m, std::span<const BatchItem> batch, const TrainConfig& cfg,
                     const SampleObjective& objective = {});

class AdamOptimizer {
 public:
  AdamOptimizer(std::size_t n_params, double lr, double beta1, double beta2, double eps);
  void step(std::span<double> params, std::span<const double> grad);
  std::size_t iterations() const { return t_; }

 private:
  double lr_, beta1_, beta2_, eps_;
  std::size_t t_ = 0;
  std::vector<double> m_, v_;
};

struct EpochStats {
  std::size_t epoch = 0;
  LossBreakdown train;  // sample-mean over the epoch
  double val_nll = 0.0; // NaN without a validation split
};

struct TrainOptions {
  const Dataset* valid = nullptr;
  SampleObjective objective;   // empty => hypuc objective
  bool record_batches = false;
};

struct TrainResult {
  RegressorModel model;
  std::vector<EpochStats> history;
  std::vector<LossBreakdown> batch_history;
  std::size_t best_epoch = 0;
};

// Mini-batch Adam on the transformed targets of `train`. With a validation
// split the lowest-validation-NLL epoch is returned, otherwise the last.
// Throws NumericError if the objective becomes non-finite.
TrainResult train(RegressorModel model, const Dataset& train, const WeightScheme& weights, const TrainConfig& cfg,
                  const TrainOptions& options = {});

// Predictions in training space for every sample of `ds`.
std::vector<Prediction> predict(const RegressorModel& m, const Dataset& ds);

inline constexpr int kCheckpointFormatVersion = 1;

json to_json(const RegressorModel& m);
RegressorModel model_from_json(const json& j);
void save_checkpoint(const RegressorModel& m, const std::filesystem::path& path);
RegressorModel load_checkpoint(const std::filesystem::path& path);

}  // namespace hypuc
