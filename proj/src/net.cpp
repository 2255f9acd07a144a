#include "hypuc/net.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>
#include <sstream>

#include "hypuc/error.hpp"
#include "layers.hpp"

namespace hypuc {

namespace {

std::string_view to_string(TrunkKind k) { return k == TrunkKind::conv ? "conv" : "dense"; }
std::string_view to_string(Activation a) { return a == Activation::relu ? "relu" : "tanh"; }

TrunkKind parse_trunk(const std::string& s) {
  if (s == "conv") return TrunkKind::conv;
  if (s == "dense") return TrunkKind::dense;
  throw ConfigError("unknown trunk kind '" + s + "'");
}

Activation parse_activation(const std::string& s) {
  if (s == "relu") return Activation::relu;
  if (s == "tanh") return Activation::tanh;
  throw ConfigError("unknown activation '" + s + "'");
}

}  // namespace

void Architecture::validate() const {
  if (input_len == 0) throw ConfigError("input_len must be positive");
  if (trunk == TrunkKind::conv) {
    if (kernel_size == 0 || kernel_size % 2 == 0) throw ConfigError("kernel_size must be odd");
    std::size_t len = input_len;
    for (std::size_t c : conv_channels) {
      if (c == 0) throw ConfigError("conv channel counts must be positive");
      len /= 2;
      if (len == 0) throw ConfigError("input_len too short for the number of pooling blocks");
    }
  }
  for (std::size_t u : dense_units)
    if (u == 0) throw ConfigError("dense layer sizes must be positive");
  if (!(sigma_floor > 0.0) || !std::isfinite(sigma_floor)) throw ConfigError("sigma_floor must be positive");
}

json to_json(const Architecture& a) {
  return json{{"input_len", a.input_len},
              {"trunk", std::string(to_string(a.trunk))},
              {"conv_channels", a.conv_channels},
              {"kernel_size", a.kernel_size},
              {"dense_units", a.dense_units},
              {"head_hidden", a.head_hidden},
              {"activation", std::string(to_string(a.activation))},
              {"sigma_floor", a.sigma_floor}};
}

Architecture architecture_from_json(const json& j) {
  Architecture a;
  a.input_len = j.value("input_len", a.input_len);
  if (j.contains("trunk")) a.trunk = parse_trunk(j.at("trunk").get<std::string>());
  a.conv_channels = j.value("conv_channels", a.conv_channels);
  a.kernel_size = j.value("kernel_size", a.kernel_size);
  a.dense_units = j.value("dense_units", a.dense_units);
  a.head_hidden = j.value("head_hidden", a.head_hidden);
  if (j.contains("activation")) a.activation = parse_activation(j.at("activation").get<std::string>());
  a.sigma_floor = j.value("sigma_floor", a.sigma_floor);
  return a;
}

double softplus(double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

RegressorModel::RegressorModel(const Architecture& arch, std::uint64_t seed) : arch_(arch), seed_(seed) {
  arch_.validate();
  using namespace detail;
  const double hidden_gain = arch_.activation == Activation::relu ? 6.0 : 3.0;
  std::size_t offset = 0;
  auto push = [&](std::vector<Slot>& stack, std::shared_ptr<const Layer> layer) {
    const std::size_t n = layer->param_count();
    stack.push_back(Slot{std::move(layer), offset});
    offset += n;
  };

  Shape shape{1, arch_.input_len};
  if (arch_.trunk == TrunkKind::conv) {
    for (std::size_t c : arch_.conv_channels) {
      push(trunk_, std::make_shared<Conv1d>(shape, c, arch_.kernel_size));
      shape = trunk_.back().layer->output_shape();
      push(trunk_, std::make_shared<Activate>(shape, arch_.activation));
      push(trunk_, std::make_shared<AvgPool2>(shape));
      shape = trunk_.back().layer->output_shape();
    }
  }
  for (std::size_t u : arch_.dense_units) {
    push(trunk_, std::make_shared<Dense>(shape, u, hidden_gain));
    shape = trunk_.back().layer->output_shape();
    push(trunk_, std::make_shared<Activate>(shape, arch_.activation));
  }
  const Shape features = shape;
  for (auto* head : {&mean_head_, &scale_head_}) {
    Shape s = features;
    if (arch_.head_hidden > 0) {
      push(*head, std::make_shared<Dense>(s, arch_.head_hidden, hidden_gain));
      s = head->back().layer->output_shape();
      push(*head, std::make_shared<Activate>(s, arch_.activation));
    }
    push(*head, std::make_shared<Dense>(s, 1, 3.0));
  }

  params_.assign(offset, 0.0);
  std::mt19937_64 rng(seed_);
  for (auto* stack : {&trunk_, &mean_head_, &scale_head_})
    for (const Slot& slot : *stack)
      slot.layer->init(std::span<double>(params_).subspan(slot.offset, slot.layer->param_count()), rng);
}

std::span<double> RegressorModel::scale_output_params() {
  const Slot& s = scale_head_.back();
  return std::span<double>(params_).subspan(s.offset, s.layer->param_count());
}

std::span<double> RegressorModel::mean_output_params() {
  const Slot& s = mean_head_.back();
  return std::span<double>(params_).subspan(s.offset, s.layer->param_count());
}

namespace detail {

// Activation and gradient buffers for one forward/backward pass.
struct Tape {
  using Slots = std::vector<RegressorModel::Slot>;

  struct Stack {
    std::vector<std::vector<double>> act;
    std::vector<std::vector<double>> grad;
  };

  explicit Tape(const RegressorModel& m) : model(m) {
    build(trunk, m.trunk_, Shape{1, m.arch_.input_len}.size());
    const std::size_t nfeat = trunk.act.back().size();
    build(mean, m.mean_head_, nfeat);
    build(scale, m.scale_head_, nfeat);
  }

  static void build(Stack& s, const Slots& slots, std::size_t in_size) {
    s.act.assign(slots.size() + 1, {});
    s.grad.assign(slots.size() + 1, {});
    s.act[0].resize(in_size);
    s.grad[0].resize(in_size);
    for (std::size_t i = 0; i < slots.size(); ++i) {
      const std::size_t n = slots[i].layer->output_shape().size();
      s.act[i + 1].resize(n);
      s.grad[i + 1].resize(n);
    }
  }

  std::span<const double> slice(const RegressorModel::Slot& slot) const {
    return std::span<const double>(model.params_).subspan(slot.offset, slot.layer->param_count());
  }

  void run(const Slots& slots, Stack& s) {
    for (std::size_t i = 0; i < slots.size(); ++i) slots[i].layer->forward(slice(slots[i]), s.act[i], s.act[i + 1]);
  }

  // Returns (mean, raw scale output).
  std::pair<double, double> forward(std::span<const double> x) {
    if (x.size() != model.arch_.input_len)
      throw ShapeError("series length " + std::to_string(x.size()) + " does not match model input length " +
                       std::to_string(model.arch_.input_len));
    std::copy(x.begin(), x.end(), trunk.act[0].begin());
    run(model.trunk_, trunk);
    mean.act[0] = trunk.act.back();
    scale.act[0] = trunk.act.back();
    run(model.mean_head_, mean);
    run(model.scale_head_, scale);
    return {mean.act.back()[0], scale.act.back()[0]};
  }

  void back(const Slots& slots, Stack& s, std::span<double> grad, bool need_input_grad) {
    for (std::size_t i = slots.size(); i-- > 0;) {
      const auto& slot = slots[i];
      std::span<double> gin = (i == 0 && !need_input_grad) ? std::span<double>() : std::span<double>(s.grad[i]);
      slot.layer->backward(slice(slot), s.act[i], s.act[i + 1], s.grad[i + 1], gin,
                           grad.subspan(slot.offset, slot.layer->param_count()));
    }
  }

  // Accumulates d(loss)/d(params) into grad given the output derivatives.
  void backward(double d_mean, double d_raw, std::span<double> grad) {
    auto& gfeat = trunk.grad.back();
    std::fill(gfeat.begin(), gfeat.end(), 0.0);
    if (d_mean != 0.0) {
      mean.grad.back()[0] = d_mean;
      back(model.mean_head_, mean, grad, true);
      for (std::size_t i = 0; i < gfeat.size(); ++i) gfeat[i] += mean.grad[0][i];
    }
    if (d_raw != 0.0) {
      scale.grad.back()[0] = d_raw;
      back(model.scale_head_, scale, grad, true);
      for (std::size_t i = 0; i < gfeat.size(); ++i) gfeat[i] += scale.grad[0][i];
    }
    if (d_mean != 0.0 || d_raw != 0.0) back(model.trunk_, trunk, grad, false);
  }

  const RegressorModel& model;
  Stack trunk, mean, scale;
};

}  // namespace detail

Prediction RegressorModel::forward(std::span<const double> series) const {
  detail::Tape tape(*this);
  const auto [mu, raw] = tape.forward(series);
  return {mu, softplus(raw) + arch_.sigma_floor};
}

void TrainConfig::validate() const {
  for (double v : {lambda1, lambda2, lambda3})
    if (!(v >= 0.0) || !std::isfinite(v)) throw ConfigError("lambda values must be finite and non-negative");
  if (!(lambda1 + lambda3 > 0.0)) throw ConfigError("lambda1 + lambda3 must be positive");
  if (!(bandwidth > 0.0) || !std::isfinite(bandwidth)) throw ConfigError("bandwidth must be positive");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) throw ConfigError("learning_rate must be positive");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0))
    throw ConfigError("adam betas must lie in [0, 1)");
  if (!(adam_eps > 0.0)) throw ConfigError("adam_eps must be positive");
  if (epochs == 0) throw ConfigError("epochs must be positive");
  if (batch_size == 0) throw ConfigError("batch_size must be positive");
}

json to_json(const TrainConfig& c) {
  return json{{"lambda1", c.lambda1},     {"lambda2", c.lambda2},
              {"lambda3", c.lambda3},     {"bandwidth", c.bandwidth},
              {"learning_rate", c.learning_rate}, {"beta1", c.beta1},
              {"beta2", c.beta2},         {"adam_eps", c.adam_eps},
              {"epochs", c.epochs},       {"batch_size", c.batch_size},
              {"seed", c.seed},           {"normalize_weights", c.normalize_weights}};
}

TrainConfig train_config_from_json(const json& j) {
  TrainConfig c;
  c.lambda1 = j.value("lambda1", c.lambda1);
  c.lambda2 = j.value("lambda2", c.lambda2);
  c.lambda3 = j.value("lambda3", c.lambda3);
  c.bandwidth = j.value("bandwidth", c.bandwidth);
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.beta1 = j.value("beta1", c.beta1);
  c.beta2 = j.value("beta2", c.beta2);
  c.adam_eps = j.value("adam_eps", c.adam_eps);
  c.epochs = j.value("epochs", c.epochs);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.seed = j.value("seed", c.seed);
  c.normalize_weights = j.value("normalize_weights", c.normalize_weights);
  return c;
}

LossBreakdown hypuc_loss(double mean, double sigma, double y, double weight, const TrainConfig& cfg) {
  if (!(sigma > 0.0)) throw DomainError("hypuc_loss: sigma must be positive");
  const double e = mean - y;
  LossBreakdown l;
  l.weighted_l1 = weight * std::abs(e);
  const double var = sigma * sigma;
  l.gauss_nll = e * e / var + std::log(var);
  l.total = cfg.lambda1 * l.weighted_l1 + cfg.lambda3 * l.gauss_nll;
  return l;
}

SampleLoss hypuc_loss_grad(double mean, double sigma, double y, double weight, const TrainConfig& cfg) {
  SampleLoss s;
  s.loss = hypuc_loss(mean, sigma, y, weight, cfg);
  const double e = mean - y;
  const double sign = e > 0.0 ? 1.0 : (e < 0.0 ? -1.0 : 0.0);
  const double var = sigma * sigma;
  s.d_mean = cfg.lambda1 * weight * sign + cfg.lambda3 * 2.0 * e / var;
  s.d_sigma = cfg.lambda3 * (2.0 / sigma - 2.0 * e * e / (var * sigma));
  return s;
}

GradientSet backward(const RegressorModel& m, std::span<const BatchItem> batch, const TrainConfig& cfg,
                     const SampleObjective& objective) {
  GradientSet out;
  out.grad.assign(m.param_count(), 0.0);
  if (batch.empty()) return out;
  detail::Tape tape(m);
  const double inv_n = 1.0 / static_cast<double>(batch.size());
  const double floor = m.architecture().sigma_floor;
  for (const BatchItem& item : batch) {
    const auto [mu, raw] = tape.forward(item.series);
    const double sigma = softplus(raw) + floor;
    const SampleLoss s = objective ? objective(mu, sigma, item.target, item.weight)
                                   : hypuc_loss_grad(mu, sigma, item.target, item.weight, cfg);
    out.loss.weighted_l1 += s.loss.weighted_l1;
    out.loss.gauss_nll += s.loss.gauss_nll;
    out.loss.total += s.loss.total;
    tape.backward(s.d_mean * inv_n, s.d_sigma * sigmoid(raw) * inv_n, out.grad);
  }
  out.loss.weighted_l1 *= inv_n;
  out.loss.gauss_nll *= inv_n;
  out.loss.total *= inv_n;
  return out;
}

AdamOptimizer::AdamOptimizer(std::size_t n_params, double lr, double beta1, double beta2, double eps)
    : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps), m_(n_params, 0.0), v_(n_params, 0.0) {}

void AdamOptimizer::step(std::span<double> params, std::span<const double> grad) {
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * grad[i];
    v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * grad[i] * grad[i];
    params[i] -= lr_ * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + eps_);
  }
}

std::vector<Prediction> predict(const RegressorModel& m, const Dataset& ds) {
  detail::Tape tape(m);
  std::vector<Prediction> out;
  out.reserve(ds.size());
  const double floor = m.architecture().sigma_floor;
  for (const auto& s : ds.samples) {
    const auto [mu, raw] = tape.forward(s.series);
    out.push_back({mu, softplus(raw) + floor});
  }
  return out;
}

namespace {

double mean_gaussian_nll(const std::vector<Prediction>& preds, const std::vector<double>& targets) {
  double sum = 0.0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const double var = preds[i].sigma * preds[i].sigma;
    const double e = preds[i].mean - targets[i];
    sum += 0.5 * std::log(2.0 * std::numbers::pi * var) + e * e / (2.0 * var);
  }
  return preds.empty() ? std::numeric_limits<double>::quiet_NaN() : sum / static_cast<double>(preds.size());
}

}  // namespace

TrainResult train(RegressorModel model, const Dataset& train_ds, const WeightScheme& weights, const TrainConfig& cfg,
                  const TrainOptions& options) {
  cfg.validate();
  if (train_ds.size() == 0) throw FitError("train: empty training set");
  if (train_ds.series_len != model.architecture().input_len)
    throw ShapeError("train: dataset series length does not match model input length");

  const std::vector<double> targets = train_ds.transformed_targets();
  std::vector<BatchItem> items(train_ds.size());
  for (std::size_t i = 0; i < items.size(); ++i)
    items[i] = BatchItem{train_ds.samples[i].series, targets[i], weights.weight(targets[i])};

  std::vector<double> valid_targets;
  if (options.valid) valid_targets = options.valid->transformed_targets();

  std::vector<std::size_t> order(items.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(cfg.seed ^ 0x9e3779b97f4a7c15ull);
  AdamOptimizer adam(model.param_count(), cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.adam_eps);

  TrainResult result{model, {}, {}, 0};
  double best_val = std::numeric_limits<double>::infinity();
  std::vector<BatchItem> batch;
  batch.reserve(cfg.batch_size);

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    EpochStats stats;
    stats.epoch = epoch;
    std::size_t batch_index = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size, ++batch_index) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      batch.clear();
      for (std::size_t k = start; k < end; ++k) batch.push_back(items[order[k]]);
      GradientSet gs = backward(model, batch, cfg, options.objective);
      if (!std::isfinite(gs.loss.total)) {
        std::ostringstream msg;
        msg << "non-finite loss at epoch " << epoch << ", batch " << batch_index << " (offending term: "
            << (!std::isfinite(gs.loss.weighted_l1) ? "weighted_l1" : "gauss_nll") << ")";
        throw NumericError(msg.str());
      }
      if (options.record_batches) result.batch_history.push_back(gs.loss);
      const double n = static_cast<double>(batch.size());
      stats.train.weighted_l1 += gs.loss.weighted_l1 * n;
      stats.train.gauss_nll += gs.loss.gauss_nll * n;
      stats.train.total += gs.loss.total * n;
      adam.step(model.params(), gs.grad);
    }
    const double n = static_cast<double>(order.size());
    stats.train.weighted_l1 /= n;
    stats.train.gauss_nll /= n;
    stats.train.total /= n;

    if (options.valid) {
      stats.val_nll = mean_gaussian_nll(predict(model, *options.valid), valid_targets);
      if (stats.val_nll < best_val) {
        best_val = stats.val_nll;
        result.model = model;
        result.best_epoch = epoch;
      }
    } else {
      stats.val_nll = std::numeric_limits<double>::quiet_NaN();
      result.best_epoch = epoch;
    }
    result.history.push_back(stats);
  }
  if (!options.valid) result.model = model;
  return result;
}

json to_json(const RegressorModel& m) {
  return json{{"format_version", kCheckpointFormatVersion},
              {"architecture", to_json(m.architecture())},
              {"seed", m.seed()},
              {"transform", to_json(m.transform)},
              {"params", std::vector<double>(m.params().begin(), m.params().end())}};
}

RegressorModel model_from_json(const json& j) {
  const int version = j.at("format_version").get<int>();
  if (version != kCheckpointFormatVersion)
    throw SchemaError("unsupported checkpoint format_version " + std::to_string(version));
  RegressorModel m(architecture_from_json(j.at("architecture")), j.at("seed").get<std::uint64_t>());
  m.transform = transform_from_json(j.at("transform"));
  const auto params = j.at("params").get<std::vector<double>>();
  if (params.size() != m.param_count())
    throw SchemaError("checkpoint has " + std::to_string(params.size()) + " parameters, architecture needs " +
                      std::to_string(m.param_count()));
  std::copy(params.begin(), params.end(), m.params().begin());
  return m;
}

void save_checkpoint(const RegressorModel& m, const std::filesystem::path& path) {
  write_text_file(path, dump_canonical(to_json(m)));
}

RegressorModel load_checkpoint(const std::filesystem::path& path) { return model_from_json(read_json_file(path)); }

}  // namespace hypuc
