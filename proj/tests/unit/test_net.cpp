#include <cmath>
#include <cstring>
#include <numbers>
#include <random>

#include <doctest.h>

#include "hypuc/error.hpp"
#include "hypuc/metrics.hpp"
#include "hypuc/net.hpp"
#include "test_util.hpp"

using namespace hypuc;

namespace {

Architecture small_conv(std::size_t len = 16) {
  Architecture a;
  a.input_len = len;
  a.trunk = TrunkKind::conv;
  a.conv_channels = {3, 4};
  a.kernel_size = 3;
  a.dense_units = {6};
  a.head_hidden = 4;
  return a;
}

std::vector<double> random_series(std::size_t len, std::mt19937_64& rng) {
  std::normal_distribution<double> d(0.0, 1.0);
  std::vector<double> x(len);
  for (double& v : x) v = d(rng);
  return x;
}

double relative_gap(double a, double b, double floor = 1e-7) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

// Batch-mean objective evaluated directly through forward(), independent of backward().
double batch_objective(const RegressorModel& m, std::span<const BatchItem> batch, const TrainConfig& cfg) {
  double total = 0.0;
  for (const auto& item : batch) {
    const Prediction p = m.forward(item.series);
    total += hypuc_loss(p.mean, p.sigma, item.target, item.weight, cfg).total;
  }
  return total / static_cast<double>(batch.size());
}

}  // namespace

TEST_CASE("zero-initialised scale head outputs softplus(0) + floor") {
  RegressorModel m(small_conv(), 1);
  for (double& p : m.scale_output_params()) p = 0.0;
  std::mt19937_64 rng(2);
  const auto x = random_series(16, rng);
  CHECK(m.forward(x).sigma == doctest::Approx(std::log(2.0) + 1e-4).epsilon(1e-15));
  CHECK(m.forward(x).sigma == doctest::Approx(0.693247).epsilon(1e-6));
}

TEST_CASE("forward is deterministic and seeds fix the initial weights") {
  RegressorModel a(small_conv(), 5), b(small_conv(), 5), c(small_conv(), 6);
  CHECK(std::equal(a.params().begin(), a.params().end(), b.params().begin()));
  CHECK_FALSE(std::equal(a.params().begin(), a.params().end(), c.params().begin()));
  std::mt19937_64 rng(3);
  const auto x = random_series(16, rng);
  const Prediction p1 = a.forward(x), p2 = a.forward(x);
  CHECK(std::memcmp(&p1, &p2, sizeof(Prediction)) == 0);
}

TEST_CASE("forward rejects series of the wrong length") {
  RegressorModel m(small_conv(), 1);
  CHECK_THROWS_AS(m.forward(std::vector<double>(15, 0.0)), ShapeError);
}

TEST_CASE("sigma stays above the floor for extreme parameters") {
  RegressorModel m(small_conv(), 1);
  for (double& p : m.scale_output_params()) p = -1e3;
  std::mt19937_64 rng(4);
  for (int i = 0; i < 20; ++i) {
    const Prediction p = m.forward(random_series(16, rng));
    CHECK(p.sigma >= m.architecture().sigma_floor);
    CHECK(std::isfinite(p.sigma));
  }
}

TEST_CASE("perturbing a trunk weight moves the mean by gradient times step") {
  RegressorModel m(small_conv(), 9);
  std::mt19937_64 rng(5);
  const auto x = random_series(16, rng);
  const BatchItem item{x, 0.0, 1.0};
  const SampleObjective mean_only = [](double, double, double, double) { return SampleLoss{{}, 1.0, 0.0}; };
  const GradientSet g = backward(m, std::span(&item, 1), TrainConfig{}, mean_only);
  for (std::size_t idx : {0u, 3u, 7u}) {
    RegressorModel moved = m;
    moved.params()[idx] += 1e-6;
    const double delta = moved.forward(x).mean - m.forward(x).mean;
    CHECK(delta == doctest::Approx(g.grad[idx] * 1e-6).epsilon(1e-4));
  }
}

TEST_CASE("hypuc_loss examples") {
  TrainConfig cfg;
  cfg.lambda1 = 1.0;
  cfg.lambda3 = 0.2;
  const auto zero = hypuc_loss(1.5, 1.0, 1.5, 3.0, cfg);
  CHECK(zero.total == 0.0);
  const auto unit = hypuc_loss(2.0, 1.0, 1.0, 1.0, cfg);
  CHECK(unit.weighted_l1 == 1.0);
  CHECK(unit.gauss_nll == 1.0);
  CHECK(unit.total == doctest::Approx(1.2).epsilon(1e-15));
  CHECK_THROWS_AS(hypuc_loss(0.0, 0.0, 1.0, 1.0, cfg), DomainError);
  CHECK_THROWS_AS(hypuc_loss(0.0, -1.0, 1.0, 1.0, cfg), DomainError);
}

TEST_CASE("loss breakdown combines its terms exactly") {
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(-2.0, 2.0), pos(0.05, 3.0);
  TrainConfig cfg;
  cfg.lambda1 = 0.7;
  cfg.lambda3 = 0.3;
  for (int i = 0; i < 100; ++i) {
    const auto l = hypuc_loss(u(rng), pos(rng), u(rng), pos(rng), cfg);
    CHECK(std::abs(l.total - (cfg.lambda1 * l.weighted_l1 + cfg.lambda3 * l.gauss_nll)) <= 1e-12);
  }
}

TEST_CASE("analytic loss derivatives match central differences") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-2.0, 2.0), pos(0.1, 2.0);
  TrainConfig cfg;
  cfg.lambda1 = 1.0;
  cfg.lambda3 = 0.2;
  const double h = 1e-6;
  for (int i = 0; i < 200; ++i) {
    const double mean = u(rng), sigma = pos(rng), y = u(rng), w = pos(rng);
    if (std::abs(mean - y) < 1e-3) continue;  // L1 kink tested separately
    const SampleLoss s = hypuc_loss_grad(mean, sigma, y, w, cfg);
    const double fd_mean =
        (hypuc_loss(mean + h, sigma, y, w, cfg).total - hypuc_loss(mean - h, sigma, y, w, cfg).total) / (2 * h);
    const double fd_sigma =
        (hypuc_loss(mean, sigma + h, y, w, cfg).total - hypuc_loss(mean, sigma - h, y, w, cfg).total) / (2 * h);
    CHECK(relative_gap(s.d_mean, fd_mean) < 1e-5);
    CHECK(relative_gap(s.d_sigma, fd_sigma) < 1e-5);
  }
  CHECK(hypuc_loss_grad(1.0, 1.0, 1.0, 1.0, cfg).d_mean == 0.0);
}

TEST_CASE("backward matches central finite differences on 50 random parameters") {
  for (auto trunk : {TrunkKind::conv, TrunkKind::dense}) {
    Architecture arch = small_conv();
    arch.trunk = trunk;
    RegressorModel m(arch, 21);
    std::mt19937_64 rng(8);
    std::vector<std::vector<double>> xs;
    std::vector<BatchItem> batch;
    std::normal_distribution<double> ny(0.0, 1.0);
    for (int i = 0; i < 6; ++i) xs.push_back(random_series(16, rng));
    for (const auto& x : xs) batch.push_back({x, ny(rng), 0.5 + std::abs(ny(rng))});
    TrainConfig cfg;
    cfg.lambda1 = 1.0;
    cfg.lambda3 = 0.5;
    const GradientSet g = backward(m, batch, cfg);
    CHECK(g.loss.total == doctest::Approx(batch_objective(m, batch, cfg)).epsilon(1e-12));

    std::uniform_int_distribution<std::size_t> pick(0, m.param_count() - 1);
    const double h = 1e-6;
    double worst = 0.0;
    for (int probe = 0; probe < 50; ++probe) {
      const std::size_t idx = pick(rng);
      RegressorModel plus = m, minus = m;
      plus.params()[idx] += h;
      minus.params()[idx] -= h;
      const double fd = (batch_objective(plus, batch, cfg) - batch_objective(minus, batch, cfg)) / (2 * h);
      worst = std::max(worst, relative_gap(g.grad[idx], fd));
    }
    MESSAGE("worst relative gradient gap: " << worst);
    CHECK(worst < 1e-4);
  }
}

TEST_CASE("zero-residual batch with lambda3 = 0 has zero gradients") {
  RegressorModel m(small_conv(), 3);
  std::mt19937_64 rng(10);
  std::vector<std::vector<double>> xs;
  std::vector<BatchItem> batch;
  for (int i = 0; i < 5; ++i) xs.push_back(random_series(16, rng));
  for (const auto& x : xs) batch.push_back({x, m.forward(x).mean, 2.0});
  TrainConfig cfg;
  cfg.lambda3 = 0.0;
  const GradientSet g = backward(m, batch, cfg);
  for (double v : g.grad) CHECK(v == 0.0);
}

TEST_CASE("doubling lambda1 doubles the L1 gradient contribution") {
  RegressorModel m(small_conv(), 4);
  std::mt19937_64 rng(11);
  std::vector<std::vector<double>> xs;
  std::vector<BatchItem> batch;
  std::normal_distribution<double> ny(0.0, 1.0);
  for (int i = 0; i < 5; ++i) xs.push_back(random_series(16, rng));
  for (const auto& x : xs) batch.push_back({x, ny(rng), 1.3});
  TrainConfig one, two;
  one.lambda1 = 1.0;
  two.lambda1 = 2.0;
  one.lambda3 = two.lambda3 = 0.0;
  const auto g1 = backward(m, batch, one), g2 = backward(m, batch, two);
  for (std::size_t i = 0; i < g1.grad.size(); ++i) CHECK(g2.grad[i] == 2.0 * g1.grad[i]);
}

TEST_CASE("adam first step moves each parameter by the learning rate") {
  AdamOptimizer adam(3, 0.01, 0.9, 0.999, 1e-8);
  std::vector<double> p{1.0, 2.0, 3.0};
  const std::vector<double> g{0.5, -4.0, 0.0};
  adam.step(p, g);
  CHECK(p[0] == doctest::Approx(1.0 - 0.01).epsilon(1e-6));
  CHECK(p[1] == doctest::Approx(2.0 + 0.01).epsilon(1e-6));
  CHECK(p[2] == 3.0);
}

TEST_CASE("checkpoints reproduce forward outputs bit-exactly") {
  hypuc::testing::TempDir dir;
  RegressorModel m(small_conv(), 12);
  m.transform = TargetTransform{TransformKind::standardize, 1.5, 0.25};
  save_checkpoint(m, dir / "ck.json");
  const RegressorModel back = load_checkpoint(dir / "ck.json");
  CHECK(back.transform == m.transform);
  CHECK(back.architecture() == m.architecture());
  std::mt19937_64 rng(13);
  for (int i = 0; i < 10; ++i) {
    const auto x = random_series(16, rng);
    const Prediction a = m.forward(x), b = back.forward(x);
    CHECK(std::memcmp(&a, &b, sizeof(Prediction)) == 0);
  }
  json j = read_json_file(dir / "ck.json");
  j["format_version"] = 99;
  CHECK_THROWS_AS(model_from_json(j), SchemaError);
}

TEST_CASE("train config validation") {
  TrainConfig c;
  c.lambda1 = 0.0;
  c.lambda3 = 0.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = TrainConfig{};
  c.learning_rate = 0.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = TrainConfig{};
  c.lambda2 = std::nan("");
  CHECK_THROWS_AS(c.validate(), ConfigError);
}

namespace {

struct TinyTask {
  SplitSet splits;
  WeightScheme weights;
  Architecture arch;
};

TinyTask tiny_task(std::size_t n, double label_noise, double lambda2, std::uint64_t seed = 1) {
  SynthConfig sc;
  sc.n_samples = n;
  sc.series_len = 32;
  sc.noise_sd = 0.0;
  sc.label_noise = label_noise;
  sc.seed = seed;
  SplitSet s = split_dataset(generate_synthetic(sc), TransformKind::standardize);
  const auto yt = s.train.transformed_targets();
  WeightScheme w = make_weights(fit_kde(yt, 1.0), lambda2, yt);
  Architecture a;
  a.input_len = 32;
  a.trunk = TrunkKind::dense;
  a.dense_units = {32, 16};
  a.head_hidden = 8;
  return {std::move(s), std::move(w), a};
}

double mae_transformed(const RegressorModel& m, const Dataset& ds) {
  const auto preds = predict(m, ds);
  const auto yt = ds.transformed_targets();
  double s = 0.0;
  for (std::size_t i = 0; i < yt.size(); ++i) s += std::abs(preds[i].mean - yt[i]);
  return s / static_cast<double>(yt.size());
}

TrainConfig quick_config(std::size_t epochs) {
  TrainConfig c;
  c.learning_rate = 3e-3;
  c.epochs = epochs;
  c.batch_size = 32;
  c.seed = 4;
  return c;
}

}  // namespace

TEST_CASE("training on noiseless data reaches low error") {
  const TinyTask t = tiny_task(1500, 0.0, 0.0);
  const TrainConfig cfg = quick_config(60);
  const TrainResult r = train(RegressorModel(t.arch, 2), t.splits.train, t.weights, cfg);
  const double mae = mae_transformed(r.model, t.splits.test);
  MESSAGE("noiseless test MAE (standardised units): " << mae);
  CHECK(mae < 0.05);
  CHECK(r.history.size() == cfg.epochs);
  CHECK(r.history.back().train.total < r.history.front().train.total);
}

TEST_CASE("same seed and data give identical weights") {
  const TinyTask t = tiny_task(300, 0.0, 0.2);
  const TrainConfig cfg = quick_config(3);
  const TrainResult a = train(RegressorModel(t.arch, 2), t.splits.train, t.weights, cfg);
  const TrainResult b = train(RegressorModel(t.arch, 2), t.splits.train, t.weights, cfg);
  REQUIRE(a.model.param_count() == b.model.param_count());
  CHECK(std::memcmp(a.model.params().data(), b.model.params().data(), a.model.param_count() * sizeof(double)) == 0);
}

TEST_CASE("objective reduces to plain L1 and to Gaussian NLL") {
  const TinyTask t = tiny_task(300, 0.1, 0.0);
  TrainOptions opts;
  opts.record_batches = true;

  TrainConfig l1 = quick_config(2);
  l1.lambda2 = 0.0;
  l1.lambda3 = 0.0;
  const TrainResult hyp_l1 = train(RegressorModel(t.arch, 2), t.splits.train, t.weights, l1, opts);
  TrainOptions ref_l1 = opts;
  ref_l1.objective = [](double mean, double, double y, double) {
    const double e = mean - y;
    const double sign = e > 0 ? 1.0 : (e < 0 ? -1.0 : 0.0);
    return SampleLoss{{std::abs(e), 0.0, std::abs(e)}, sign, 0.0};
  };
  const TrainResult plain_l1 = train(RegressorModel(t.arch, 2), t.splits.train, t.weights, l1, ref_l1);

  TrainConfig nll = quick_config(2);
  nll.lambda1 = 0.0;
  nll.lambda3 = 1.0;
  nll.lambda2 = 0.5;  // weights are irrelevant without the L1 term
  const WeightScheme w_nll = make_weights(t.weights.density(), 0.5, t.splits.train.transformed_targets());
  const TrainResult hyp_nll = train(RegressorModel(t.arch, 2), t.splits.train, w_nll, nll, opts);
  TrainOptions ref_nll = opts;
  ref_nll.objective = [](double mean, double sigma, double y, double) {
    const double e = mean - y, s2 = sigma * sigma;
    const double v = e * e / s2 + std::log(s2);
    return SampleLoss{{0.0, v, v}, 2.0 * e / s2, -2.0 * e * e / (s2 * sigma) + 2.0 / sigma};
  };
  const TrainResult plain_nll = train(RegressorModel(t.arch, 2), t.splits.train, w_nll, nll, ref_nll);

  for (auto [a, b] : {std::pair{&hyp_l1, &plain_l1}, std::pair{&hyp_nll, &plain_nll}}) {
    REQUIRE(a->batch_history.size() == b->batch_history.size());
    REQUIRE_FALSE(a->batch_history.empty());
    double worst = 0.0;
    for (std::size_t i = 0; i < a->batch_history.size(); ++i)
      worst = std::max(worst, std::abs(a->batch_history[i].total - b->batch_history[i].total));
    CHECK(worst <= 1e-12);
  }
}

TEST_CASE("non-finite objective raises NumericError naming the batch") {
  const TinyTask t = tiny_task(200, 0.0, 0.2);
  TrainOptions opts;
  opts.objective = [](double, double, double, double) {
    const double nan = std::nan("");
    return SampleLoss{{nan, 0.0, nan}, 0.0, 0.0};
  };
  try {
    train(RegressorModel(t.arch, 2), t.splits.train, t.weights, quick_config(1), opts);
    FAIL("expected NumericError");
  } catch (const NumericError& e) {
    const std::string what = e.what();
    CHECK(what.find("epoch") != std::string::npos);
    CHECK(what.find("batch") != std::string::npos);
  }
}

TEST_CASE("validation split selects the best epoch") {
  const TinyTask t = tiny_task(600, 0.2, 0.2);
  TrainConfig cfg = quick_config(8);
  cfg.lambda3 = 0.5;
  TrainOptions opts;
  opts.valid = &t.splits.valid;
  const TrainResult r = train(RegressorModel(t.arch, 2), t.splits.train, t.weights, cfg, opts);
  std::size_t best = 0;
  for (std::size_t i = 1; i < r.history.size(); ++i)
    if (r.history[i].val_nll < r.history[best].val_nll) best = i;
  CHECK(r.best_epoch == r.history[best].epoch);
  const auto preds = predict(r.model, t.splits.valid);
  const auto yt = t.splits.valid.transformed_targets();
  double nll = 0.0;
  for (std::size_t i = 0; i < yt.size(); ++i) {
    const double e = preds[i].mean - yt[i], s2 = preds[i].sigma * preds[i].sigma;
    nll += 0.5 * std::log(2.0 * std::numbers::pi * s2) + e * e / (2.0 * s2);
  }
  nll /= static_cast<double>(yt.size());
  CHECK(nll == doctest::Approx(r.history[best].val_nll).epsilon(1e-12));
}

TEST_CASE("predicted sigma tracks heteroscedastic label noise") {
  const TinyTask t = tiny_task(3000, 0.3, 0.0, 7);
  TrainConfig cfg = quick_config(40);
  cfg.lambda3 = 1.0;
  const TrainResult r = train(RegressorModel(t.arch, 3), t.splits.train, t.weights, cfg);
  const auto preds = predict(r.model, t.splits.test);
  std::vector<double> sigma, noise_scale;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    sigma.push_back(preds[i].sigma);
    noise_scale.push_back(0.3 * t.splits.test.samples[i].target);
  }
  const double r_sigma = pearson(sigma, noise_scale);
  MESSAGE("pearson(sigma_hat, noise scale) = " << r_sigma);
  CHECK(r_sigma > 0.5);
}
