#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>
#include <random>
#include <set>

#include <doctest.h>

#include "hypuc/data.hpp"
#include "hypuc/error.hpp"
#include "test_util.hpp"

using namespace hypuc;
using hypuc::testing::TempDir;

TEST_CASE("target transform examples") {
  CHECK(TargetTransform{TransformKind::standardize, 0.0, 1.0}.apply(2.5) == 2.5);
  CHECK(TargetTransform{TransformKind::standardize, 4.2, 0.6}.apply(4.2) == 0.0);
  CHECK(TargetTransform{TransformKind::log_standardize, 0.0, 1.0}.apply(std::numbers::e) ==
        doctest::Approx(1.0).epsilon(1e-15));
  CHECK_THROWS_AS((TargetTransform{TransformKind::log_standardize, 0.0, 1.0}.apply(0.0)), DomainError);
  CHECK_THROWS_AS((TargetTransform{TransformKind::log_standardize, 0.0, 1.0}.apply(-3.0)), DomainError);
}

TEST_CASE("transform round trip stays within 1e-9 relative error") {
  std::mt19937_64 rng(11);
  std::lognormal_distribution<double> dist(0.5, 1.3);
  for (auto kind : {TransformKind::identity, TransformKind::standardize, TransformKind::log_standardize}) {
    std::vector<double> ys(500);
    for (double& y : ys) y = dist(rng);
    const auto t = TargetTransform::fit(kind, ys);
    double worst = 0.0;
    for (double y : ys) worst = std::max(worst, hypuc::testing::rel_err(t.invert(t.apply(y)), y));
    CHECK(worst <= 1e-9);
  }
}

TEST_CASE("log_standardize statistics are computed on log targets") {
  const std::vector<double> ys{1.0, std::numbers::e, std::exp(2.0)};
  const auto t = TargetTransform::fit(TransformKind::log_standardize, ys);
  CHECK(t.mu == doctest::Approx(1.0));
  CHECK(t.sigma == doctest::Approx(std::sqrt(2.0 / 3.0)));
}

TEST_CASE("synthetic generation is bit-deterministic") {
  SynthConfig cfg{3, 16, 0.5, 0.0, 0.0, 7};
  const Dataset a = generate_synthetic(cfg);
  const Dataset b = generate_synthetic(cfg);
  REQUIRE(a.size() == 3);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a.samples[i].id == b.samples[i].id);
    CHECK(std::memcmp(a.samples[i].series.data(), b.samples[i].series.data(), 16 * sizeof(double)) == 0);
    CHECK(std::memcmp(&a.samples[i].target, &b.samples[i].target, sizeof(double)) == 0);
  }
  TempDir dir;
  save_dataset(a, dir / "a.jsonl");
  save_dataset(b, dir / "b.jsonl");
  CHECK(read_text_file(dir / "a.jsonl") == read_text_file(dir / "b.jsonl"));

  cfg.seed = 8;
  CHECK_FALSE(generate_synthetic(cfg) == a);
}

namespace {

// Independent re-derivation of the spike layout: raised-cosine bump centred at
// phase 0.25 of each of two beats, amplitude 0.5 + log(1 + y).
double invert_spike(const std::vector<double>& x) {
  const double period = static_cast<double>(x.size()) / 2.0;
  std::size_t best = 0;
  double best_d = 1e9;
  for (std::size_t t = 0; t < static_cast<std::size_t>(period); ++t) {
    const double d = std::abs(static_cast<double>(t) / period - 0.25);
    if (d < best_d) {
      best_d = d;
      best = t;
    }
  }
  const double shape = 0.5 * (1.0 + std::cos(std::numbers::pi * best_d / 0.07));
  const double amplitude = x[best] / shape;
  return std::expm1(amplitude - 0.5);
}

}  // namespace

TEST_CASE("noiseless series determine the target through the morphology map") {
  for (std::size_t len : {16u, 37u, 64u, 128u}) {
    const Dataset ds = generate_synthetic(SynthConfig{10, len, 0.8, 0.0, 0.0, 3});
    for (const auto& s : ds.samples) CHECK(invert_spike(s.series) == doctest::Approx(s.target).epsilon(1e-9));
  }
}

TEST_CASE("spike and wave supports do not overlap") {
  using namespace morphology;
  CHECK(kSpikeCenter + kSpikeHalfWidth < kWaveCenter - wave_half_width(1e12));
  CHECK(kWaveCenter + wave_half_width(1e12) < 1.0);
  CHECK(wave_half_width(0.1) < wave_half_width(2.0));
}

TEST_CASE("generated targets are right-skewed") {
  const Dataset ds = generate_synthetic(SynthConfig{10000, 16, 0.8, 0.1, 0.0, 5});
  const auto y = ds.raw_targets();
  double m = 0.0;
  for (double v : y) m += v;
  m /= static_cast<double>(y.size());
  double m2 = 0.0, m3 = 0.0;
  for (double v : y) {
    m2 += (v - m) * (v - m);
    m3 += (v - m) * (v - m) * (v - m);
  }
  m2 /= static_cast<double>(y.size());
  m3 /= static_cast<double>(y.size());
  const double skewness = m3 / std::pow(m2, 1.5);
  MESSAGE("sample skewness " << skewness);
  CHECK(skewness > 0.0);
}

TEST_CASE("invalid synth configs are rejected") {
  CHECK_THROWS_AS((generate_synthetic(SynthConfig{0, 16, 0.5, 0.0, 0.0, 1})), ConfigError);
  CHECK_THROWS_AS((generate_synthetic(SynthConfig{5, 0, 0.5, 0.0, 0.0, 1})), ConfigError);
  CHECK_THROWS_AS((generate_synthetic(SynthConfig{5, 16, 0.0, 0.0, 0.0, 1})), ConfigError);
  CHECK_THROWS_AS((generate_synthetic(SynthConfig{5, 16, 0.5, -0.1, 0.0, 1})), ConfigError);
  CHECK_THROWS_AS((generate_synthetic(SynthConfig{5, 16, 0.5, 0.0, -1.0, 1})), ConfigError);
}

TEST_CASE("dataset files round trip") {
  TempDir dir;
  Dataset ds = generate_synthetic(SynthConfig{3, 16, 0.5, 0.3, 0.1, 2});
  ds.split = Split::valid;
  ds.transform = TargetTransform{TransformKind::standardize, 1.25, 0.3};
  save_dataset(ds, dir / "valid.jsonl");
  const Dataset back = load_dataset(dir / "valid.jsonl");
  CHECK(back == ds);

  const std::string text = read_text_file(dir / "valid.jsonl");
  CHECK(text.find("\"id\":\"syn-2-0\"") != std::string::npos);
}

TEST_CASE("dataset loading errors") {
  TempDir dir;
  SUBCASE("series of the wrong length is a schema error") {
    write_text_file(dir / "header.json", R"({"L": 3, "split": "train", "transform": {"kind": "identity", "mu": 0, "sigma": 1}})");
    write_text_file(dir / "train.jsonl", "{\"id\":\"a\",\"series\":[1,2,3],\"target\":1}\n"
                                         "{\"id\":\"b\",\"series\":[1,2],\"target\":1}\n");
    CHECK_THROWS_AS(load_dataset(dir / "train.jsonl"), SchemaError);
  }
  SUBCASE("malformed line reports its line number") {
    write_text_file(dir / "train.jsonl", "{\"id\":\"a\",\"series\":[1,2,3],\"target\":1}\n{oops\n");
    try {
      load_dataset(dir / "train.jsonl");
      FAIL("expected ParseError");
    } catch (const ParseError& e) {
      CHECK(e.line() == 2);
    }
  }
  SUBCASE("empty file is an empty dataset") {
    write_text_file(dir / "test.jsonl", "");
    const Dataset ds = load_dataset(dir / "test.jsonl");
    CHECK(ds.size() == 0);
    CHECK(ds.split == Split::test);
  }
  SUBCASE("duplicate ids are rejected") {
    write_text_file(dir / "train.jsonl", "{\"id\":\"a\",\"series\":[1],\"target\":1}\n{\"id\":\"a\",\"series\":[2],\"target\":1}\n");
    CHECK_THROWS_AS(load_dataset(dir / "train.jsonl"), SchemaError);
  }
}

TEST_CASE("splits are disjoint, cover the input and fit the transform on train only") {
  const Dataset all = generate_synthetic(SynthConfig{3000, 16, 0.8, 0.1, 0.0, 9});
  const SplitSet s = split_dataset(all, TransformKind::standardize);
  std::set<std::string> seen;
  for (const Dataset* d : {&s.train, &s.valid, &s.test})
    for (const auto& smp : d->samples) CHECK(seen.insert(smp.id).second);
  CHECK(seen.size() == all.size());
  const double n = static_cast<double>(all.size());
  CHECK(static_cast<double>(s.train.size()) / n == doctest::Approx(0.7).epsilon(0.05));
  CHECK(static_cast<double>(s.valid.size()) / n == doctest::Approx(0.1).epsilon(0.25));

  const auto expected = TargetTransform::fit(TransformKind::standardize, s.train.raw_targets());
  CHECK(s.train.transform == expected);
  CHECK(s.test.transform == expected);

  const SplitSet again = split_dataset(all, TransformKind::standardize);
  CHECK(again.test == s.test);
}

TEST_CASE("save_splits writes four files that load back identically") {
  TempDir dir;
  const SplitSet s = split_dataset(generate_synthetic(SynthConfig{200, 16, 0.8, 0.1, 0.0, 4}), TransformKind::log_standardize);
  save_splits(s, dir.path());
  std::size_t files = 0;
  for ([[maybe_unused]] const auto& e : std::filesystem::directory_iterator(dir.path())) ++files;
  CHECK(files == 4);
  const SplitSet back = load_splits(dir.path());
  CHECK(back.train == s.train);
  CHECK(back.valid == s.valid);
  CHECK(back.test == s.test);
}
