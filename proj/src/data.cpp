#include "hypuc/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <unordered_set>

#include "hypuc/error.hpp"

namespace hypuc {

namespace fs = std::filesystem;

std::string_view to_string(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::valid: return "valid";
    case Split::test: return "test";
  }
  return "train";
}

Split parse_split(std::string_view s) {
  if (s == "train") return Split::train;
  if (s == "valid") return Split::valid;
  if (s == "test") return Split::test;
  throw ParseError("unknown split '" + std::string(s) + "'");
}

std::string_view to_string(TransformKind k) {
  switch (k) {
    case TransformKind::identity: return "identity";
    case TransformKind::standardize: return "standardize";
    case TransformKind::log_standardize: return "log_standardize";
  }
  return "identity";
}

TransformKind parse_transform_kind(std::string_view s) {
  if (s == "identity") return TransformKind::identity;
  if (s == "standardize") return TransformKind::standardize;
  if (s == "log_standardize") return TransformKind::log_standardize;
  throw ConfigError("unknown transform kind '" + std::string(s) + "'");
}

double TargetTransform::apply(double y_raw) const {
  switch (kind) {
    case TransformKind::identity: return y_raw;
    case TransformKind::standardize: return (y_raw - mu) / sigma;
    case TransformKind::log_standardize:
      if (!(y_raw > 0.0)) throw DomainError("log_standardize requires a positive target");
      return (std::log(y_raw) - mu) / sigma;
  }
  return y_raw;
}

double TargetTransform::invert(double y_t) const {
  switch (kind) {
    case TransformKind::identity: return y_t;
    case TransformKind::standardize: return y_t * sigma + mu;
    case TransformKind::log_standardize: return std::exp(y_t * sigma + mu);
  }
  return y_t;
}

TargetTransform TargetTransform::fit(TransformKind kind, std::span<const double> raw) {
  TargetTransform t{kind, 0.0, 1.0};
  if (kind == TransformKind::identity) return t;
  if (raw.empty()) throw FitError("cannot fit a target transform on an empty set");
  std::vector<double> v(raw.begin(), raw.end());
  if (kind == TransformKind::log_standardize) {
    for (double& y : v) {
      if (!(y > 0.0)) throw DomainError("log_standardize requires positive targets");
      y = std::log(y);
    }
  }
  double mean = 0.0;
  for (double y : v) mean += y;
  mean /= static_cast<double>(v.size());
  double var = 0.0;
  for (double y : v) var += (y - mean) * (y - mean);
  var /= static_cast<double>(v.size());
  t.mu = mean;
  t.sigma = var > 0.0 ? std::sqrt(var) : 1.0;
  return t;
}

json to_json(const TargetTransform& t) {
  return json{{"kind", std::string(to_string(t.kind))}, {"mu", t.mu}, {"sigma", t.sigma}};
}

TargetTransform transform_from_json(const json& j) {
  TargetTransform t;
  t.kind = parse_transform_kind(j.at("kind").get<std::string>());
  t.mu = j.at("mu").get<double>();
  t.sigma = j.at("sigma").get<double>();
  if (!(t.sigma > 0.0)) throw SchemaError("transform sigma must be positive");
  return t;
}

std::vector<double> Dataset::raw_targets() const {
  std::vector<double> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back(s.target);
  return out;
}

std::vector<double> Dataset::transformed_targets() const {
  std::vector<double> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back(transform.apply(s.target));
  return out;
}

void Dataset::validate() const {
  std::unordered_set<std::string> ids;
  for (const auto& s : samples) {
    if (s.series.size() != series_len)
      throw SchemaError("sample '" + s.id + "' has series length " + std::to_string(s.series.size()) +
                        ", expected " + std::to_string(series_len));
    if (!std::isfinite(s.target)) throw SchemaError("sample '" + s.id + "' has a non-finite target");
    if (!ids.insert(s.id).second) throw SchemaError("duplicate sample id '" + s.id + "'");
  }
}

void SynthConfig::validate() const {
  if (n_samples == 0) throw ConfigError("n_samples must be positive");
  if (series_len < morphology::kMinSeriesLen)
    throw ConfigError("series_len must be at least " + std::to_string(morphology::kMinSeriesLen));
  if (!(skew > 0.0) || !std::isfinite(skew)) throw ConfigError("skew must be positive");
  if (!(noise_sd >= 0.0) || !std::isfinite(noise_sd)) throw ConfigError("noise_sd must be non-negative");
  if (!(label_noise >= 0.0) || !std::isfinite(label_noise))
    throw ConfigError("label_noise must be non-negative");
  if (!(noise_spread >= 0.0) || !std::isfinite(noise_spread))
    throw ConfigError("noise_spread must be non-negative");
}

json to_json(const SynthConfig& c) {
  return json{{"n_samples", c.n_samples}, {"series_len", c.series_len}, {"skew", c.skew},
              {"noise_sd", c.noise_sd},   {"label_noise", c.label_noise}, {"noise_spread", c.noise_spread},
              {"seed", c.seed}};
}

SynthConfig synth_config_from_json(const json& j) {
  SynthConfig c;
  c.n_samples = j.value("n_samples", c.n_samples);
  c.series_len = j.value("series_len", c.series_len);
  c.skew = j.value("skew", c.skew);
  c.noise_sd = j.value("noise_sd", c.noise_sd);
  c.label_noise = j.value("label_noise", c.label_noise);
  c.noise_spread = j.value("noise_spread", c.noise_spread);
  c.seed = j.value("seed", c.seed);
  return c;
}

namespace morphology {

double spike_amplitude(double y) { return 0.5 + std::log1p(y); }

double wave_half_width(double y) { return 0.06 + 0.24 * y / (1.0 + y); }

double bump(double phase, double center, double half_width) {
  const double d = std::abs(phase - center);
  if (d >= half_width) return 0.0;
  return 0.5 * (1.0 + std::cos(std::numbers::pi * d / half_width));
}

}  // namespace morphology

std::vector<double> render_waveform(double y, std::size_t series_len) {
  using namespace morphology;
  const double period = static_cast<double>(series_len) / kBeats;
  const double amp = spike_amplitude(y);
  const double width = wave_half_width(y);
  std::vector<double> x(series_len);
  for (std::size_t t = 0; t < series_len; ++t) {
    const double cycles = static_cast<double>(t) / period;
    const double phase = cycles - std::floor(cycles);
    x[t] = amp * bump(phase, kSpikeCenter, kSpikeHalfWidth) + kWaveAmplitude * bump(phase, kWaveCenter, width);
  }
  return x;
}

Dataset generate_synthetic(const SynthConfig& cfg) {
  cfg.validate();
  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> normal(0.0, 1.0);

  Dataset ds;
  ds.series_len = cfg.series_len;
  ds.samples.reserve(cfg.n_samples);
  for (std::size_t i = 0; i < cfg.n_samples; ++i) {
    const double latent = std::exp(cfg.skew * normal(rng));
    TimeSeriesSample s;
    s.id = "syn-" + std::to_string(cfg.seed) + "-" + std::to_string(i);
    s.series = render_waveform(latent, cfg.series_len);
    // The spread draw is skipped when disabled so existing seeds keep their streams.
    const double sd = cfg.noise_spread > 0.0 ? cfg.noise_sd * std::exp(cfg.noise_spread * normal(rng)) : cfg.noise_sd;
    for (double& v : s.series) v += sd * normal(rng);
    s.target = latent * std::exp(cfg.label_noise * normal(rng));
    ds.samples.push_back(std::move(s));
  }
  return ds;
}

namespace {

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

}  // namespace

SplitSet split_dataset(const Dataset& all, TransformKind kind, SplitFractions fractions) {
  if (fractions.train <= 0.0 || fractions.valid < 0.0 || fractions.train + fractions.valid > 1.0)
    throw ConfigError("invalid split fractions");
  SplitSet out;
  for (Dataset* d : {&out.train, &out.valid, &out.test}) d->series_len = all.series_len;
  out.train.split = Split::train;
  out.valid.split = Split::valid;
  out.test.split = Split::test;
  for (const auto& s : all.samples) {
    const double u = static_cast<double>(fnv1a(s.id) % 1000000ull) / 1e6;
    if (u < fractions.train)
      out.train.samples.push_back(s);
    else if (u < fractions.train + fractions.valid)
      out.valid.samples.push_back(s);
    else
      out.test.samples.push_back(s);
  }
  const auto raw = out.train.raw_targets();
  const auto t = TargetTransform::fit(kind, raw);
  out.train.transform = out.valid.transform = out.test.transform = t;
  return out;
}

namespace {

json header_json(const Dataset& ds, json split) {
  return json{{"L", ds.series_len}, {"transform", to_json(ds.transform)}, {"split", std::move(split)}};
}

void write_jsonl(const Dataset& ds, const fs::path& path) {
  std::string text;
  for (const auto& s : ds.samples) {
    text += "{\"id\":";
    text += json(s.id).dump();
    text += ",\"series\":[";
    for (std::size_t i = 0; i < s.series.size(); ++i) {
      if (i) text += ',';
      text += format_double(s.series[i]);
    }
    text += "],\"target\":";
    text += format_double(s.target);
    text += "}\n";
  }
  write_text_file(path, text);
}

}  // namespace

void save_dataset(const Dataset& ds, const fs::path& jsonl_path) {
  ds.validate();
  write_jsonl(ds, jsonl_path);
  write_text_file(jsonl_path.parent_path() / "header.json",
                  dump_canonical(header_json(ds, std::string(to_string(ds.split)))));
}

Dataset load_dataset(const fs::path& jsonl_path) {
  Dataset ds;
  bool have_len = false;
  const fs::path header_path = jsonl_path.parent_path() / "header.json";
  const std::string stem = jsonl_path.stem().string();
  if (fs::exists(header_path)) {
    const json h = read_json_file(header_path);
    ds.series_len = h.at("L").get<std::size_t>();
    have_len = true;
    ds.transform = transform_from_json(h.at("transform"));
    const json& split = h.at("split");
    if (split.is_string()) {
      ds.split = parse_split(split.get<std::string>());
    } else {
      ds.split = parse_split(stem);
    }
  } else if (stem == "train" || stem == "valid" || stem == "test") {
    ds.split = parse_split(stem);
  }

  std::ifstream in(jsonl_path);
  if (!in) throw ParseError("cannot open " + jsonl_path.string());
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ParseError("malformed dataset line: " + std::string(e.what()), lineno);
    }
    TimeSeriesSample s;
    try {
      s.id = j.at("id").get<std::string>();
      s.series = j.at("series").get<std::vector<double>>();
      s.target = j.at("target").get<double>();
    } catch (const json::exception& e) {
      throw ParseError("bad dataset record: " + std::string(e.what()), lineno);
    }
    if (!have_len) {
      ds.series_len = s.series.size();
      have_len = true;
    }
    if (s.series.size() != ds.series_len)
      throw SchemaError("line " + std::to_string(lineno) + ": series length " + std::to_string(s.series.size()) +
                        " does not match declared L=" + std::to_string(ds.series_len));
    ds.samples.push_back(std::move(s));
  }
  ds.validate();
  return ds;
}

void save_splits(const SplitSet& splits, const fs::path& dir) {
  fs::create_directories(dir);
  for (const Dataset* d : {&splits.train, &splits.valid, &splits.test}) {
    d->validate();
    write_jsonl(*d, dir / (std::string(to_string(d->split)) + ".jsonl"));
  }
  write_text_file(dir / "header.json",
                  dump_canonical(header_json(splits.train, json::array({"train", "valid", "test"}))));
}

SplitSet load_splits(const fs::path& dir) {
  SplitSet s;
  s.train = load_dataset(dir / "train.jsonl");
  s.valid = load_dataset(dir / "valid.jsonl");
  s.test = load_dataset(dir / "test.jsonl");
  return s;
}

}  // namespace hypuc
