#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hypuc/json_io.hpp"

namespace hypuc {

struct TimeSeriesSample {
  std::string id;
  std::vector<double> series;
  double target = 0.0;  // raw task units

  bool operator==(const TimeSeriesSample&) const = default;
};

enum class Split { train, valid, test };

std::string_view to_string(Split s);
Split parse_split(std::string_view s);

enum class TransformKind { identity, standardize, log_standardize };

std::string_view to_string(TransformKind k);
TransformKind parse_transform_kind(std::string_view s);

// Affine map from raw targets to the training space, optionally after a log.
struct TargetTransform {
  TransformKind kind = TransformKind::identity;
  double mu = 0.0;
  double sigma = 1.0;

  double apply(double y_raw) const;
  double invert(double y_t) const;

  // Statistics (mean, population sd) of raw or log targets.
  static TargetTransform fit(TransformKind kind, std::span<const double> raw_targets);

  bool operator==(const TargetTransform&) const = default;
};

json to_json(const TargetTransform& t);
TargetTransform transform_from_json(const json& j);

struct Dataset {
  std::size_t series_len = 0;
  Split split = Split::train;
  TargetTransform transform;
  std::vector<TimeSeriesSample> samples;

  std::size_t size() const { return samples.size(); }
  std::vector<double> raw_targets() const;
  std::vector<double> transformed_targets() const;

  // Throws SchemaError on length mismatch, non-finite target or duplicate id.
  void validate() const;

  bool operator==(const Dataset&) const = default;
};

struct SynthConfig {
  std::size_t n_samples = 1000;
  std::size_t series_len = 64;
  double skew = 0.8;         // log-normal shape of the latent target
  double noise_sd = 0.05;    // i.i.d. Gaussian noise added to every series value
  double label_noise = 0.0;  // multiplicative log-normal noise on the observed target
  std::uint64_t seed = 0;
  // Per-sample series noise sd is noise_sd * exp(noise_spread * z), z ~ N(0, 1),
  // so some recordings are much cleaner than others.
  double noise_spread = 0.0;

  void validate() const;
};

json to_json(const SynthConfig& c);
SynthConfig synth_config_from_json(const json& j);

// Waveform morphology. Each series holds two beats; within a beat a narrow
// spike sits at phase 0.25 and a wider wave at phase 0.64. The spike amplitude
// and the wave half-width are monotone functions of the latent target.
namespace morphology {
inline constexpr double kBeats = 2.0;
inline constexpr double kSpikeCenter = 0.25;
inline constexpr double kSpikeHalfWidth = 0.07;
inline constexpr double kWaveCenter = 0.64;
inline constexpr double kWaveAmplitude = 0.6;
inline constexpr std::size_t kMinSeriesLen = 16;

double spike_amplitude(double y);
double wave_half_width(double y);
// Raised-cosine bump with compact support |phase - center| < half_width.
double bump(double phase, double center, double half_width);
}  // namespace morphology

// Noiseless waveform for latent target y.
std::vector<double> render_waveform(double y, std::size_t series_len);

// All samples are tagged Split::train with an identity transform; use
// split_dataset to partition and fit the target transform.
Dataset generate_synthetic(const SynthConfig& cfg);

struct SplitFractions {
  double train = 0.7;
  double valid = 0.1;  // test receives the remainder
};

struct SplitSet {
  Dataset train;
  Dataset valid;
  Dataset test;
};

// Assigns samples by a stable hash of their id. The transform is fit on the
// train split only and copied to all three.
SplitSet split_dataset(const Dataset& all, TransformKind kind, SplitFractions fractions = {});

// Dataset files: <name>.jsonl with one {"id","series","target"} object per
// line and a sidecar header.json in the same directory holding
// {L, transform, split}.
void save_dataset(const Dataset& ds, const std::filesystem::path& jsonl_path);
Dataset load_dataset(const std::filesystem::path& jsonl_path);

// Writes train.jsonl, valid.jsonl, test.jsonl and one shared header.json.
void save_splits(const SplitSet& splits, const std::filesystem::path& dir);
SplitSet load_splits(const std::filesystem::path& dir);

}  // namespace hypuc
