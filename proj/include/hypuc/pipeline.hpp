#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hypuc/calib.hpp"
#include "hypuc/data.hpp"
#include "hypuc/gbdt.hpp"
#include "hypuc/json_io.hpp"
#include "hypuc/metrics.hpp"
#include "hypuc/net.hpp"

namespace hypuc {

struct CalibSettings {
  double delta = 0.0;  // 0 => (range of y and y_hat) / 100
  double xi = 0.95;
  std::size_t min_bin_count = 1;
};

struct ClassifySettings {
  GbdtConfig gbdt;
  std::optional<double> threshold;  // raw target units; default: 90th percentile of train targets
  bool entropy_feature = false;
};

struct EvalSettings {
  std::vector<double> alphas{0.95};
  bool standard_z = false;
};

// Everything needed to reproduce a run. Serialised as one JSON document whose
// keys are the dotted paths accepted on the command line (train.lambda2, ...).
struct RunConfig {
  std::string task = "synthetic";
  SynthConfig synth;
  std::string data_dir;  // empty => <out_dir>/data written by synth
  TransformKind transform = TransformKind::standardize;
  SplitFractions split;
  Architecture arch;
  TrainConfig train;
  CalibSettings calib;
  ClassifySettings classify;
  std::vector<double> q_grid;  // empty => 1.0, 0.9, ..., 0.1
  EvalSettings eval;
  std::string out_dir;

  void validate() const;
  std::filesystem::path data_path() const;
};

json to_json(const RunConfig& c);
RunConfig run_config_from_json(const json& j);

// Sets the value at a dotted key path (e.g. "train.lambda2"), converting the
// text to the type of the value already stored there. Unknown keys throw ConfigError.
void apply_override(json& config, const std::string& dotted_key, const std::string& value);

// Default output root: $HYPUC_OUT_ROOT, else "runs".
std::filesystem::path default_output_root();

// Joins model predictions with dataset targets (both in training space).
std::vector<PredictionRecord> prediction_records(std::span<const Prediction> preds, const Dataset& ds);
// Applies the calibration artifact; targets in training space.
std::vector<ScoredRecord> calibrated_records(std::span<const Prediction> preds, const Dataset& ds,
                                             const CalibrationArtifact& art);

CalibrationArtifact fit_calibration(std::span<const PredictionRecord> records, const CalibSettings& settings);

// Mean y_hat in training space and calibrated sigma, optionally with entropy.
FeatureMatrix decision_features(std::span<const Prediction> preds, const CalibrationArtifact& art,
                                bool entropy_feature);

// Subcommands. Each reads what earlier stages wrote to cfg.out_dir, writes its
// own artifacts, then rewrites config.json and manifest.json (SHA-256 of every
// file in the run directory).
void cmd_synth(const RunConfig& cfg);
void cmd_train(const RunConfig& cfg);
void cmd_calibrate(const RunConfig& cfg);
void cmd_eval(const RunConfig& cfg, bool skip_calibration = false);
void cmd_classify(const RunConfig& cfg);
void cmd_filter(const RunConfig& cfg);
void cmd_run(const RunConfig& cfg);

void write_manifest(const std::filesystem::path& dir);

}  // namespace hypuc
