#include "hypuc/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "hypuc/error.hpp"
#include "hypuc/filter.hpp"
#include "hypuc/kde.hpp"
#include "hypuc/sha256.hpp"

namespace hypuc {

namespace fs = std::filesystem;

std::vector<PredictionRecord> prediction_records(std::span<const Prediction> preds, const Dataset& ds) {
  if (preds.size() != ds.size()) throw ShapeError("prediction count does not match dataset size");
  std::vector<PredictionRecord> out;
  out.reserve(preds.size());
  for (std::size_t i = 0; i < preds.size(); ++i)
    out.push_back({ds.samples[i].id, preds[i].mean, preds[i].sigma, ds.transform.apply(ds.samples[i].target)});
  return out;
}

std::vector<ScoredRecord> calibrated_records(std::span<const Prediction> preds, const Dataset& ds,
                                             const CalibrationArtifact& art) {
  if (preds.size() != ds.size()) throw ShapeError("prediction count does not match dataset size");
  std::vector<ScoredRecord> out;
  out.reserve(preds.size());
  for (std::size_t i = 0; i < preds.size(); ++i)
    out.push_back({preds[i].mean, art.calibrate(preds[i].mean, preds[i].sigma),
                   ds.transform.apply(ds.samples[i].target)});
  return out;
}

CalibrationArtifact fit_calibration(std::span<const PredictionRecord> records, const CalibSettings& settings) {
  const double s_star = global_scale(records);
  const double s_numeric = global_scale_numeric(records);
  if (std::abs(s_star - s_numeric) > 1e-9 * s_star)
    throw CalibrationError(fmt::format("closed-form s* {} disagrees with numeric minimiser {}", s_star, s_numeric));
  double delta = settings.delta;
  if (delta == 0.0) {
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (const auto& r : records) {
      lo = std::min({lo, r.mean, r.target.value_or(r.mean)});
      hi = std::max({hi, r.mean, r.target.value_or(r.mean)});
    }
    if (!(hi > lo)) throw CalibrationError("cannot bin a degenerate prediction range");
    delta = (hi - lo) / 100.0;
  }
  return fit_hyperfine(records, s_star, delta, settings.xi, settings.min_bin_count);
}

FeatureMatrix decision_features(std::span<const Prediction> preds, const CalibrationArtifact& art,
                                bool entropy_feature) {
  FeatureMatrix x;
  x.n_features = entropy_feature ? 3 : 2;
  x.values.reserve(preds.size() * x.n_features);
  for (const auto& p : preds) {
    const double s = art.calibrate(p.mean, p.sigma);
    x.values.push_back(p.mean);
    x.values.push_back(s);
    if (entropy_feature) x.values.push_back(entropy(s));
  }
  return x;
}

namespace {

bool affine(const TargetTransform& t) { return t.kind != TransformKind::log_standardize; }

// Records in raw task units when the transform is affine; otherwise left in training space.
std::vector<ScoredRecord> report_space(std::vector<ScoredRecord> recs, const TargetTransform& t) {
  if (!affine(t)) return recs;
  const double scale = t.kind == TransformKind::identity ? 1.0 : t.sigma;
  for (auto& r : recs) {
    r.mean = t.invert(r.mean);
    r.target = t.invert(r.target);
    r.sigma *= scale;
  }
  return recs;
}

fs::path out_path(const RunConfig& cfg, const char* name) { return fs::path(cfg.out_dir) / name; }

void finalize(const RunConfig& cfg) {
  write_text_file(out_path(cfg, "config.json"), dump_canonical(to_json(cfg)));
  write_manifest(cfg.out_dir);
}

RegressorModel load_model(const RunConfig& cfg) {
  const fs::path p = out_path(cfg, "checkpoint.json");
  if (!fs::exists(p)) throw ConfigError("missing checkpoint " + p.string() + " (run train first)");
  return load_checkpoint(p);
}

CalibrationArtifact load_artifact(const RunConfig& cfg) {
  const fs::path p = out_path(cfg, "calibration.json");
  if (!fs::exists(p)) throw ConfigError("missing calibration artifact " + p.string() + " (run calibrate first)");
  return load_calibration(p);
}

Dataset load_split(const RunConfig& cfg, const char* name, const RegressorModel& m) {
  const fs::path p = cfg.data_path() / (std::string(name) + ".jsonl");
  if (!fs::exists(p)) throw ConfigError("missing dataset file " + p.string());
  Dataset ds = load_dataset(p);
  ds.transform = m.transform;
  return ds;
}

json classification_json(const ClassificationMetrics& c) {
  const auto num = [](double v) { return std::isfinite(v) ? json(v) : json(nullptr); };
  return json{{"auc", num(c.auc)},           {"auc_defined", c.auc_defined}, {"sensitivity", num(c.sensitivity)},
              {"specificity", num(c.specificity)}, {"ppv", num(c.ppv)},  {"npv", num(c.npv)},
              {"threshold", c.threshold}};
}

}  // namespace

void write_manifest(const fs::path& dir) {
  std::vector<std::pair<std::string, fs::path>> files;
  for (const auto& entry : fs::recursive_directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    const std::string rel = fs::relative(entry.path(), dir).generic_string();
    if (rel == "manifest.json") continue;
    files.emplace_back(rel, entry.path());
  }
  std::sort(files.begin(), files.end());
  json listing = json::object();
  for (const auto& [rel, path] : files) listing[rel] = sha256_file(path);
  write_text_file(dir / "manifest.json", dump_canonical(json{{"files", listing}}));
}

void cmd_synth(const RunConfig& cfg) {
  cfg.validate();
  const Dataset all = generate_synthetic(cfg.synth);
  const SplitSet splits = split_dataset(all, cfg.transform, cfg.split);
  save_splits(splits, cfg.data_path());
  finalize(cfg);
}

void cmd_train(const RunConfig& cfg) {
  cfg.validate();
  const fs::path dir = cfg.data_path();
  if (!fs::exists(dir / "train.jsonl") || !fs::exists(dir / "valid.jsonl"))
    throw ConfigError("missing dataset files under " + dir.string());
  const Dataset train_ds = load_dataset(dir / "train.jsonl");
  const Dataset valid_ds = load_dataset(dir / "valid.jsonl");

  Architecture arch = cfg.arch;
  arch.input_len = train_ds.series_len;
  RegressorModel model(arch, cfg.train.seed);
  model.transform = train_ds.transform;

  const std::vector<double> targets = train_ds.transformed_targets();
  const WeightScheme weights =
      make_weights(fit_kde(targets, cfg.train.bandwidth), cfg.train.lambda2, targets, cfg.train.normalize_weights);
  TrainOptions opts;
  opts.valid = &valid_ds;
  const TrainResult result = train(model, train_ds, weights, cfg.train, opts);

  fs::create_directories(cfg.out_dir);
  save_checkpoint(result.model, out_path(cfg, "checkpoint.json"));
  std::string csv = "epoch,weighted_l1,gauss_nll,total,val_nll\n";
  for (const auto& e : result.history)
    csv += fmt::format("{},{},{},{},{}\n", e.epoch, format_double(e.train.weighted_l1),
                       format_double(e.train.gauss_nll), format_double(e.train.total), format_double(e.val_nll));
  write_text_file(out_path(cfg, "history.csv"), csv);
  finalize(cfg);
}

void cmd_calibrate(const RunConfig& cfg) {
  cfg.validate();
  const RegressorModel model = load_model(cfg);
  const Dataset valid = load_split(cfg, "valid", model);
  const auto preds = predict(model, valid);
  const auto records = prediction_records(preds, valid);
  CalibrationArtifact art = fit_calibration(records, cfg.calib);
  art.source_checkpoint_hash = sha256_file(out_path(cfg, "checkpoint.json"));
  save_calibration(art, out_path(cfg, "calibration.json"));
  finalize(cfg);
}

void cmd_eval(const RunConfig& cfg, bool skip_calibration) {
  cfg.validate();
  const RegressorModel model = load_model(cfg);
  const CalibrationArtifact art = skip_calibration ? CalibrationArtifact::identity() : load_artifact(cfg);
  const Dataset test = load_split(cfg, "test", model);
  const auto preds = predict(model, test);
  const auto convention = cfg.eval.standard_z ? IntervalConvention::standard_z : IntervalConvention::half_quantile;

  const auto report_for = [&](const CalibrationArtifact& a) {
    const auto recs = report_space(calibrated_records(preds, test, a), model.transform);
    return evaluate(recs, cfg.eval.alphas, convention);
  };
  const EvalReport main = report_for(art);
  json j = to_json(main);
  j["space"] = affine(model.transform) ? "raw" : "transformed";
  j["n"] = test.size();
  j["baselines"] = {{"uncalibrated", to_json(report_for(CalibrationArtifact::identity()))},
                    {"global_only", to_json(report_for(CalibrationArtifact::global_only(art.s_star)))}};
  write_text_file(out_path(cfg, "eval.json"), dump_canonical(j));
  write_text_file(out_path(cfg, "eval.txt"), format_table(main, cfg.task));
  finalize(cfg);
}

void cmd_classify(const RunConfig& cfg) {
  cfg.validate();
  const RegressorModel model = load_model(cfg);
  const CalibrationArtifact art = load_artifact(cfg);
  const Dataset train_ds = load_split(cfg, "train", model);
  const Dataset valid = load_split(cfg, "valid", model);
  const Dataset test = load_split(cfg, "test", model);

  double threshold = 0.0;
  if (cfg.classify.threshold) {
    threshold = *cfg.classify.threshold;
  } else {
    std::vector<double> raw = train_ds.raw_targets();
    const std::size_t k = static_cast<std::size_t>(0.9 * static_cast<double>(raw.size() - 1));
    std::nth_element(raw.begin(), raw.begin() + static_cast<std::ptrdiff_t>(k), raw.end());
    threshold = raw[k];
  }

  FeatureMatrix fit_x;
  std::vector<int> fit_y;
  for (const Dataset* d : {&train_ds, &valid}) {
    const auto preds = predict(model, *d);
    const FeatureMatrix x = decision_features(preds, art, cfg.classify.entropy_feature);
    fit_x.n_features = x.n_features;
    fit_x.values.insert(fit_x.values.end(), x.values.begin(), x.values.end());
    for (const auto& s : d->samples) fit_y.push_back(s.target > threshold ? 1 : 0);
  }
  const GbdtTrainResult fit = train_gbdt(fit_x, fit_y, cfg.classify.gbdt);
  save_forest(fit.forest, out_path(cfg, "forest.json"));

  const auto preds = predict(model, test);
  const FeatureMatrix test_x = decision_features(preds, art, cfg.classify.entropy_feature);
  std::vector<int> labels;
  std::vector<double> baseline_scores, gbdt_scores;
  for (std::size_t i = 0; i < test.size(); ++i) {
    labels.push_back(test.samples[i].target > threshold ? 1 : 0);
    baseline_scores.push_back(model.transform.invert(preds[i].mean));
    gbdt_scores.push_back(fit.forest.predict_proba(test_x.row(i)));
  }
  const json out{{"threshold", threshold},
                 {"n_test", test.size()},
                 {"baseline", classification_json(classification_metrics(baseline_scores, labels, threshold))},
                 {"gbdt", classification_json(classification_metrics(gbdt_scores, labels, 0.5))}};
  write_text_file(out_path(cfg, "classify.json"), dump_canonical(out));
  finalize(cfg);
}

void cmd_filter(const RunConfig& cfg) {
  cfg.validate();
  const RegressorModel model = load_model(cfg);
  const CalibrationArtifact art = load_artifact(cfg);
  const Dataset valid = load_split(cfg, "valid", model);
  const Dataset test = load_split(cfg, "test", model);
  const auto valid_recs = report_space(calibrated_records(predict(model, valid), valid, art), model.transform);
  const auto test_recs = report_space(calibrated_records(predict(model, test), test, art), model.transform);
  std::vector<double> entropies;
  entropies.reserve(valid_recs.size());
  for (const auto& r : valid_recs) entropies.push_back(entropy(r.sigma));
  const std::vector<double> grid = cfg.q_grid.empty() ? default_q_grid() : cfg.q_grid;
  const auto rows = filtering_curve(test_recs, entropies, grid);
  write_text_file(out_path(cfg, "filter.csv"), filter_curve_csv(rows));
  finalize(cfg);
}

void cmd_run(const RunConfig& cfg) {
  if (cfg.data_dir.empty()) cmd_synth(cfg);
  cmd_train(cfg);
  cmd_calibrate(cfg);
  cmd_eval(cfg);
  cmd_classify(cfg);
  cmd_filter(cfg);
}

}  // namespace hypuc
