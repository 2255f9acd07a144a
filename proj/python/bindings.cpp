#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <stdexcept>
#include <string>
#include <vector>

#include "hypuc/calib.hpp"
#include "hypuc/data.hpp"
#include "hypuc/error.hpp"
#include "hypuc/filter.hpp"
#include "hypuc/gbdt.hpp"
#include "hypuc/kde.hpp"
#include "hypuc/metrics.hpp"
#include "hypuc/net.hpp"
#include "hypuc/pipeline.hpp"

namespace py = pybind11;
using namespace hypuc;

namespace {

void require_same_length(std::size_t a, std::size_t b, const char* what) {
  if (a != b) throw ShapeError(std::string(what) + ": input lengths differ");
}

std::vector<PredictionRecord> to_records(const std::vector<double>& y_hat, const std::vector<double>& sigma,
                                         const std::vector<double>& y) {
  require_same_length(y_hat.size(), sigma.size(), "records");
  require_same_length(y_hat.size(), y.size(), "records");
  std::vector<PredictionRecord> out;
  out.reserve(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) out.push_back({std::to_string(i), y_hat[i], sigma[i], y[i]});
  return out;
}

std::vector<ScoredRecord> to_scored(const std::vector<double>& y_hat, const std::vector<double>& sigma,
                                    const std::vector<double>& y) {
  require_same_length(y_hat.size(), sigma.size(), "records");
  require_same_length(y_hat.size(), y.size(), "records");
  std::vector<ScoredRecord> out(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) out[i] = {y_hat[i], sigma[i], y[i]};
  return out;
}

RunConfig config_with_overrides(const py::dict& overrides, const std::string& out_dir) {
  json j = to_json(RunConfig{});
  for (const auto& [k, v] : overrides) {
    std::string text;
    if (py::isinstance<py::bool_>(v)) {
      text = v.cast<bool>() ? "true" : "false";
    } else if (py::isinstance<py::list>(v) || py::isinstance<py::tuple>(v)) {
      for (const auto& item : v) text += (text.empty() ? "" : ",") + std::string(py::str(item));
    } else {
      text = py::str(v);
    }
    apply_override(j, py::str(k), text);
  }
  RunConfig cfg = run_config_from_json(j);
  cfg.out_dir = out_dir;
  cfg.validate();
  return cfg;
}

}  // namespace

PYBIND11_MODULE(_hypuc, m) {
  m.doc() = "Heteroscedastic regression with calibrated uncertainty";

  // Error hierarchy: configuration and argument problems map onto ValueError.
  static py::exception<Error> base_error(m, "HypucError", PyExc_RuntimeError);
  static py::exception<ConfigError> config_error(m, "ConfigError", PyExc_ValueError);
  static py::exception<NumericError> numeric_error(m, "NumericError", base_error.ptr());
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const ConfigError& e) {
      py::set_error(config_error, e.what());
    } catch (const DomainError& e) {
      py::set_error(PyExc_ValueError, e.what());
    } catch (const ShapeError& e) {
      py::set_error(PyExc_ValueError, e.what());
    } catch (const NumericError& e) {
      py::set_error(numeric_error, e.what());
    } catch (const Error& e) {
      py::set_error(base_error, e.what());
    }
  });

  // Data
  m.def(
      "generate_synthetic",
      [](std::size_t n_samples, std::size_t series_len, double skew, double noise_sd, double label_noise,
         std::uint64_t seed, double noise_spread) {
        SynthConfig c{n_samples, series_len, skew, noise_sd, label_noise, seed, noise_spread};
        c.validate();
        const Dataset ds = generate_synthetic(c);
        std::vector<std::vector<double>> series;
        std::vector<double> targets;
        for (const auto& s : ds.samples) {
          series.push_back(s.series);
          targets.push_back(s.target);
        }
        return py::make_tuple(series, targets);
      },
      py::arg("n_samples") = 1000, py::arg("series_len") = 64, py::arg("skew") = 0.8, py::arg("noise_sd") = 0.05,
      py::arg("label_noise") = 0.0, py::arg("seed") = 0, py::arg("noise_spread") = 0.0,
      "Synthetic (series, targets) pair; series is a list of lists.");

  // Density weighting
  m.def(
      "kde_density",
      [](const std::vector<double>& anchors, double h, const std::vector<double>& queries) {
        const DensityModel d = fit_kde(anchors, h);
        std::vector<double> out;
        for (double q : queries) out.push_back(d.density(q));
        return out;
      },
      py::arg("anchors"), py::arg("bandwidth"), py::arg("queries"));
  m.def(
      "kde_weights",
      [](const std::vector<double>& train_targets, double h, double exponent, const std::vector<double>& queries) {
        const WeightScheme w = make_weights(fit_kde(train_targets, h), exponent, train_targets);
        std::vector<double> out;
        for (double q : queries) out.push_back(w.weight(q));
        return out;
      },
      py::arg("train_targets"), py::arg("bandwidth"), py::arg("exponent"), py::arg("queries"),
      "Normalised inverse-density weights at the query targets.");

  m.def(
      "loss",
      [](double mean, double sigma, double y, double weight, double lambda1, double lambda3) {
        TrainConfig c;
        c.lambda1 = lambda1;
        c.lambda3 = lambda3;
        const LossBreakdown b = hypuc_loss(mean, sigma, y, weight, c);
        py::dict d;
        d["weighted_l1"] = b.weighted_l1;
        d["gauss_nll"] = b.gauss_nll;
        d["total"] = b.total;
        return d;
      },
      py::arg("mean"), py::arg("sigma"), py::arg("y"), py::arg("weight") = 1.0, py::arg("lambda1") = 1.0,
      py::arg("lambda3") = 1e-4);

  // Calibration
  py::class_<CalibrationArtifact>(m, "Calibration")
      .def_readonly("s_star", &CalibrationArtifact::s_star)
      .def_readonly("y_min", &CalibrationArtifact::y_min)
      .def_readonly("delta", &CalibrationArtifact::delta)
      .def_readonly("xi", &CalibrationArtifact::xi)
      .def_readonly("eta", &CalibrationArtifact::eta)
      .def_readonly("min_bin_count", &CalibrationArtifact::min_bin_count)
      .def("bin_of", &CalibrationArtifact::bin_of)
      .def("calibrate", &CalibrationArtifact::calibrate, py::arg("y_hat"), py::arg("sigma"))
      .def("to_json", [](const CalibrationArtifact& a) { return to_json(a).dump(); })
      .def_static("from_json", [](const std::string& s) { return calibration_from_json(json::parse(s)); })
      .def_static("global_only", &CalibrationArtifact::global_only);

  m.def(
      "global_scale",
      [](const std::vector<double>& y_hat, const std::vector<double>& sigma, const std::vector<double>& y) {
        return global_scale(to_records(y_hat, sigma, y));
      },
      py::arg("y_hat"), py::arg("sigma"), py::arg("y"));
  m.def("bin_scale", &bin_scale, py::arg("ratios"), py::arg("xi"));
  m.def(
      "fit_calibration",
      [](const std::vector<double>& y_hat, const std::vector<double>& sigma, const std::vector<double>& y, double xi,
         double delta, std::size_t min_bin_count) {
        return fit_calibration(to_records(y_hat, sigma, y), CalibSettings{delta, xi, min_bin_count});
      },
      py::arg("y_hat"), py::arg("sigma"), py::arg("y"), py::arg("xi") = 0.95, py::arg("delta") = 0.0,
      py::arg("min_bin_count") = 1, "Global scale plus per-bin factors; delta 0 means range / 100.");

  // Metrics
  m.def(
      "uce",
      [](const std::vector<double>& y_hat, const std::vector<double>& sigma, const std::vector<double>& y,
         std::size_t n_bins) { return uce(to_scored(y_hat, sigma, y), n_bins); },
      py::arg("y_hat"), py::arg("sigma"), py::arg("y"), py::arg("n_bins") = 10);
  m.def(
      "gaussian_nll",
      [](const std::vector<double>& y_hat, const std::vector<double>& sigma, const std::vector<double>& y) {
        return gaussian_nll(to_scored(y_hat, sigma, y));
      },
      py::arg("y_hat"), py::arg("sigma"), py::arg("y"));
  m.def(
      "interval_coverage",
      [](const std::vector<double>& y_hat, const std::vector<double>& sigma, const std::vector<double>& y,
         double alpha, bool standard_z) {
        const auto r = interval_metrics(to_scored(y_hat, sigma, y), alpha,
                                        standard_z ? IntervalConvention::standard_z : IntervalConvention::half_quantile);
        return py::make_tuple(r.coverage, r.mean_length);
      },
      py::arg("y_hat"), py::arg("sigma"), py::arg("y"), py::arg("alpha") = 0.95, py::arg("standard_z") = false,
      "(coverage, mean interval length)");
  m.def(
      "auc", [](const std::vector<double>& s, const std::vector<int>& l) { return auc(s, l); }, py::arg("scores"),
      py::arg("labels"));
  m.def(
      "spearman", [](const std::vector<double>& a, const std::vector<double>& b) { return spearman(a, b); },
      py::arg("a"), py::arg("b"));
  m.def(
      "pearson", [](const std::vector<double>& a, const std::vector<double>& b) { return pearson(a, b); },
      py::arg("a"), py::arg("b"));

  // Decision layer
  py::class_<Forest>(m, "Forest")
      .def("predict_proba",
           [](const Forest& f, const std::vector<std::vector<double>>& rows) {
             std::vector<double> out;
             for (const auto& r : rows) {
               require_same_length(r.size(), f.n_features, "predict_proba");
               out.push_back(f.predict_proba(r));
             }
             return out;
           })
      .def_property_readonly("n_trees", [](const Forest& f) { return f.trees.size(); });
  m.def(
      "train_gbdt",
      [](const std::vector<std::vector<double>>& rows, const std::vector<int>& labels, std::size_t n_trees,
         std::size_t max_depth, double nu, std::size_t min_leaf) {
        if (rows.empty()) throw FitError("train_gbdt: no rows");
        FeatureMatrix fx;
        fx.n_features = rows.front().size();
        for (const auto& r : rows) fx.push_row(r);
        return train_gbdt(fx, labels, GbdtConfig{n_trees, max_depth, nu, min_leaf}).forest;
      },
      py::arg("rows"), py::arg("labels"), py::arg("n_trees") = 100, py::arg("max_depth") = 3, py::arg("nu") = 0.1,
      py::arg("min_leaf") = 20);

  // Entropy filter
  m.def("entropy", &entropy, py::arg("sigma"));
  m.def("quantile", &quantile_linear, py::arg("values"), py::arg("q"));

  // Pipeline
  m.def(
      "default_config", []() { return to_json(RunConfig{}).dump(2); },
      "Default run configuration as a JSON document.");
  m.def(
      "run",
      [](const std::filesystem::path& out_dir, const py::dict& overrides) {
        const RunConfig cfg = config_with_overrides(overrides, out_dir.string());
        py::gil_scoped_release release;
        cmd_run(cfg);
      },
      py::arg("out_dir"), py::arg("overrides") = py::dict(),
      "Full synth/train/calibrate/eval/classify/filter run. Overrides use dotted keys, e.g. {'train.epochs': 3}.");
}
