// hypuc: synthetic benchmark generation, training, calibration, evaluation,
// decision layer and entropy filtering from the command line.
//
//   hypuc run --out runs/demo --train.lambda2 0.8 --train.epochs 10
//   hypuc eval --config runs/demo/config.json --standard-z --alpha 0.5 --alpha 0.95
//
// Any config field can be overridden with --<dotted.path> <value>.
// Exit codes: 0 success, 2 usage/config error, 3 numeric failure.

#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "hypuc/error.hpp"
#include "hypuc/pipeline.hpp"

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitNumeric = 3;

hypuc::RunConfig build_config(const std::string& config_path, const std::string& out_dir,
                              const std::vector<std::string>& extras, const std::vector<double>& alphas,
                              bool standard_z) {
  hypuc::json cfg = hypuc::to_json(hypuc::RunConfig{});
  if (!config_path.empty()) cfg.merge_patch(hypuc::read_json_file(config_path));

  for (std::size_t i = 0; i < extras.size(); ++i) {
    std::string arg = extras[i];
    if (arg.rfind("--", 0) != 0) throw hypuc::ConfigError("unexpected argument '" + arg + "'");
    arg = arg.substr(2);
    std::string value;
    if (const auto eq = arg.find('='); eq != std::string::npos) {
      value = arg.substr(eq + 1);
      arg = arg.substr(0, eq);
    } else {
      if (i + 1 >= extras.size()) throw hypuc::ConfigError("missing value for --" + arg);
      value = extras[++i];
    }
    hypuc::apply_override(cfg, arg, value);
  }
  if (!alphas.empty()) cfg["eval"]["alphas"] = alphas;
  if (standard_z) cfg["eval"]["standard_z"] = true;
  if (!out_dir.empty()) cfg["out_dir"] = out_dir;
  if (cfg["out_dir"].get<std::string>().empty())
    cfg["out_dir"] = (hypuc::default_output_root() / cfg["task"].get<std::string>()).string();

  hypuc::RunConfig rc = hypuc::run_config_from_json(cfg);
  rc.validate();
  return rc;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Uncertainty-aware regression pipeline on imbalanced time series"};
  app.require_subcommand(1);

  std::string config_path, out_dir;
  std::vector<double> alphas;
  bool standard_z = false;
  bool skip_calibration = false;

  const std::vector<std::pair<std::string, std::string>> commands{
      {"synth", "Generate the synthetic imbalanced benchmark (train/valid/test + header)"},
      {"train", "Train the two-headed regressor; writes checkpoint.json and history.csv"},
      {"calibrate", "Fit global and per-bin uncertainty scales on the validation split"},
      {"eval", "Evaluate on the test split; writes eval.json and eval.txt"},
      {"classify", "Fit the boosted decision layer; writes forest.json and classify.json"},
      {"filter", "Entropy filtering curve on the test split; writes filter.csv"},
      {"run", "All of the above in order"},
      {"config", "Print the effective configuration as JSON"}};

  std::vector<CLI::App*> subs;
  for (const auto& [name, help] : commands) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->allow_extras();
    sub->add_option("-c,--config", config_path, "JSON run configuration");
    sub->add_option("-o,--out", out_dir, "Run directory (default: $HYPUC_OUT_ROOT/<task>)");
    if (name == "eval" || name == "run" || name == "config") {
      sub->add_option("--alpha", alphas, "Interval level(s) to report, in order");
      sub->add_flag("--standard-z", standard_z, "Use the two-sided normal quantile for intervals");
    }
    if (name == "eval") sub->add_flag("--skip-calibration", skip_calibration, "Evaluate raw network sigma");
    subs.push_back(sub);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  CLI::App* active = nullptr;
  for (CLI::App* s : subs)
    if (s->parsed()) active = s;
  const std::string cmd = active->get_name();

  try {
    const hypuc::RunConfig cfg = build_config(config_path, out_dir, active->remaining(), alphas, standard_z);
    if (cmd == "synth") hypuc::cmd_synth(cfg);
    else if (cmd == "train") hypuc::cmd_train(cfg);
    else if (cmd == "calibrate") hypuc::cmd_calibrate(cfg);
    else if (cmd == "eval") hypuc::cmd_eval(cfg, skip_calibration);
    else if (cmd == "classify") hypuc::cmd_classify(cfg);
    else if (cmd == "filter") hypuc::cmd_filter(cfg);
    else if (cmd == "run") hypuc::cmd_run(cfg);
    else std::cout << hypuc::dump_canonical(hypuc::to_json(cfg));
  } catch (const hypuc::NumericError& e) {
    std::cerr << "hypuc " << cmd << ": numeric failure: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const hypuc::CalibrationError& e) {
    std::cerr << "hypuc " << cmd << ": calibration failure: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const hypuc::Error& e) {
    std::cerr << "hypuc " << cmd << ": " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "hypuc " << cmd << ": " << e.what() << '\n';
    return 1;
  }
  return 0;
}
