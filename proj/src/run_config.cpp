#include <cstdlib>
#include <sstream>

#include "hypuc/error.hpp"
#include "hypuc/pipeline.hpp"

namespace hypuc {

namespace fs = std::filesystem;

void RunConfig::validate() const {
  synth.validate();
  arch.validate();
  train.validate();
  classify.gbdt.validate();
  if (!(calib.xi > 0.0 && calib.xi < 1.0)) throw ConfigError("calib.xi must lie in (0, 1)");
  if (!(calib.delta >= 0.0)) throw ConfigError("calib.delta must be >= 0 (0 selects range / 100)");
  for (double q : q_grid)
    if (!(q > 0.0 && q <= 1.0)) throw ConfigError("filter.q_grid entries must lie in (0, 1]");
  for (double a : eval.alphas)
    if (!(a > 0.0 && a < 1.0)) throw ConfigError("eval.alphas entries must lie in (0, 1)");
  if (out_dir.empty()) throw ConfigError("out_dir must be set");
}

fs::path RunConfig::data_path() const { return data_dir.empty() ? fs::path(out_dir) / "data" : fs::path(data_dir); }

json to_json(const RunConfig& c) {
  json gbdt = to_json(c.classify.gbdt);
  gbdt["threshold"] = c.classify.threshold ? json(*c.classify.threshold) : json(nullptr);
  gbdt["entropy_feature"] = c.classify.entropy_feature;
  return json{{"task", c.task},
              {"out_dir", c.out_dir},
              {"data_dir", c.data_dir},
              {"transform", std::string(to_string(c.transform))},
              {"synth", to_json(c.synth)},
              {"split", {{"train", c.split.train}, {"valid", c.split.valid}}},
              {"arch", to_json(c.arch)},
              {"train", to_json(c.train)},
              {"calib", {{"delta", c.calib.delta}, {"xi", c.calib.xi}, {"min_bin_count", c.calib.min_bin_count}}},
              {"gbdt", gbdt},
              {"filter", {{"q_grid", c.q_grid}}},
              {"eval", {{"alphas", c.eval.alphas}, {"standard_z", c.eval.standard_z}}}};
}

RunConfig run_config_from_json(const json& j) {
  RunConfig c;
  try {
    c.task = j.value("task", c.task);
    c.out_dir = j.value("out_dir", c.out_dir);
    c.data_dir = j.value("data_dir", c.data_dir);
    if (j.contains("transform")) c.transform = parse_transform_kind(j.at("transform").get<std::string>());
    if (j.contains("synth")) c.synth = synth_config_from_json(j.at("synth"));
    if (j.contains("split")) {
      c.split.train = j.at("split").value("train", c.split.train);
      c.split.valid = j.at("split").value("valid", c.split.valid);
    }
    if (j.contains("arch")) c.arch = architecture_from_json(j.at("arch"));
    if (j.contains("train")) c.train = train_config_from_json(j.at("train"));
    if (j.contains("calib")) {
      c.calib.delta = j.at("calib").value("delta", c.calib.delta);
      c.calib.xi = j.at("calib").value("xi", c.calib.xi);
      c.calib.min_bin_count = j.at("calib").value("min_bin_count", c.calib.min_bin_count);
    }
    if (j.contains("gbdt")) {
      const json& g = j.at("gbdt");
      c.classify.gbdt = gbdt_config_from_json(g);
      if (g.contains("threshold") && !g.at("threshold").is_null()) c.classify.threshold = g.at("threshold").get<double>();
      c.classify.entropy_feature = g.value("entropy_feature", false);
    }
    if (j.contains("filter")) c.q_grid = j.at("filter").value("q_grid", c.q_grid);
    if (j.contains("eval")) {
      c.eval.alphas = j.at("eval").value("alphas", c.eval.alphas);
      c.eval.standard_z = j.at("eval").value("standard_z", c.eval.standard_z);
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("invalid run config: ") + e.what());
  }
  return c;
}

namespace {

json parse_scalar_like(const json& current, const std::string& key, const std::string& text) {
  try {
    switch (current.type()) {
      case json::value_t::boolean:
        if (text == "true" || text == "1") return true;
        if (text == "false" || text == "0") return false;
        throw ConfigError("expected true/false for " + key);
      case json::value_t::number_unsigned:
      case json::value_t::number_integer:
        if (text.find_first_of(".eE") == std::string::npos) {
          std::size_t used = 0;
          const long long v = std::stoll(text, &used);
          if (used != text.size()) throw ConfigError("expected an integer for " + key);
          if (current.is_number_unsigned() && v < 0) throw ConfigError(key + " must be non-negative");
          return current.is_number_unsigned() ? json(static_cast<unsigned long long>(v)) : json(v);
        }
        [[fallthrough]];
      case json::value_t::number_float:
      case json::value_t::null: {
        std::size_t used = 0;
        const double v = std::stod(text, &used);
        if (used != text.size()) throw ConfigError("expected a number for " + key);
        return v;
      }
      case json::value_t::array: {
        if (!text.empty() && text.front() == '[') return json::parse(text);
        json arr = json::array();
        std::stringstream ss(text);
        std::string item;
        while (std::getline(ss, item, ',')) {
          if (item.empty()) continue;
          std::size_t used = 0;
          const double v = std::stod(item, &used);
          arr.push_back(v);
        }
        return arr;
      }
      default:
        return text;
    }
  } catch (const std::invalid_argument&) {
    throw ConfigError("cannot parse '" + text + "' for " + key);
  } catch (const std::out_of_range&) {
    throw ConfigError("value out of range for " + key);
  } catch (const json::exception&) {
    throw ConfigError("cannot parse '" + text + "' for " + key);
  }
}

}  // namespace

void apply_override(json& config, const std::string& dotted_key, const std::string& value) {
  json* node = &config;
  std::stringstream ss(dotted_key);
  std::string part;
  while (std::getline(ss, part, '.')) {
    if (!node->is_object() || !node->contains(part)) throw ConfigError("unknown config key '" + dotted_key + "'");
    node = &(*node)[part];
  }
  *node = parse_scalar_like(*node, dotted_key, value);
}

fs::path default_output_root() {
  if (const char* root = std::getenv("HYPUC_OUT_ROOT"); root && *root) return root;
  return "runs";
}

}  // namespace hypuc
