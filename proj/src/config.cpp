#include "proca/config.hpp"

#include <nlohmann/json.hpp>

#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace proca {

using nlohmann::json;

namespace {

void require_keys(const json& obj, const std::string& where, const std::set<std::string>& allowed) {
  if (!obj.is_object()) throw ConfigError("config: " + where + " must be an object");
  for (const auto& [key, _] : obj.items())
    if (!allowed.count(key))
      throw ConfigError("config: unknown key '" + where + (where.empty() ? "" : ".") + key + "'");
}

template <typename T>
T get_or(const json& obj, const std::string& where, const std::string& key, T fallback) {
  if (!obj.contains(key)) return fallback;
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError("config: bad value type for '" + where + "." + key + "'");
  }
}

std::array<double, 3> get_rgb(const json& obj, const std::string& where, const std::string& key,
                              std::array<double, 3> fallback) {
  if (!obj.contains(key)) return fallback;
  const auto& v = obj.at(key);
  if (!v.is_array() || v.size() != 3)
    throw ConfigError("config: '" + where + "." + key + "' must be an array of 3 numbers");
  return {v[0].get<double>(), v[1].get<double>(), v[2].get<double>()};
}

UpdatingScheme parse_updating(const std::string& s) {
  if (s == "fixed") return UpdatingScheme::fixed;
  if (s == "statistical") return UpdatingScheme::statistical;
  if (s == "mixed") return UpdatingScheme::mixed;
  throw ConfigError("config: unknown updating scheme '" + s +
                    "' (expected fixed|statistical|mixed)");
}

SelfTrainingMode parse_selftrain(const std::string& s) {
  if (s == "off") return SelfTrainingMode::off;
  if (s == "naive") return SelfTrainingMode::naive;
  if (s == "adaptive") return SelfTrainingMode::adaptive;
  throw ConfigError("config: unknown self-training mode '" + s + "' (expected off|naive|adaptive)");
}

}  // namespace

std::string to_string(UpdatingScheme s) {
  switch (s) {
    case UpdatingScheme::fixed: return "fixed";
    case UpdatingScheme::statistical: return "statistical";
    case UpdatingScheme::mixed: return "mixed";
  }
  return "?";
}

std::string to_string(SelfTrainingMode m) {
  switch (m) {
    case SelfTrainingMode::off: return "off";
    case SelfTrainingMode::naive: return "naive";
    case SelfTrainingMode::adaptive: return "adaptive";
  }
  return "?";
}

PipelineConfig default_config() {
  PipelineConfig cfg;
  cfg.scene.seed = 42;
  cfg.scene.shift.color_mul = {0.45, 0.80, 1.55};
  cfg.scene.shift.color_add = {0.16, 0.0, -0.12};
  cfg.scene.shift.noise_sigma = 0.06;
  cfg.scene.shift.blur_radius = 1.2;
  cfg.scene.shift.texture_swap = false;
  cfg.model.num_classes = cfg.scene.num_classes;
  return cfg;
}

PipelineConfig parse_config(const json& j) {
  require_keys(j, "", {"version", "seed", "scene", "model", "optim", "stages", "data",
                       "adaptation", "self_training", "eval"});
  PipelineConfig cfg = default_config();

  cfg.version = get_or(j, "", "version", 1);
  if (cfg.version != 1)
    throw ConfigError("config: unsupported schema version " + std::to_string(cfg.version));
  cfg.seed = get_or<std::uint64_t>(j, "", "seed", cfg.seed);

  if (j.contains("scene")) {
    const auto& s = j.at("scene");
    require_keys(s, "scene",
                 {"num_classes", "height", "width", "shapes_min", "shapes_max", "seed", "shift"});
    cfg.scene.num_classes = get_or(s, "scene", "num_classes", cfg.scene.num_classes);
    cfg.scene.height = get_or(s, "scene", "height", cfg.scene.height);
    cfg.scene.width = get_or(s, "scene", "width", cfg.scene.width);
    cfg.scene.shapes_min = get_or(s, "scene", "shapes_min", cfg.scene.shapes_min);
    cfg.scene.shapes_max = get_or(s, "scene", "shapes_max", cfg.scene.shapes_max);
    cfg.scene.seed = get_or<std::uint64_t>(s, "scene", "seed", cfg.scene.seed);
    if (s.contains("shift")) {
      const auto& sh = s.at("shift");
      require_keys(sh, "scene.shift",
                   {"color_mul", "color_add", "noise_sigma", "texture_swap", "blur_radius"});
      cfg.scene.shift.color_mul =
          get_rgb(sh, "scene.shift", "color_mul", cfg.scene.shift.color_mul);
      cfg.scene.shift.color_add =
          get_rgb(sh, "scene.shift", "color_add", cfg.scene.shift.color_add);
      cfg.scene.shift.noise_sigma =
          get_or(sh, "scene.shift", "noise_sigma", cfg.scene.shift.noise_sigma);
      cfg.scene.shift.texture_swap =
          get_or(sh, "scene.shift", "texture_swap", cfg.scene.shift.texture_swap);
      cfg.scene.shift.blur_radius =
          get_or(sh, "scene.shift", "blur_radius", cfg.scene.shift.blur_radius);
    }
  }
  validate(cfg.scene);

  if (j.contains("model")) {
    const auto& m = j.at("model");
    require_keys(m, "model", {"stem_channels", "feature_dim", "init_gain", "logit_scale"});
    cfg.model.stem_channels = get_or(m, "model", "stem_channels", cfg.model.stem_channels);
    cfg.model.feature_dim = get_or(m, "model", "feature_dim", cfg.model.feature_dim);
    cfg.model.init_gain = get_or(m, "model", "init_gain", cfg.model.init_gain);
    cfg.model.logit_scale = get_or(m, "model", "logit_scale", cfg.model.logit_scale);
    if (cfg.model.stem_channels < 1 || cfg.model.feature_dim < 1)
      throw ConfigError("config: model channel counts must be positive");
    if (cfg.model.init_gain <= 0 || cfg.model.logit_scale <= 0)
      throw ConfigError("config: model.init_gain and model.logit_scale must be > 0");
  }
  cfg.model.num_classes = cfg.scene.num_classes;

  if (j.contains("optim")) {
    const auto& o = j.at("optim");
    require_keys(o, "optim", {"base_lr", "momentum", "weight_decay", "poly_power"});
    cfg.optim.base_lr = get_or(o, "optim", "base_lr", cfg.optim.base_lr);
    cfg.optim.momentum = get_or(o, "optim", "momentum", cfg.optim.momentum);
    cfg.optim.weight_decay = get_or(o, "optim", "weight_decay", cfg.optim.weight_decay);
    cfg.optim.poly_power = get_or(o, "optim", "poly_power", cfg.optim.poly_power);
    if (cfg.optim.base_lr <= 0) throw ConfigError("config: optim.base_lr must be > 0");
    if (cfg.optim.momentum < 0 || cfg.optim.momentum >= 1)
      throw ConfigError("config: optim.momentum must lie in [0,1)");
  }

  if (j.contains("stages")) {
    const auto& s = j.at("stages");
    require_keys(s, "stages",
                 {"stage1_steps", "stage2_steps", "stage3_steps", "batch_size", "eval_interval"});
    cfg.stages.stage1_steps = get_or(s, "stages", "stage1_steps", cfg.stages.stage1_steps);
    cfg.stages.stage2_steps = get_or(s, "stages", "stage2_steps", cfg.stages.stage2_steps);
    cfg.stages.stage3_steps = get_or(s, "stages", "stage3_steps", cfg.stages.stage3_steps);
    cfg.stages.batch_size = get_or(s, "stages", "batch_size", cfg.stages.batch_size);
    cfg.stages.eval_interval = get_or(s, "stages", "eval_interval", cfg.stages.eval_interval);
    if (cfg.stages.batch_size < 1) throw ConfigError("config: stages.batch_size must be >= 1");
    if (cfg.stages.stage1_steps < 1 || cfg.stages.stage2_steps < 0 || cfg.stages.stage3_steps < 0)
      throw ConfigError("config: invalid stage step counts");
    if (cfg.stages.eval_interval < 1) throw ConfigError("config: eval_interval must be >= 1");
  }

  if (j.contains("data")) {
    const auto& d = j.at("data");
    require_keys(d, "data", {"n_source", "n_target", "n_eval"});
    cfg.data.n_source = get_or(d, "data", "n_source", cfg.data.n_source);
    cfg.data.n_target = get_or(d, "data", "n_target", cfg.data.n_target);
    cfg.data.n_eval = get_or(d, "data", "n_eval", cfg.data.n_eval);
    if (cfg.data.n_source < 1 || cfg.data.n_target < 1 || cfg.data.n_eval < 1)
      throw ConfigError("config: dataset sizes must be >= 1");
  }

  if (j.contains("adaptation")) {
    const auto& a = j.at("adaptation");
    require_keys(a, "adaptation",
                 {"updating", "levels", "domains", "tau_feat", "tau_out", "lambda_contra",
                  "momentum_m", "contrast_threshold", "normalize_similarity", "keep_source_ce"});
    cfg.adaptation.updating =
        parse_updating(get_or<std::string>(a, "adaptation", "updating",
                                           to_string(cfg.adaptation.updating)));
    if (a.contains("levels")) {
      cfg.adaptation.level_feature = cfg.adaptation.level_output = false;
      for (const auto& v : a.at("levels")) {
        const std::string level = v.get<std::string>();
        if (level == "feature")
          cfg.adaptation.level_feature = true;
        else if (level == "output")
          cfg.adaptation.level_output = true;
        else
          throw ConfigError("config: unknown level '" + level + "' (expected feature|output)");
      }
    }
    if (a.contains("domains")) {
      cfg.adaptation.domain_s2s = cfg.adaptation.domain_t2s = false;
      for (const auto& v : a.at("domains")) {
        const std::string domain = v.get<std::string>();
        if (domain == "s2s")
          cfg.adaptation.domain_s2s = true;
        else if (domain == "t2s")
          cfg.adaptation.domain_t2s = true;
        else
          throw ConfigError("config: unknown domain '" + domain + "' (expected s2s|t2s)");
      }
    }
    cfg.adaptation.tau_feat = get_or(a, "adaptation", "tau_feat", cfg.adaptation.tau_feat);
    cfg.adaptation.tau_out = get_or(a, "adaptation", "tau_out", cfg.adaptation.tau_out);
    cfg.adaptation.lambda_contra =
        get_or(a, "adaptation", "lambda_contra", cfg.adaptation.lambda_contra);
    cfg.adaptation.momentum_m = get_or(a, "adaptation", "momentum_m", cfg.adaptation.momentum_m);
    cfg.adaptation.contrast_threshold =
        get_or(a, "adaptation", "contrast_threshold", cfg.adaptation.contrast_threshold);
    cfg.adaptation.normalize_similarity =
        get_or(a, "adaptation", "normalize_similarity", cfg.adaptation.normalize_similarity);
    cfg.adaptation.keep_source_ce =
        get_or(a, "adaptation", "keep_source_ce", cfg.adaptation.keep_source_ce);
    if (cfg.adaptation.tau_feat <= 0 || cfg.adaptation.tau_out <= 0)
      throw ConfigError("config: adaptation temperatures must be > 0");
    if (cfg.adaptation.momentum_m < 0 || cfg.adaptation.momentum_m > 1)
      throw ConfigError("config: adaptation.momentum_m must lie in [0,1]");
    if (cfg.adaptation.contrast_threshold <= 0 || cfg.adaptation.contrast_threshold >= 1)
      throw ConfigError("config: adaptation.contrast_threshold must lie in (0,1)");
    if (cfg.adaptation.lambda_contra < 0)
      throw ConfigError("config: adaptation.lambda_contra must be >= 0");
  }
  if (cfg.stages.stage2_steps > 0 && !cfg.adaptation.level_feature && !cfg.adaptation.level_output)
    throw ConfigError("config: adaptation stage enabled but no level selected");
  if (cfg.stages.stage2_steps > 0 && !cfg.adaptation.domain_s2s && !cfg.adaptation.domain_t2s)
    throw ConfigError("config: adaptation stage enabled but no domain selected");

  if (j.contains("self_training")) {
    const auto& s = j.at("self_training");
    require_keys(s, "self_training", {"mode", "eta", "naive_threshold"});
    cfg.self_training.mode = parse_selftrain(
        get_or<std::string>(s, "self_training", "mode", to_string(cfg.self_training.mode)));
    cfg.self_training.eta = get_or(s, "self_training", "eta", cfg.self_training.eta);
    cfg.self_training.naive_threshold =
        get_or(s, "self_training", "naive_threshold", cfg.self_training.naive_threshold);
    if (cfg.self_training.eta <= 0 || cfg.self_training.eta > 1)
      throw ConfigError("config: self_training.eta must lie in (0,1]");
    if (cfg.self_training.naive_threshold <= 0 || cfg.self_training.naive_threshold >= 1)
      throw ConfigError("config: self_training.naive_threshold must lie in (0,1)");
  }

  if (j.contains("eval")) {
    const auto& e = j.at("eval");
    require_keys(e, "eval", {"mst_scales"});
    if (e.contains("mst_scales")) {
      cfg.eval.mst_scales.clear();
      for (const auto& v : e.at("mst_scales")) {
        const double s = v.get<double>();
        if (s <= 0) throw ConfigError("config: eval.mst_scales entries must be > 0");
        cfg.eval.mst_scales.push_back(s);
      }
    }
  }
  return cfg;
}

json config_to_json(const PipelineConfig& cfg) {
  json j;
  j["version"] = cfg.version;
  j["seed"] = cfg.seed;
  j["scene"] = {{"num_classes", cfg.scene.num_classes},
                {"height", cfg.scene.height},
                {"width", cfg.scene.width},
                {"shapes_min", cfg.scene.shapes_min},
                {"shapes_max", cfg.scene.shapes_max},
                {"seed", cfg.scene.seed},
                {"shift",
                 {{"color_mul", cfg.scene.shift.color_mul},
                  {"color_add", cfg.scene.shift.color_add},
                  {"noise_sigma", cfg.scene.shift.noise_sigma},
                  {"texture_swap", cfg.scene.shift.texture_swap},
                  {"blur_radius", cfg.scene.shift.blur_radius}}}};
  j["model"] = {{"stem_channels", cfg.model.stem_channels},
                {"feature_dim", cfg.model.feature_dim},
                {"init_gain", cfg.model.init_gain},
                {"logit_scale", cfg.model.logit_scale}};
  j["optim"] = {{"base_lr", cfg.optim.base_lr},
                {"momentum", cfg.optim.momentum},
                {"weight_decay", cfg.optim.weight_decay},
                {"poly_power", cfg.optim.poly_power}};
  j["stages"] = {{"stage1_steps", cfg.stages.stage1_steps},
                 {"stage2_steps", cfg.stages.stage2_steps},
                 {"stage3_steps", cfg.stages.stage3_steps},
                 {"batch_size", cfg.stages.batch_size},
                 {"eval_interval", cfg.stages.eval_interval}};
  j["data"] = {{"n_source", cfg.data.n_source},
               {"n_target", cfg.data.n_target},
               {"n_eval", cfg.data.n_eval}};
  std::vector<std::string> levels;
  if (cfg.adaptation.level_feature) levels.push_back("feature");
  if (cfg.adaptation.level_output) levels.push_back("output");
  std::vector<std::string> domains;
  if (cfg.adaptation.domain_s2s) domains.push_back("s2s");
  if (cfg.adaptation.domain_t2s) domains.push_back("t2s");
  j["adaptation"] = {{"updating", to_string(cfg.adaptation.updating)},
                     {"levels", levels},
                     {"domains", domains},
                     {"tau_feat", cfg.adaptation.tau_feat},
                     {"tau_out", cfg.adaptation.tau_out},
                     {"lambda_contra", cfg.adaptation.lambda_contra},
                     {"momentum_m", cfg.adaptation.momentum_m},
                     {"contrast_threshold", cfg.adaptation.contrast_threshold},
                     {"normalize_similarity", cfg.adaptation.normalize_similarity},
                     {"keep_source_ce", cfg.adaptation.keep_source_ce}};
  j["self_training"] = {{"mode", to_string(cfg.self_training.mode)},
                        {"eta", cfg.self_training.eta},
                        {"naive_threshold", cfg.self_training.naive_threshold}};
  j["eval"] = {{"mst_scales", cfg.eval.mst_scales}};
  return j;
}

void apply_override(json& doc, const std::string& dotted_key, const std::string& value) {
  static const std::map<std::string, std::string> aliases = {
      {"eta", "self_training.eta"},
      {"self_training", "self_training.mode"},
      {"updating", "adaptation.updating"},
      {"levels", "adaptation.levels"},
      {"domains", "adaptation.domains"},
      {"tau_feat", "adaptation.tau_feat"},
      {"tau_out", "adaptation.tau_out"},
      {"lambda", "adaptation.lambda_contra"},
      {"m", "adaptation.momentum_m"},
      {"noise_sigma", "scene.shift.noise_sigma"},
      {"texture_swap", "scene.shift.texture_swap"},
      {"mst", "eval.mst_scales"},
  };
  std::string key = dotted_key;
  if (const auto it = aliases.find(key); it != aliases.end()) key = it->second;

  std::vector<std::string> parts;
  std::stringstream ss(key);
  std::string part;
  while (std::getline(ss, part, '.')) parts.push_back(part);
  if (parts.empty()) throw ConfigError("override: empty key");

  json* node = &doc;
  for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
    if (!node->contains(parts[i]))
      throw ConfigError("override: unknown key '" + key + "'");
    node = &(*node)[parts[i]];
  }
  // leaf must already exist in the fully-populated config document
  if (!node->is_object() || !node->contains(parts.back()))
    throw ConfigError("override: unknown key '" + key + "'");

  json parsed;
  try {
    parsed = json::parse(value);
  } catch (const json::exception&) {
    // comma lists become arrays, everything else a bare string
    if (value.find(',') != std::string::npos) {
      parsed = json::array();
      std::stringstream vs(value);
      std::string item;
      while (std::getline(vs, item, ',')) {
        try {
          parsed.push_back(json::parse(item));
        } catch (const json::exception&) {
          parsed.push_back(item);
        }
      }
    } else {
      parsed = value;
    }
  }
  (*node)[parts.back()] = parsed;
}

PipelineConfig load_config_file(const std::string& path, const std::vector<std::string>& overrides) {
  std::ifstream is(path);
  if (!is) throw ConfigError("config: cannot open " + path);
  json doc;
  try {
    doc = json::parse(is);
  } catch (const json::exception& e) {
    throw ConfigError("config: JSON parse error in " + path + ": " + e.what());
  }
  // Populate the document with defaults first so overrides can address any key.
  json full = config_to_json(parse_config(doc));
  for (const auto& ov : overrides) {
    const auto eq = ov.find('=');
    if (eq == std::string::npos)
      throw ConfigError("override: expected key=value, got '" + ov + "'");
    apply_override(full, ov.substr(0, eq), ov.substr(eq + 1));
  }
  return parse_config(full);
}

}  // namespace proca
