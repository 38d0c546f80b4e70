#include "defrag/config.hpp"

#include <json.hpp>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "defrag/errors.hpp"

namespace defrag {

namespace {

using nlohmann::json;

std::int64_t to_int(const json& v, const std::string& key) {
  if (!v.is_number_integer()) {
    throw ConfigError("config key '" + key + "' must be an integer");
  }
  return v.get<std::int64_t>();
}

double to_double(const json& v, const std::string& key) {
  if (!v.is_number()) {
    throw ConfigError("config key '" + key + "' must be a number");
  }
  return v.get<double>();
}

std::string to_string_value(const json& v, const std::string& key) {
  if (!v.is_string()) {
    throw ConfigError("config key '" + key + "' must be a string");
  }
  return v.get<std::string>();
}

std::int64_t parse_int(const std::string& s, const std::string& key) {
  try {
    std::size_t pos = 0;
    const long long v = std::stoll(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("cannot parse '" + s + "' as integer for key '" + key +
                      "'");
  }
}

double parse_double(const std::string& s, const std::string& key) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("cannot parse '" + s + "' as number for key '" + key +
                      "'");
  }
}

}  // namespace

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = {
      "dataset", "data_dir", "method",     "aux",    "lambda_aux", "delta",
      "alpha",   "lr",       "batch_size", "epochs", "seed",       "train_n",
      "test_n",  "d_feat",   "checkpoint"};
  return keys;
}

void apply_override(RunConfig& cfg, const std::string& key,
                    const std::string& value) {
  if (key == "dataset") {
    cfg.dataset = value;
  } else if (key == "data_dir") {
    cfg.data_dir = value;
  } else if (key == "method") {
    cfg.method = value;
  } else if (key == "aux") {
    cfg.aux = value;
  } else if (key == "lambda_aux") {
    cfg.lambda_aux = parse_double(value, key);
  } else if (key == "delta") {
    cfg.delta = parse_double(value, key);
  } else if (key == "alpha") {
    cfg.alpha = parse_double(value, key);
  } else if (key == "lr") {
    cfg.lr = parse_double(value, key);
  } else if (key == "batch_size") {
    cfg.batch_size = parse_int(value, key);
  } else if (key == "epochs") {
    cfg.epochs = parse_int(value, key);
  } else if (key == "seed") {
    cfg.seed = static_cast<std::uint64_t>(parse_int(value, key));
  } else if (key == "train_n") {
    cfg.train_n = parse_int(value, key);
  } else if (key == "test_n") {
    cfg.test_n = parse_int(value, key);
  } else if (key == "d_feat") {
    cfg.d_feat = parse_int(value, key);
  } else if (key == "checkpoint") {
    cfg.checkpoint = value;
  } else {
    throw ConfigError("unknown config key '" + key + "'");
  }
}

RunConfig config_from_json_string(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) {
    throw ConfigError("config root must be a JSON object");
  }
  RunConfig cfg;
  for (const auto& [key, value] : j.items()) {
    if (key == "dataset") {
      cfg.dataset = to_string_value(value, key);
    } else if (key == "data_dir") {
      cfg.data_dir = to_string_value(value, key);
    } else if (key == "method") {
      cfg.method = to_string_value(value, key);
    } else if (key == "aux") {
      cfg.aux = to_string_value(value, key);
    } else if (key == "lambda_aux") {
      cfg.lambda_aux = to_double(value, key);
    } else if (key == "delta") {
      cfg.delta = to_double(value, key);
    } else if (key == "alpha") {
      cfg.alpha = to_double(value, key);
    } else if (key == "lr") {
      cfg.lr = to_double(value, key);
    } else if (key == "batch_size") {
      cfg.batch_size = to_int(value, key);
    } else if (key == "epochs") {
      cfg.epochs = to_int(value, key);
    } else if (key == "seed") {
      cfg.seed = static_cast<std::uint64_t>(to_int(value, key));
    } else if (key == "train_n") {
      cfg.train_n = to_int(value, key);
    } else if (key == "test_n") {
      cfg.test_n = to_int(value, key);
    } else if (key == "d_feat") {
      cfg.d_feat = to_int(value, key);
    } else if (key == "checkpoint") {
      cfg.checkpoint = to_string_value(value, key);
    } else {
      throw ConfigError("unknown config key '" + key + "'");
    }
  }
  return cfg;
}

RunConfig config_from_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return config_from_json_string(buf.str());
}

std::string config_to_json_string(const RunConfig& cfg) {
  json j;
  j["dataset"] = cfg.dataset;
  j["data_dir"] = cfg.data_dir;
  j["method"] = cfg.method;
  j["aux"] = cfg.aux;
  j["lambda_aux"] = cfg.lambda_aux;
  j["delta"] = cfg.delta;
  j["alpha"] = cfg.alpha;
  j["lr"] = cfg.lr;
  j["batch_size"] = cfg.batch_size;
  j["epochs"] = cfg.epochs;
  j["seed"] = cfg.seed;
  j["train_n"] = cfg.train_n;
  j["test_n"] = cfg.test_n;
  j["d_feat"] = cfg.d_feat;
  j["checkpoint"] = cfg.checkpoint;
  return j.dump(2) + "\n";
}

ResolvedMethod resolve_method(const RunConfig& cfg) {
  ResolvedMethod r;
  if (cfg.method == "sparse_relu") {
    r = {Activation::kReLU, AuxKind::kNone, false};
  } else if (cfg.method == "linear") {
    r = {Activation::kLinear, AuxKind::kNone, false};
  } else if (cfg.method == "softplus") {
    r = {Activation::kSoftplus, AuxKind::kNone, false};
  } else if (cfg.method == "center") {
    r = {Activation::kLinear, AuxKind::kCenter, false};
  } else if (cfg.method == "contrastive_center") {
    r = {Activation::kLinear, AuxKind::kContrastiveCenter, false};
  } else if (cfg.method == "silhouette") {
    r = {Activation::kLinear, AuxKind::kSilhouette, false};
  } else if (cfg.method == "defrag") {
    r = {Activation::kLinear, AuxKind::kSilhouette, true};
  } else {
    throw ConfigError(
        "unknown method '" + cfg.method +
        "' (expected sparse_relu, linear, center, contrastive_center, "
        "silhouette, defrag, or softplus)");
  }
  if (!cfg.aux.empty()) {
    if (cfg.method != "linear" && cfg.method != "softplus") {
      throw ConfigError("the aux override is only valid with the linear and "
                        "softplus presets; method '" +
                        cfg.method + "' pins its own aux loss");
    }
    const AuxKind k = aux_kind_from_name(cfg.aux);
    if (k != AuxKind::kNone && k != AuxKind::kL1 && k != AuxKind::kL2) {
      throw ConfigError("aux override must be none, l1, or l2; use the "
                        "method presets for the center-family losses");
    }
    r.aux = k;
  }
  return r;
}

void validate_config(const RunConfig& cfg) {
  if (cfg.dataset != "mnist" && cfg.dataset != "fashion_mnist") {
    throw ConfigError("dataset must be mnist or fashion_mnist, got '" +
                      cfg.dataset + "'");
  }
  resolve_method(cfg);
  if (cfg.lambda_aux < 0.0) {
    throw ConfigError("lambda_aux must be nonnegative");
  }
  if (cfg.delta <= 0.0) throw ConfigError("delta must be positive");
  if (cfg.alpha <= 0.0 || cfg.alpha > 1.0) {
    throw ConfigError("alpha must lie in (0,1]");
  }
  if (cfg.lr < 0.0) throw ConfigError("lr must be nonnegative");
  if (cfg.batch_size <= 0) throw ConfigError("batch_size must be positive");
  if (cfg.epochs < 0) throw ConfigError("epochs must be nonnegative");
  if (cfg.train_n < 0 || cfg.test_n < 0) {
    throw ConfigError("subset sizes must be nonnegative (0 = full split)");
  }
  if (cfg.d_feat <= 0 || cfg.d_feat > 256) {
    throw ConfigError("d_feat must lie in [1, 256]");
  }
}

std::string resolve_data_dir(const RunConfig& cfg) {
  if (!cfg.data_dir.empty()) return cfg.data_dir;
  if (const char* env = std::getenv("DEFRAG_DATA_DIR");
      env != nullptr && env[0] != '\0') {
    return env;
  }
  return "data";
}

}  // namespace defrag
