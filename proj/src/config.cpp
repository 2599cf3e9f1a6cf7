#include "sneurod/config.hpp"

#include <fstream>
#include <set>

namespace sneurod {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void reject_unknown(const json& j, const std::set<std::string>& allowed, const std::string& section) {
  if (!j.is_object()) throw ConfigError("section '" + section + "' must be a JSON object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!allowed.count(it.key())) throw ConfigError("unknown key '" + it.key() + "' in section '" + section + "'");
  }
}

template <typename T>
void read(const json& j, const char* key, T& out, const std::string& section) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError("bad value for '" + std::string(key) + "' in section '" + section + "'");
  }
}

// Unsigned fields refuse negative or fractional JSON numbers.
void read_count(const json& j, const char* key, std::size_t& out, const std::string& section) {
  if (!j.contains(key)) return;
  const json& v = j.at(key);
  if (!v.is_number_unsigned()) {
    throw ConfigError("'" + std::string(key) + "' in section '" + section + "' must be a non-negative integer");
  }
  out = v.get<std::size_t>();
}

fs::path resolve(const fs::path& p, const fs::path& base) { return p.is_absolute() ? p : base / p; }

}  // namespace

nlohmann::ordered_json model_config_to_json(const ModelConfig& c) {
  nlohmann::ordered_json j;
  j["input_height"] = c.input_height;
  j["input_width"] = c.input_width;
  j["input_channels"] = c.input_channels;
  j["conv1_filters"] = c.conv1_filters;
  j["conv2_filters"] = c.conv2_filters;
  j["dense_units"] = c.dense_units;
  j["num_classes"] = c.num_classes;
  j["dropout_rate"] = c.dropout_rate;
  j["l2_lambda"] = c.l2_lambda;
  return j;
}

ModelConfig model_config_from_json(const json& j) {
  const std::string s = "model";
  reject_unknown(j, {"input_height", "input_width", "input_channels", "conv1_filters", "conv2_filters", "dense_units",
                     "num_classes", "dropout_rate", "l2_lambda"},
                 s);
  ModelConfig c;
  read_count(j, "input_height", c.input_height, s);
  read_count(j, "input_width", c.input_width, s);
  read_count(j, "input_channels", c.input_channels, s);
  read_count(j, "conv1_filters", c.conv1_filters, s);
  read_count(j, "conv2_filters", c.conv2_filters, s);
  read_count(j, "dense_units", c.dense_units, s);
  read_count(j, "num_classes", c.num_classes, s);
  read(j, "dropout_rate", c.dropout_rate, s);
  read(j, "l2_lambda", c.l2_lambda, s);
  plan_stages(c);
  return c;
}

nlohmann::ordered_json train_config_to_json(const TrainConfig& c) {
  nlohmann::ordered_json j;
  j["learning_rate"] = c.learning_rate;
  j["batch_size"] = c.batch_size;
  j["max_epochs"] = c.max_epochs;
  j["patience"] = c.patience;
  j["restore_best_weights"] = c.restore_best_weights;
  j["l2_lambda"] = c.l2_lambda;
  j["seed"] = c.seed;
  j["monitor"] = c.monitor == Monitor::kValLoss ? "val_loss" : "val_accuracy";
  return j;
}

TrainConfig train_config_from_json(const json& j) {
  const std::string s = "train";
  reject_unknown(j, {"learning_rate", "batch_size", "max_epochs", "patience", "restore_best_weights", "l2_lambda",
                     "seed", "monitor"},
                 s);
  TrainConfig c;
  read(j, "learning_rate", c.learning_rate, s);
  read_count(j, "batch_size", c.batch_size, s);
  read_count(j, "max_epochs", c.max_epochs, s);
  read_count(j, "patience", c.patience, s);
  read(j, "restore_best_weights", c.restore_best_weights, s);
  read(j, "l2_lambda", c.l2_lambda, s);
  if (j.contains("seed")) {
    if (!j.at("seed").is_number_unsigned()) throw ConfigError("'seed' in section 'train' must be a non-negative integer");
    c.seed = j.at("seed").get<std::uint64_t>();
  }
  std::string monitor = "val_loss";
  read(j, "monitor", monitor, s);
  if (monitor == "val_loss") {
    c.monitor = Monitor::kValLoss;
  } else if (monitor == "val_accuracy") {
    c.monitor = Monitor::kValAccuracy;
  } else {
    throw ConfigError("monitor must be 'val_loss' or 'val_accuracy'");
  }
  if (!(c.learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
  if (c.batch_size == 0) throw ConfigError("batch_size must be >= 1");
  if (!(c.l2_lambda >= 0.0)) throw ConfigError("l2_lambda must be >= 0");
  return c;
}

SplitSpec DataConfig::split_spec() const {
  SplitSpec s;
  s.seed = split_seed;
  s.stratify = stratify;
  s.subject_grouped = subject_grouped;
  return s;
}

RunConfig run_config_from_json(const json& j, const fs::path& base_dir) {
  reject_unknown(j, {"data", "model", "train", "output"}, "root");
  RunConfig rc;

  const json data = j.value("data", json::object());
  reject_unknown(data, {"manifest", "image_root", "plane", "gamma", "split_seed", "stratify", "subject_grouped"}, "data");
  std::string manifest, image_root, plane = "any";
  read(data, "manifest", manifest, "data");
  read(data, "image_root", image_root, "data");
  read(data, "plane", plane, "data");
  if (!manifest.empty()) rc.data.manifest = resolve(manifest, base_dir);
  rc.data.image_root = image_root.empty() ? rc.data.manifest.parent_path() : resolve(image_root, base_dir);
  if (plane != "any") {
    try {
      rc.data.plane = parse_plane(plane);
    } catch (const DataError& e) {
      throw ConfigError(e.what());
    }
  }
  if (data.contains("gamma")) {
    if (data["gamma"].is_null()) {
      rc.data.gamma.reset();
    } else if (data["gamma"].is_number() && data["gamma"].get<double>() > 0.0) {
      rc.data.gamma = GammaSpec{data["gamma"].get<double>()};
    } else {
      throw ConfigError("data.gamma must be a positive number or null");
    }
  }
  if (data.contains("split_seed")) {
    if (!data["split_seed"].is_number_unsigned()) throw ConfigError("data.split_seed must be a non-negative integer");
    rc.data.split_seed = data["split_seed"].get<std::uint64_t>();
  }
  read(data, "stratify", rc.data.stratify, "data");
  read(data, "subject_grouped", rc.data.subject_grouped, "data");

  const json model = j.value("model", json::object());
  const json train = j.value("train", json::object());
  rc.model = model_config_from_json(model);
  rc.train = train_config_from_json(train);
  // One regularization strength: whichever section states it wins; both must agree.
  const bool model_l2 = model.contains("l2_lambda"), train_l2 = train.contains("l2_lambda");
  if (model_l2 && train_l2 && rc.model.l2_lambda != rc.train.l2_lambda) {
    throw ConfigError("model.l2_lambda and train.l2_lambda disagree");
  }
  if (model_l2 && !train_l2) rc.train.l2_lambda = rc.model.l2_lambda;
  if (train_l2 && !model_l2) rc.model.l2_lambda = rc.train.l2_lambda;

  const json output = j.value("output", json::object());
  reject_unknown(output, {"directory"}, "output");
  std::string dir = "run";
  read(output, "directory", dir, "output");
  rc.output_dir = resolve(dir, base_dir);
  return rc;
}

RunConfig load_run_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("malformed config " + path.string() + ": " + e.what());
  }
  return run_config_from_json(j, fs::absolute(path).parent_path());
}

}  // namespace sneurod
