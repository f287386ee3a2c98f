#include "lrnet/app/config.hpp"

#include <set>

#include <json.hpp>

#include "lrnet/core/error.hpp"
#include "lrnet/data/fetch.hpp"
#include "lrnet/data/idx.hpp"

namespace lrnet::app {

using json = nlohmann::ordered_json;

namespace {

const std::set<std::string> kBlockKeys{"f3", "f5", "f7", "f_out"};

template <typename T>
T get_as(const json& j, const std::string& key) {
  try {
    return j.get<T>();
  } catch (const json::exception&) {
    throw ConfigError("config key '" + key + "' has the wrong type: " + j.dump());
  }
}

std::size_t get_count(const json& j, const std::string& key) {
  if (!j.is_number_unsigned() && !(j.is_number_integer() && j.get<long long>() >= 0)) {
    throw ConfigError("config key '" + key + "' must be a non-negative integer, got " + j.dump());
  }
  return j.get<std::size_t>();
}

model::BlockSpec parse_block(const json& j) {
  if (!j.is_object()) throw ConfigError("each entry of 'blocks' must be an object");
  model::BlockSpec b;
  for (const auto& [k, v] : j.items()) {
    if (!kBlockKeys.count(k)) throw ConfigError("unknown block key '" + k + "'");
    const std::size_t n = get_count(v, "blocks." + k);
    if (k == "f3") b.f3 = n;
    if (k == "f5") b.f5 = n;
    if (k == "f7") b.f7 = n;
    if (k == "f_out") b.f_out = n;
  }
  return b;
}

void apply(RunConfig& c, const std::string& key, const json& v) {
  if (key == "dataset") {
    c.dataset = get_as<std::string>(v, key);
  } else if (key == "blocks") {
    if (!v.is_array()) throw ConfigError("'blocks' must be a list of block objects");
    c.model.blocks.clear();
    for (const auto& b : v) c.model.blocks.push_back(parse_block(b));
  } else if (key == "dense_widths") {
    if (!v.is_array()) throw ConfigError("'dense_widths' must be a list of integers");
    c.model.dense_widths.clear();
    for (const auto& w : v) c.model.dense_widths.push_back(get_count(w, key));
  } else if (key == "output_activation") {
    c.model.output_activation = nn::parse_output_activation(get_as<std::string>(v, key));
  } else if (key == "optimizer") {
    c.optimizer = nn::parse_optimizer(get_as<std::string>(v, key));
  } else if (key == "lr") {
    if (!v.is_number()) throw ConfigError("'lr' must be a number");
    c.lr = v.get<double>();
  } else if (key == "batch_size") {
    c.batch_size = get_count(v, key);
  } else if (key == "micro_batch") {
    c.micro_batch = get_count(v, key);
  } else if (key == "max_epochs") {
    c.max_epochs = get_count(v, key);
  } else if (key == "patience") {
    c.patience = get_count(v, key);
  } else if (key == "seed") {
    c.seed = get_count(v, key);
  } else if (key == "val_fraction") {
    if (!v.is_number()) throw ConfigError("'val_fraction' must be a number");
    c.val_fraction = v.get<double>();
  } else if (key == "train_limit") {
    c.train_limit = get_count(v, key);
  } else if (key == "cache_dir") {
    c.cache_dir = get_as<std::string>(v, key);
  } else if (key == "manifest") {
    c.manifest = get_as<std::string>(v, key);
  } else if (key == "checkpoint") {
    c.checkpoint = get_as<std::string>(v, key);
  } else if (key == "metrics") {
    c.metrics = get_as<std::string>(v, key);
  } else if (key == "record_time") {
    c.record_time = get_as<bool>(v, key);
  } else {
    throw ConfigError("unknown config key '" + key + "'");
  }
}

}  // namespace

void RunConfig::validate() const {
  model.validate();
  if (dataset.empty()) throw ConfigError("dataset must be set");
  if (batch_size == 0) throw ConfigError("batch_size must be positive");
  if (micro_batch == 0) throw ConfigError("micro_batch must be positive");
  if (max_epochs == 0) throw ConfigError("max_epochs must be positive");
  if (patience == 0) throw ConfigError("patience must be positive");
  if (!(lr >= 0.0)) throw ConfigError("lr must be non-negative");
  if (!(val_fraction > 0.0 && val_fraction < 1.0)) throw ConfigError("val_fraction must lie in (0, 1)");
}

std::string RunConfig::to_json() const {
  json j;
  j["dataset"] = dataset;
  j["blocks"] = json::array();
  for (const auto& b : model.blocks) j["blocks"].push_back({{"f3", b.f3}, {"f5", b.f5}, {"f7", b.f7}, {"f_out", b.f_out}});
  j["dense_widths"] = model.dense_widths;
  j["output_activation"] = nn::output_activation_name(model.output_activation);
  j["optimizer"] = nn::optimizer_name(optimizer);
  j["lr"] = lr;
  j["batch_size"] = batch_size;
  j["micro_batch"] = micro_batch;
  j["max_epochs"] = max_epochs;
  j["patience"] = patience;
  j["seed"] = seed;
  j["val_fraction"] = val_fraction;
  j["train_limit"] = train_limit;
  j["cache_dir"] = cache_dir;
  j["manifest"] = manifest;
  j["checkpoint"] = checkpoint;
  j["metrics"] = metrics;
  j["record_time"] = record_time;
  return j.dump(2);
}

RunConfig RunConfig::from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  RunConfig c;
  for (const auto& [k, v] : j.items()) apply(c, k, v);
  c.validate();
  return c;
}

RunConfig RunConfig::load(const std::string& path) {
  const auto bytes = data::read_file(path);
  return from_json(std::string(bytes.begin(), bytes.end()));
}

void RunConfig::set(const std::string& key, const std::string& value) {
  json v;
  try {
    v = json::parse(value);
  } catch (const json::exception&) {
    v = value;
  }
  if (v.is_number() && (key == "dataset" || key == "cache_dir" || key == "manifest" || key == "checkpoint" ||
                        key == "metrics")) {
    v = value;
  }
  apply(*this, key, v);
}

std::string RunConfig::resolved_cache_dir() const {
  return cache_dir.empty() ? data::default_cache_dir() : cache_dir;
}

std::string RunConfig::resolved_manifest() const {
  return manifest.empty() ? data::default_manifest_path() : manifest;
}

}  // namespace lrnet::app
