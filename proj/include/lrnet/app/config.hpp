#pragma once

#include <cstdint>
#include <string>

#include "lrnet/model/lrnet.hpp"
#include "lrnet/nn/nn.hpp"

namespace lrnet::app {

/// Everything that determines a training run. Serialized as one flat JSON
/// object; unknown keys are rejected.
struct RunConfig {
  std::string dataset = "mnist";
  model::ModelSpec model;
  nn::OptimizerKind optimizer = nn::OptimizerKind::adam;
  double lr = 1e-3;
  std::size_t batch_size = 256;
  /// Largest slice of a batch held in memory at once. Gradients of the
  /// slices are summed before the single optimizer step of the batch.
  std::size_t micro_batch = 32;
  std::size_t max_epochs = 200;
  std::size_t patience = 30;
  std::uint64_t seed = 0;
  double val_fraction = 0.1;
  /// Use only the first N training samples (0 = all).
  std::size_t train_limit = 0;
  std::string cache_dir;  // empty: $LRNET_CACHE or ~/.cache/lrnet
  std::string manifest;   // empty: the shipped manifest
  std::string checkpoint = "lrnet.ckpt";
  std::string metrics = "metrics.csv";
  /// When false the seconds column is written as 0 so metrics files of
  /// identical runs compare byte for byte.
  bool record_time = true;

  /// Throws ConfigError.
  void validate() const;

  std::string to_json() const;
  /// Throws ConfigError on malformed JSON, unknown keys or wrong types.
  static RunConfig from_json(const std::string& text);
  static RunConfig load(const std::string& path);

  /// Applies `key=value` style overrides using the JSON key names; the
  /// value is parsed as JSON when possible, else taken as a string.
  void set(const std::string& key, const std::string& value);

  std::string resolved_cache_dir() const;
  std::string resolved_manifest() const;
  std::string best_checkpoint() const { return checkpoint + ".best"; }
};

}  // namespace lrnet::app
