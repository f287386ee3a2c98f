#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "lrnet/app/checkpoint.hpp"
#include "lrnet/app/config.hpp"
#include "lrnet/data/dataset.hpp"

namespace lrnet::app {

inline constexpr char kMetricsHeader[] = "epoch,train_loss,train_acc,val_loss,val_acc,seconds";

struct MetricsRow {
  std::uint64_t epoch = 0;  // 1-based
  double train_loss = 0;
  double train_acc = 0;
  double val_loss = 0;
  double val_acc = 0;
  double seconds = 0;
  friend bool operator==(const MetricsRow&, const MetricsRow&) = default;
};

/// Shortest round-trip decimal form, so parse_metrics recovers every value.
std::string format_metrics_row(const MetricsRow& row);
/// Throws FormatError on a wrong header or malformed row.
std::vector<MetricsRow> parse_metrics(const std::string& csv);

struct EvalResult {
  double loss = 0;
  double accuracy = 0;
  std::size_t correct = 0;
  std::size_t total = 0;
};

/// Mean loss and argmax accuracy over `ds`, in fixed batch order.
EvalResult evaluate(model::Model<float>& model, const data::Dataset& ds, nn::OutputActivation activation,
                    std::size_t batch_size);

enum class StopReason { max_epochs, early_stop };

struct TrainResult {
  std::vector<MetricsRow> rows;  // rows produced by this call
  StopReason reason = StopReason::max_epochs;
  std::int64_t best_epoch = -1;  // 0-based
  double best_val_loss = 0;
  std::uint64_t epochs_completed = 0;
};

/// Trains on `train`, validating on `val` after each epoch. Appends one
/// metrics row per epoch to config.metrics (truncated first unless
/// resuming), writes the best-validation-loss checkpoint to
/// config.best_checkpoint() and the final state to config.checkpoint.
/// Progress goes to `log`.
TrainResult train(const RunConfig& config, const data::Dataset& train, const data::Dataset& val, std::ostream& log,
                  const Checkpoint* resume = nullptr);

/// Train/val split as configured: first train_limit samples, then the
/// seeded stratified split.
std::pair<data::Dataset, data::Dataset> prepare_train_val(const RunConfig& config, const data::Dataset& full_train);

}  // namespace lrnet::app
