#include "lrnet/app/train.hpp"

#include <charconv>
#include <chrono>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <random>
#include <sstream>

#include "lrnet/core/error.hpp"

namespace lrnet::app {

namespace {

std::string shortest(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, end);
}

double parse_double(const std::string& s) {
  double v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) throw FormatError("metrics value '" + s + "' is not a number");
  return v;
}

std::size_t count_correct(const Tensor& logits, const std::vector<std::int32_t>& labels) {
  const auto pred = nn::argmax_rows(logits);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) correct += pred[i] == labels[i];
  return correct;
}

std::string rng_text(const std::mt19937_64& rng) {
  std::ostringstream os;
  os << rng;
  return os.str();
}

}  // namespace

std::string format_metrics_row(const MetricsRow& r) {
  return std::to_string(r.epoch) + "," + shortest(r.train_loss) + "," + shortest(r.train_acc) + "," +
         shortest(r.val_loss) + "," + shortest(r.val_acc) + "," + shortest(r.seconds);
}

std::vector<MetricsRow> parse_metrics(const std::string& csv) {
  std::istringstream in(csv);
  std::string line;
  if (!std::getline(in, line) || line != kMetricsHeader) throw FormatError("metrics CSV has an unexpected header");
  std::vector<MetricsRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::istringstream ls(line);
    for (std::string cell; std::getline(ls, cell, ',');) cells.push_back(cell);
    if (cells.size() != 6) throw FormatError("metrics row '" + line + "' does not have 6 columns");
    MetricsRow r;
    r.epoch = static_cast<std::uint64_t>(parse_double(cells[0]));
    r.train_loss = parse_double(cells[1]);
    r.train_acc = parse_double(cells[2]);
    r.val_loss = parse_double(cells[3]);
    r.val_acc = parse_double(cells[4]);
    r.seconds = parse_double(cells[5]);
    rows.push_back(r);
  }
  return rows;
}

EvalResult evaluate(model::Model<float>& model, const data::Dataset& ds, nn::OutputActivation activation,
                    std::size_t batch_size) {
  EvalResult res;
  double loss_sum = 0;
  const data::BatchIterator it{batch_size, 0, false};
  for (const auto& idx : it.batches(ds.size(), 0)) {
    const data::Batch b = data::gather(ds, idx);
    Graph<float> g;
    auto logits = model.forward(g.input(b.images));
    auto loss = nn::classification_loss(logits, b.labels, activation);
    loss_sum += static_cast<double>(loss.value().item()) * static_cast<double>(idx.size());
    res.correct += count_correct(logits.value(), b.labels);
    res.total += idx.size();
  }
  res.loss = loss_sum / static_cast<double>(res.total);
  res.accuracy = static_cast<double>(res.correct) / static_cast<double>(res.total);
  return res;
}

std::pair<data::Dataset, data::Dataset> prepare_train_val(const RunConfig& config, const data::Dataset& full_train) {
  return data::split_train_val(data::head(full_train, config.train_limit), config.val_fraction, config.seed);
}

TrainResult train(const RunConfig& config, const data::Dataset& train_set, const data::Dataset& val_set,
                  std::ostream& log, const Checkpoint* resume) {
  config.validate();
  std::mt19937_64 rng(config.seed);
  model::Model<float> model(config.model, rng);

  nn::OptimizerState<float> opt;
  opt.kind = config.optimizer;
  opt.lr = config.lr;
  nn::EarlyStopState stop;
  stop.patience = config.patience;
  std::uint64_t start_epoch = 0;

  if (resume != nullptr) {
    restore_parameters(model, resume->parameters);
    opt = resume->optimizer;
    stop = resume->early_stop;
    start_epoch = resume->epochs_completed;
    std::istringstream(resume->rng_state) >> rng;
  }

  const std::string config_json = config.to_json();
  auto snapshot = [&](std::uint64_t epochs_completed) {
    Checkpoint c;
    c.config_json = config_json;
    c.parameters = snapshot_parameters(model);
    c.optimizer = opt;
    c.epochs_completed = epochs_completed;
    c.early_stop = stop;
    c.rng_state = rng_text(rng);
    return c;
  };

  std::ofstream metrics(config.metrics, resume ? std::ios::app : std::ios::trunc);
  if (!metrics) throw IOError("cannot open metrics file " + config.metrics);
  if (!resume) metrics << kMetricsHeader << '\n' << std::flush;

  const data::BatchIterator batches{config.batch_size, config.seed, true};
  const auto activation = config.model.output_activation;
  const double n_train = static_cast<double>(train_set.size());
  auto params = model.parameters();

  TrainResult result;
  result.epochs_completed = start_epoch;
  if (resume && stop.epochs_since_improve >= stop.patience) result.reason = StopReason::early_stop;

  for (std::uint64_t epoch = start_epoch; epoch < config.max_epochs && result.reason != StopReason::early_stop;
       ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    double loss_sum = 0;
    std::size_t correct = 0;
    for (const auto& batch_idx : batches.batches(train_set.size(), epoch)) {
      zero_grads(params);
      const double batch_n = static_cast<double>(batch_idx.size());
      for (std::size_t start = 0; start < batch_idx.size(); start += config.micro_batch) {
        const std::size_t end = std::min(batch_idx.size(), start + config.micro_batch);
        const std::vector<std::size_t> micro(batch_idx.begin() + static_cast<std::ptrdiff_t>(start),
                                             batch_idx.begin() + static_cast<std::ptrdiff_t>(end));
        const data::Batch b = data::gather(train_set, micro);
        Graph<float> g;
        auto logits = model.forward(g.input(b.images));
        auto loss = nn::classification_loss(logits, b.labels, activation);
        // Each slice contributes its share of the batch-mean loss.
        g.backward(ag::scale(loss, static_cast<double>(micro.size()) / batch_n));
        loss_sum += static_cast<double>(loss.value().item()) * static_cast<double>(micro.size());
        correct += count_correct(logits.value(), b.labels);
      }
      nn::optimizer_step(opt, params);
    }

    const EvalResult v = evaluate(model, val_set, activation, config.micro_batch);
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    MetricsRow row{epoch + 1, loss_sum / n_train, static_cast<double>(correct) / n_train, v.loss, v.accuracy,
                   config.record_time ? seconds : 0.0};
    metrics << format_metrics_row(row) << '\n' << std::flush;
    if (!metrics) throw IOError("write to metrics file " + config.metrics + " failed");
    result.rows.push_back(row);

    const auto decision = nn::early_stop_update(stop, v.loss);
    result.epochs_completed = epoch + 1;
    log << "epoch " << row.epoch << "/" << config.max_epochs << std::fixed << std::setprecision(4)
        << "  train_loss " << row.train_loss << "  train_acc " << row.train_acc << "  val_loss " << row.val_loss
        << "  val_acc " << row.val_acc << std::setprecision(1) << "  " << seconds << "s" << std::defaultfloat
        << std::setprecision(6) << std::endl;
    if (stop.best_epoch == static_cast<std::int64_t>(epoch)) save_checkpoint(config.best_checkpoint(), snapshot(epoch + 1));
    if (decision == nn::EarlyStopDecision::stop) result.reason = StopReason::early_stop;
  }

  save_checkpoint(config.checkpoint, snapshot(result.epochs_completed));
  result.best_epoch = stop.best_epoch;
  result.best_val_loss = stop.best_val_loss;
  if (result.reason == StopReason::early_stop) {
    log << "stopped: early stopping, validation loss did not improve for " << stop.patience << " epochs";
  } else {
    log << "stopped: reached max_epochs (" << config.max_epochs << ")";
  }
  log << "; best epoch " << (stop.best_epoch + 1) << " (val_loss " << stop.best_val_loss << ")" << std::endl;
  return result;
}

}  // namespace lrnet::app
