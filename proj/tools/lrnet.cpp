#include <CLI11.hpp>

#include <iostream>
#include <optional>

#include "lrnet/app/commands.hpp"
#include "lrnet/core/error.hpp"

using namespace lrnet;

int main(int argc, char** argv) {
  CLI::App app{"LR-Net: multi-kernel CNN for low-resolution image classification"};
  app.require_subcommand(1);

  app::FetchArgs fetch;
  std::vector<std::string> overrides;
  auto* fetch_cmd = app.add_subcommand("fetch", "download and verify a dataset into the cache");
  fetch_cmd->add_option("--dataset", fetch.dataset, "mnist, fashion or oracle")->required();
  fetch_cmd->add_option("--cache", fetch.cache_dir, "cache directory (default $LRNET_CACHE or ~/.cache/lrnet)");
  fetch_cmd->add_option("--manifest", fetch.manifest, "dataset manifest JSON");
  fetch_cmd->add_option("--mirror", fetch.mirror, "base URL replacing each file's directory");
  fetch_cmd->add_option("--url-override", overrides, "FILENAME=URL, repeatable");

  std::string config_path, resume;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> max_epochs, patience, batch_size, micro_batch, train_limit;
  std::optional<double> lr;
  std::optional<std::string> dataset, activation, optimizer, metrics, checkpoint, cache;
  std::vector<std::string> sets;
  bool no_time = false;
  auto* train_cmd = app.add_subcommand("train", "train a model");
  train_cmd->add_option("--config", config_path, "run config JSON (defaults apply when omitted)");
  train_cmd->add_option("--seed", seed);
  train_cmd->add_option("--dataset", dataset);
  train_cmd->add_option("--max-epochs", max_epochs);
  train_cmd->add_option("--patience", patience);
  train_cmd->add_option("--batch-size", batch_size);
  train_cmd->add_option("--micro-batch", micro_batch, "samples per forward/backward slice of a batch");
  train_cmd->add_option("--lr", lr);
  train_cmd->add_option("--optimizer", optimizer, "adam or sgd");
  train_cmd->add_option("--output-activation", activation, "softmax or sigmoid");
  train_cmd->add_option("--train-limit", train_limit, "use only the first N training samples");
  train_cmd->add_option("--metrics", metrics, "metrics CSV path");
  train_cmd->add_option("--checkpoint", checkpoint, "final checkpoint path (best goes to <path>.best)");
  train_cmd->add_option("--cache", cache, "dataset cache directory");
  train_cmd->add_option("--set", sets, "KEY=VALUE config override, repeatable");
  train_cmd->add_flag("--no-record-time", no_time, "write 0 in the seconds column");
  train_cmd->add_option("--resume", resume, "continue from a checkpoint");

  app::EvalArgs eval;
  auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint");
  eval_cmd->add_option("--checkpoint", eval.checkpoint)->required();
  eval_cmd->add_option("--dataset", eval.dataset, "defaults to the checkpoint's dataset");
  eval_cmd->add_option("--split", eval.split, "test, val or train")->check(CLI::IsMember({"test", "val", "train"}));
  eval_cmd->add_option("--cache", eval.cache_dir);

  app::InspectArgs inspect;
  auto* inspect_cmd = app.add_subcommand("inspect", "print the model topology and parameter count");
  auto* cfg_opt = inspect_cmd->add_option("--config", inspect.config);
  auto* ckpt_opt = inspect_cmd->add_option("--checkpoint", inspect.checkpoint);
  cfg_opt->excludes(ckpt_opt);
  inspect_cmd->add_flag("--json", inspect.json);

  CLI11_PARSE(app, argc, argv);

  int code = app::kExitOk;
  if (*fetch_cmd) {
    for (const auto& o : overrides) {
      const auto eq = o.find('=');
      if (eq == std::string::npos) {
        std::cerr << "error: --url-override expects FILENAME=URL, got '" << o << "'\n";
        return app::kExitUsage;
      }
      fetch.url_overrides[o.substr(0, eq)] = o.substr(eq + 1);
    }
    code = app::cmd_fetch(fetch, std::cout, std::cerr);
  } else if (*train_cmd) {
    app::RunConfig config;
    try {
      if (!config_path.empty()) config = app::RunConfig::load(config_path);
      for (const auto& s : sets) {
        const auto eq = s.find('=');
        if (eq == std::string::npos) throw ConfigError("--set expects KEY=VALUE, got '" + s + "'");
        config.set(s.substr(0, eq), s.substr(eq + 1));
      }
      if (seed) config.seed = *seed;
      if (dataset) config.dataset = *dataset;
      if (max_epochs) config.max_epochs = *max_epochs;
      if (patience) config.patience = *patience;
      if (batch_size) config.batch_size = *batch_size;
      if (micro_batch) config.micro_batch = *micro_batch;
      if (train_limit) config.train_limit = *train_limit;
      if (lr) config.lr = *lr;
      if (optimizer) config.set("optimizer", *optimizer);
      if (activation) config.set("output_activation", *activation);
      if (metrics) config.metrics = *metrics;
      if (checkpoint) config.checkpoint = *checkpoint;
      if (cache) config.cache_dir = *cache;
      if (no_time) config.record_time = false;
      config.validate();
    } catch (const Error& e) {
      std::cerr << "error: " << e.kind() << ": " << e.what() << "\n";
      code = dynamic_cast<const ConfigError*>(&e) ? app::kExitUsage : app::kExitFailure;
      std::cerr << "see `lrnet train --help`\n";
      return code;
    }
    code = app::cmd_train(config, std::cout, std::cerr,
                          resume.empty() ? std::nullopt : std::optional<std::string>(resume));
  } else if (*eval_cmd) {
    code = app::cmd_eval(eval, std::cout, std::cerr);
  } else if (*inspect_cmd) {
    code = app::cmd_inspect(inspect, std::cout, std::cerr);
  }
  if (code == app::kExitUsage) std::cerr << "see `lrnet " << app.get_subcommands().front()->get_name() << " --help`\n";
  return code;
}
