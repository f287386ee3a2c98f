#include "lrnet/app/commands.hpp"

#include <iomanip>
#include <ostream>

#include <json.hpp>

#include "lrnet/app/checkpoint.hpp"
#include "lrnet/app/train.hpp"
#include "lrnet/core/error.hpp"
#include "lrnet/data/dataset.hpp"

namespace lrnet::app {

namespace {

template <typename Fn>
int guarded(std::ostream& err, Fn&& fn) {
  try {
    return fn();
  } catch (const ConfigError& e) {
    err << "error: " << e.kind() << ": " << e.what() << "\n";
    return kExitUsage;
  } catch (const Error& e) {
    err << "error: " << e.kind() << ": " << e.what() << "\n";
    return kExitFailure;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
}

}  // namespace

int cmd_fetch(const FetchArgs& args, std::ostream& out, std::ostream& err, data::Transport* transport) {
  return guarded(err, [&] {
    const auto manifest = data::load_manifest(args.manifest.empty() ? data::default_manifest_path() : args.manifest);
    data::FetchOptions opt{args.cache_dir.empty() ? data::default_cache_dir() : args.cache_dir, args.mirror,
                           args.url_overrides};
    data::CurlTransport curl;
    const auto report = data::fetch(args.dataset, manifest, opt, transport ? *transport : curl);
    for (const auto& f : report.files) {
      out << (f.downloaded ? "downloaded " : "cached     ") << f.path << "  sha256 " << f.sha256
          << (f.pinned ? "" : " (unpinned)") << "\n";
    }
    out << args.dataset << ": " << (report.all_cached() ? "cached" : "fetched") << "\n";
    return kExitOk;
  });
}

int cmd_train(const RunConfig& config, std::ostream& out, std::ostream& err, const std::optional<std::string>& resume) {
  return guarded(err, [&] {
    config.validate();
    std::optional<Checkpoint> ckpt;
    if (resume) {
      ckpt = load_checkpoint(*resume);
      const RunConfig saved = ckpt->config();
      if (saved.model != config.model) throw ConfigError("resume checkpoint was trained with a different model spec");
    }
    const auto manifest = data::load_manifest(config.resolved_manifest());
    const auto full = data::load_dataset(config.dataset, data::Split::train, config.resolved_cache_dir(), manifest);
    const auto [tr, va] = prepare_train_val(config, full);
    out << "dataset " << config.dataset << ": " << tr.size() << " train / " << va.size() << " val samples\n";
    train(config, tr, va, out, ckpt ? &*ckpt : nullptr);
    out << "checkpoint: " << config.checkpoint << " (best: " << config.best_checkpoint() << ")\n";
    out << "metrics: " << config.metrics << "\n";
    return kExitOk;
  });
}

int cmd_eval(const EvalArgs& args, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const Checkpoint ckpt = load_checkpoint(args.checkpoint);
    RunConfig config = ckpt.config();
    if (!args.dataset.empty()) config.dataset = args.dataset;
    if (!args.cache_dir.empty()) config.cache_dir = args.cache_dir;
    const data::Split split = data::parse_split(args.split);

    const auto manifest = data::load_manifest(config.resolved_manifest());
    data::Dataset ds;
    if (split == data::Split::test) {
      ds = data::load_dataset(config.dataset, split, config.resolved_cache_dir(), manifest);
    } else {
      auto pair = prepare_train_val(config, data::load_dataset(config.dataset, data::Split::train,
                                                               config.resolved_cache_dir(), manifest));
      ds = split == data::Split::train ? std::move(pair.first) : std::move(pair.second);
    }

    model::Model<float> model(config.model, config.seed);
    restore_parameters(model, ckpt.parameters);
    const EvalResult r = evaluate(model, ds, config.model.output_activation, config.micro_batch);
    out << "dataset: " << config.dataset << "\n";
    out << "split: " << data::split_name(split) << "\n";
    out << "correct: " << r.correct << "/" << r.total << "\n";
    out << std::fixed << std::setprecision(4) << "accuracy: " << 100.0 * r.accuracy << "%\n";
    out << std::setprecision(6) << "loss: " << r.loss << "\n";
    return kExitOk;
  });
}

int cmd_inspect(const InspectArgs& args, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    if (args.config.empty() == args.checkpoint.empty()) {
      throw ConfigError("inspect needs exactly one of --config or --checkpoint");
    }
    RunConfig config;
    std::optional<Checkpoint> ckpt;
    if (!args.config.empty()) {
      config = RunConfig::load(args.config);
    } else {
      ckpt = load_checkpoint(args.checkpoint);
      config = ckpt->config();
    }
    model::Model<float> model(config.model, config.seed);
    if (ckpt) restore_parameters(model, ckpt->parameters);
    const auto report = model::describe(model);
    const auto delta = static_cast<long long>(report.total_parameters) - static_cast<long long>(kReferenceParameterTotal);
    if (args.json) {
      auto j = nlohmann::ordered_json::parse(report.to_json());
      j["reference_total"] = kReferenceParameterTotal;
      j["delta"] = delta;
      out << j.dump(2) << "\n";
    } else {
      out << report.to_text();
      out << "reference_total: " << kReferenceParameterTotal << "\n";
      out << "delta: " << (delta > 0 ? "+" : "") << delta << "\n";
    }
    return kExitOk;
  });
}

}  // namespace lrnet::app
