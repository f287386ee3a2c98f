#pragma once

#include <iosfwd>
#include <map>
#include <optional>
#include <string>

#include "lrnet/app/config.hpp"
#include "lrnet/data/fetch.hpp"

namespace lrnet::app {

/// Reference parameter total of the original LR-Net. inspect prints the
/// difference to it.
inline constexpr std::size_t kReferenceParameterTotal = 1028234;

/// Process exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

struct FetchArgs {
  std::string dataset;
  std::string cache_dir;
  std::string manifest;
  std::string mirror;
  std::map<std::string, std::string> url_overrides;
};

int cmd_fetch(const FetchArgs& args, std::ostream& out, std::ostream& err, data::Transport* transport = nullptr);

/// Loads the configured dataset from the cache and trains. `resume` names a
/// checkpoint to continue from.
int cmd_train(const RunConfig& config, std::ostream& out, std::ostream& err,
              const std::optional<std::string>& resume = std::nullopt);

struct EvalArgs {
  std::string checkpoint;
  std::string dataset;  // empty: the checkpoint's dataset
  std::string split = "test";
  std::string cache_dir;  // empty: the checkpoint's cache_dir
};

int cmd_eval(const EvalArgs& args, std::ostream& out, std::ostream& err);

struct InspectArgs {
  std::string config;
  std::string checkpoint;
  bool json = false;
};

int cmd_inspect(const InspectArgs& args, std::ostream& out, std::ostream& err);

}  // namespace lrnet::app
