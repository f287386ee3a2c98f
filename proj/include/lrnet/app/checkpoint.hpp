#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lrnet/app/config.hpp"
#include "lrnet/data/idx.hpp"
#include "lrnet/nn/nn.hpp"

namespace lrnet::app {

inline constexpr char kCheckpointMagic[4] = {'L', 'R', 'N', 'C'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct NamedTensor {
  std::string name;
  Tensor value;
  friend bool operator==(const NamedTensor&, const NamedTensor&) = default;
};

/// Little-endian container:
///
///   "LRNC" u32 version
///   u64 config length, config JSON (UTF-8)
///   tensor table: parameters
///   optimizer: u32 kind, f64 lr, beta1, beta2, eps, u64 step, tensor table m, tensor table v
///   u64 epochs_completed
///   early stop: u64 patience, f64 best_val_loss, u64 epochs_since_improve, i64 best_epoch, u64 epochs_seen
///   u64 length, RNG state text
///
/// A tensor table is u32 count followed by, per tensor, u32 name length,
/// name, u32 rank, u64 dims[rank] and the f32 payload.
struct Checkpoint {
  std::string config_json;
  std::vector<NamedTensor> parameters;
  nn::OptimizerState<float> optimizer;
  std::uint64_t epochs_completed = 0;
  nn::EarlyStopState early_stop;
  std::string rng_state;

  RunConfig config() const { return RunConfig::from_json(config_json); }
};

data::Bytes encode_checkpoint(const Checkpoint& ckpt);
/// Throws FormatError on a bad magic, a version mismatch or truncation.
Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes);

/// Atomic write. Throws IOError.
void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

/// Copies parameter values into `model`. Throws FormatError if the names or
/// shapes differ from the model's.
void restore_parameters(model::Model<float>& model, const std::vector<NamedTensor>& params);
std::vector<NamedTensor> snapshot_parameters(const model::Model<float>& model);

}  // namespace lrnet::app
