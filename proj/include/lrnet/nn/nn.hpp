#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "lrnet/autograd/graph.hpp"

namespace lrnet::nn {

enum class LayerKind { conv2d, dense, relu, sigmoid, softmax, maxpool, concat, residual_add, flatten };

std::string_view layer_kind_name(LayerKind kind);

/// One layer of a network description. `in`/`out` are channels for conv2d
/// and features for dense; other kinds carry no parameters.
struct LayerSpec {
  LayerKind kind = LayerKind::relu;
  std::size_t kernel = 0;
  std::size_t in = 0;
  std::size_t out = 0;

  static LayerSpec conv(std::size_t kernel, std::size_t in_channels, std::size_t out_channels) {
    return {LayerKind::conv2d, kernel, in_channels, out_channels};
  }
  static LayerSpec dense(std::size_t in_features, std::size_t out_features) {
    return {LayerKind::dense, 0, in_features, out_features};
  }

  /// Throws ConfigError for conv kernels outside {1,3,5,7} or zero extents.
  void validate() const;

  /// k*k*Cin*Cout + Cout for conv, in*out + out for dense, 0 otherwise.
  std::size_t parameter_count() const;
};

/// He-normal weights (std = sqrt(2 / fan_in)) and zero biases, named
/// `<name>.kernel`/`<name>.bias` (conv) or `<name>.weight`/`<name>.bias` (dense).
template <typename T>
std::vector<Parameter<T>> init_parameters(const LayerSpec& spec, const std::string& name, std::mt19937_64& rng);

/// 1x1 projection applied to the skip path of a residual connection.
template <typename T>
struct Projection {
  BasicNode<T> kernel;
  BasicNode<T> bias;
};

/// branch + skip, or branch + conv1x1(skip) when a projection is given.
/// Throws ShapeError on spatial mismatch, or when the channel counts differ
/// and no projection is supplied.
template <typename T>
BasicNode<T> residual_add(BasicNode<T> branch, BasicNode<T> skip, std::optional<Projection<T>> projection,
                          const std::string& label = {});

enum class OutputActivation { softmax, sigmoid };

std::string_view output_activation_name(OutputActivation a);
/// Throws ConfigError for anything but "softmax" / "sigmoid".
OutputActivation parse_output_activation(std::string_view name);

/// Training loss for the chosen output head: softmax cross-entropy or
/// per-class sigmoid binary cross-entropy.
template <typename T>
BasicNode<T> classification_loss(BasicNode<T> logits, std::vector<std::int32_t> labels, OutputActivation activation);

/// Applies the output activation row-wise to logits [N,K].
template <typename T>
BasicTensor<T> output_probabilities(const BasicTensor<T>& logits, OutputActivation activation);

/// Index of the largest value per row; ties go to the lowest index.
template <typename T>
std::vector<std::int32_t> argmax_rows(const BasicTensor<T>& scores);

enum class OptimizerKind { sgd, adam };

std::string_view optimizer_name(OptimizerKind kind);
OptimizerKind parse_optimizer(std::string_view name);

template <typename T>
struct OptimizerState {
  OptimizerKind kind = OptimizerKind::adam;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::uint64_t step = 0;
  /// Adam moments keyed by parameter name.
  std::map<std::string, BasicTensor<T>> m;
  std::map<std::string, BasicTensor<T>> v;
};

/// Applies one update to every trainable parameter from its grad and
/// increments `state.step`. Throws GraphError if a trainable parameter has
/// no gradient.
template <typename T>
void optimizer_step(OptimizerState<T>& state, std::span<Parameter<T>> params);

struct EarlyStopState {
  std::size_t patience = 30;
  double best_val_loss = std::numeric_limits<double>::infinity();
  std::size_t epochs_since_improve = 0;
  std::int64_t best_epoch = -1;
  std::size_t epochs_seen = 0;
};

enum class EarlyStopDecision { proceed, stop };

/// Records one epoch's validation loss. Only a strict improvement resets the
/// counter; stop is returned once the counter reaches `patience`.
/// Throws NumericError for a non-finite loss.
EarlyStopDecision early_stop_update(EarlyStopState& state, double val_loss);

}  // namespace lrnet::nn
