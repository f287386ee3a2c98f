#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "lrnet/autograd/graph.hpp"
#include "lrnet/nn/nn.hpp"

namespace lrnet::model {

/// Filter budget of one multi-kernel block: channels of the 3x3, 5x5 and 7x7
/// paths and of the 1x1 fusion output.
struct BlockSpec {
  std::size_t f3 = 48;
  std::size_t f5 = 32;
  std::size_t f7 = 16;
  std::size_t f_out = 64;

  /// Requires all counts positive and f3 > f5 >= f7. Throws ConfigError.
  void validate() const;
  friend bool operator==(const BlockSpec&, const BlockSpec&) = default;
};

struct ModelSpec {
  std::vector<BlockSpec> blocks{BlockSpec{}, BlockSpec{}, BlockSpec{}};
  std::vector<std::size_t> dense_widths{256};
  std::size_t num_classes = 10;
  std::size_t input_size = 35;
  std::size_t input_channels = 1;
  nn::OutputActivation output_activation = nn::OutputActivation::softmax;

  /// Exactly three valid blocks, positive widths, and an input that stays
  /// at least 7 pixels wide on entry to every block. Throws ConfigError.
  void validate() const;

  /// Spatial extent on entry to each block followed by the final extent,
  /// e.g. {35, 17, 8, 4}.
  std::vector<std::size_t> spatial_trace() const;
  std::size_t flatten_width() const;
  friend bool operator==(const ModelSpec&, const ModelSpec&) = default;
};

/// Smallest spatial extent a block accepts (the 7x7 kernel must fit).
inline constexpr std::size_t kMinBlockExtent = 7;

/// Output extent of the 2x2 stride-2 floor-mode pool.
inline constexpr std::size_t pooled_extent(std::size_t s) { return (s - 2) / 2 + 1; }

struct ConvRef {
  std::size_t kernel = 0;  // indices into the owning parameter vector
  std::size_t bias = 0;
};

/// Multi-kernel block. Given input x:
///
///   A  = relu(conv3x3(x))        B = relu(conv5x5(x))        C = relu(conv7x7(x))
///   T  = concat(A, B, C)
///   R  = relu(conv5x5(concat(B, C)))
///   L1 = relu(conv3x3(concat(A, B)))
///   L2 = relu(conv3x3(L1))
///   Y  = relu(conv1x1(concat(T, R, L2)) + P(x))
///   out = maxpool2x2(Y)
///
/// P is the identity when Cin == f_out, otherwise a 1x1 projection. No concat
/// joins A and C without B.
template <typename T>
class MKBlock {
 public:
  /// Creates the block's parameters (prefixed `name.`) at the end of `params`.
  MKBlock(std::string name, std::size_t in_channels, const BlockSpec& spec, std::vector<Parameter<T>>& params,
          std::mt19937_64& rng);

  BasicNode<T> forward(BasicNode<T> x, std::vector<Parameter<T>>& params) const;

  const std::string& name() const { return name_; }
  const BlockSpec& spec() const { return spec_; }
  std::size_t in_channels() const { return in_channels_; }
  bool has_projection() const { return projection_.has_value(); }

 private:
  std::string name_;
  std::size_t in_channels_;
  BlockSpec spec_;
  ConvRef a_, b_, c_, right_, left1_, left2_, fuse_;
  std::optional<ConvRef> projection_;
};

/// Parameters plus output of a standalone block.
template <typename T>
struct BlockBuild {
  std::vector<Parameter<T>> params;
  BasicNode<T> output;
};

/// Builds one block on `x` with freshly initialized parameters. Throws
/// ShapeError when x is smaller than 7x7.
template <typename T>
BlockBuild<T> build_block(BasicNode<T> x, const BlockSpec& spec, std::mt19937_64& rng,
                          const std::string& name = "block");

/// Three stacked blocks, flatten, Dense+ReLU for each hidden width, and a
/// final Dense producing logits.
template <typename T>
class Model {
 public:
  Model(ModelSpec spec, std::mt19937_64& rng);
  Model(ModelSpec spec, std::uint64_t seed);

  Model(const Model&) = delete;
  Model& operator=(const Model&) = delete;

  /// Records the forward pass of images [N,H,W,C] and returns logits [N,K].
  BasicNode<T> forward(BasicNode<T> images);

  std::span<Parameter<T>> parameters() { return params_; }
  std::span<const Parameter<T>> parameters() const { return params_; }
  Parameter<T>* find(const std::string& name);

  const ModelSpec& spec() const { return spec_; }
  const std::vector<MKBlock<T>>& blocks() const { return blocks_; }

 private:
  void init(std::mt19937_64& rng);

  ModelSpec spec_;
  std::vector<Parameter<T>> params_;
  std::vector<MKBlock<T>> blocks_;
  std::vector<ConvRef> dense_;
};

/// Total element count of all trainable parameters.
template <typename T>
std::size_t count_parameters(const Model<T>& model);

struct LayerReport {
  std::size_t node = 0;
  std::string name;
  std::string kind;
  Shape output_shape;
  std::size_t parameters = 0;
  std::vector<std::string> inputs;
};

struct TopologyReport {
  std::vector<LayerReport> layers;
  std::size_t total_parameters = 0;
  std::size_t blocks = 0;

  std::string to_text() const;
  std::string to_json() const;
};

/// Traces a batch-1 forward pass and lists every recorded operation in
/// topological order with its output shape and owned parameter count.
template <typename T>
TopologyReport describe(Model<T>& model);

}  // namespace lrnet::model
