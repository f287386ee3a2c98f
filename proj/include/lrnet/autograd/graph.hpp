#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "lrnet/core/tensor.hpp"

namespace lrnet {

/// Operation tag of a recorded node.
enum class Op {
  input,
  parameter,
  add,
  mul,
  scale,
  relu,
  sigmoid,
  softmax,
  conv2d,
  maxpool2d,
  concat,
  matmul,
  bias_add,
  flatten,
  sum,
  softmax_cross_entropy,
  sigmoid_bce,
};

std::string_view op_name(Op op);

/// A named trainable tensor that outlives individual graphs. `grad` stays
/// empty until the first backward or zero_grads call touches it.
template <typename T>
struct Parameter {
  std::string name;
  BasicTensor<T> value;
  BasicTensor<T> grad;
  bool trainable = true;
};

/// Zeroes (materializing if absent) the gradient of every parameter.
template <typename T>
void zero_grads(std::span<Parameter<T>> params) {
  for (auto& p : params) p.grad = BasicTensor<T>::zeros(p.value.shape());
}

template <typename T>
class Graph;

/// Handle to a node inside one Graph.
template <typename T>
struct BasicNode {
  Graph<T>* graph = nullptr;
  std::size_t id = 0;

  const BasicTensor<T>& value() const;
  const Shape& shape() const { return value().shape(); }
};

/// Non-tensor arguments of an operation.
struct OpAttrs {
  double scalar = 0.0;              // scale factor
  std::vector<std::int32_t> labels;  // loss targets
};

/// Reverse-mode tape. Nodes are appended in topological order; a graph is
/// built for one forward pass and discarded afterwards.
template <typename T>
class Graph {
 public:
  using TensorT = BasicTensor<T>;
  using Node = BasicNode<T>;

  struct Record {
    Op op = Op::input;
    std::vector<std::size_t> inputs;
    TensorT value;
    TensorT grad;  // leaves only, filled by backward()
    OpAttrs attrs;
    std::string label;
    Parameter<T>* param = nullptr;
    bool requires_grad = false;
    std::vector<std::size_t> argmax;  // maxpool2d winners
    TensorT aux;                      // loss probabilities
  };

  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  /// Constant leaf. Set `requires_grad` to read its gradient after backward.
  Node input(TensorT value, std::string label = {}, bool requires_grad = false);

  /// Leaf bound to `param`; its value is captured at record time.
  Node parameter(Parameter<T>& param);

  /// Evaluates `op` on `inputs` and appends the node.
  /// Throws GraphError if any input belongs to a different graph.
  Node record(Op op, std::span<const Node> inputs, OpAttrs attrs = {}, std::string label = {});

  /// Gradients of a scalar `loss` with respect to every parameter leaf,
  /// keyed by parameter name. Also adds them into each Parameter::grad.
  /// Leaf gradients stay readable through grad(). The tape itself is not
  /// modified, so calling backward twice yields identical results.
  std::map<std::string, TensorT> backward(Node loss);

  const TensorT& value(Node n) const { return at(n).value; }
  /// Gradient of a leaf from the last backward call.
  const TensorT& grad(Node n) const { return at(n).grad; }

  std::size_t size() const noexcept { return nodes_.size(); }
  const Record& record_at(std::size_t id) const { return nodes_.at(id); }
  Node node(std::size_t id) { return Node{this, id}; }

 private:
  const Record& at(Node n) const;
  Node append(Record r);

  std::vector<Record> nodes_;
};

template <typename T>
const BasicTensor<T>& BasicNode<T>::value() const {
  return graph->value(*this);
}

using Node = BasicNode<float>;
using Node64 = BasicNode<double>;

// Convenience wrappers over Graph::record. Labels name the node in
// topology reports.
namespace ag {

template <typename T>
BasicNode<T> add(BasicNode<T> a, BasicNode<T> b, std::string label = {});
template <typename T>
BasicNode<T> mul(BasicNode<T> a, BasicNode<T> b, std::string label = {});
template <typename T>
BasicNode<T> scale(BasicNode<T> a, double s, std::string label = {});
template <typename T>
BasicNode<T> relu(BasicNode<T> a, std::string label = {});
template <typename T>
BasicNode<T> sigmoid(BasicNode<T> a, std::string label = {});
/// Row-wise softmax of a rank-2 tensor.
template <typename T>
BasicNode<T> softmax(BasicNode<T> a, std::string label = {});
template <typename T>
BasicNode<T> conv2d(BasicNode<T> x, BasicNode<T> kernel, BasicNode<T> bias, std::string label = {});
template <typename T>
BasicNode<T> maxpool2d(BasicNode<T> x, std::string label = {});
template <typename T>
BasicNode<T> concat(const std::vector<BasicNode<T>>& inputs, std::string label = {});
template <typename T>
BasicNode<T> matmul(BasicNode<T> a, BasicNode<T> b, std::string label = {});
template <typename T>
BasicNode<T> bias_add(BasicNode<T> x, BasicNode<T> bias, std::string label = {});
/// [N,...] -> [N, prod(rest)].
template <typename T>
BasicNode<T> flatten(BasicNode<T> x, std::string label = {});
template <typename T>
BasicNode<T> sum(BasicNode<T> x, std::string label = {});
/// Mean over the batch of -log softmax(logits)[label].
template <typename T>
BasicNode<T> softmax_cross_entropy(BasicNode<T> logits, std::vector<std::int32_t> labels, std::string label = {});
/// Mean over batch and classes of binary cross-entropy between
/// sigmoid(logits) and one-hot targets.
template <typename T>
BasicNode<T> sigmoid_bce(BasicNode<T> logits, std::vector<std::int32_t> labels, std::string label = {});

}  // namespace ag
}  // namespace lrnet
