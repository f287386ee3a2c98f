#include "lrnet/autograd/graph.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

#include "lrnet/core/kernels.hpp"

namespace lrnet {

std::string_view op_name(Op op) {
  switch (op) {
    case Op::input: return "input";
    case Op::parameter: return "parameter";
    case Op::add: return "add";
    case Op::mul: return "mul";
    case Op::scale: return "scale";
    case Op::relu: return "relu";
    case Op::sigmoid: return "sigmoid";
    case Op::softmax: return "softmax";
    case Op::conv2d: return "conv2d";
    case Op::maxpool2d: return "maxpool2d";
    case Op::concat: return "concat";
    case Op::matmul: return "matmul";
    case Op::bias_add: return "bias_add";
    case Op::flatten: return "flatten";
    case Op::sum: return "sum";
    case Op::softmax_cross_entropy: return "softmax_cross_entropy";
    case Op::sigmoid_bce: return "sigmoid_bce";
  }
  return "unknown";
}

namespace {

std::size_t expected_arity(Op op) {
  switch (op) {
    case Op::add:
    case Op::mul:
    case Op::matmul:
    case Op::bias_add: return 2;
    case Op::conv2d: return 3;
    case Op::concat: return 0;  // variadic
    default: return 1;
  }
}

template <typename T>
void check_labels(const BasicTensor<T>& logits, const std::vector<std::int32_t>& labels, std::string_view op) {
  if (logits.rank() != 2) throw ShapeError(std::string(op) + ": logits must be [N,K], got " + shape_to_string(logits.shape()));
  if (labels.size() != logits.dim(0)) {
    throw ShapeError(std::string(op) + ": " + std::to_string(labels.size()) + " labels for batch of " +
                     std::to_string(logits.dim(0)));
  }
  const auto k = static_cast<std::int32_t>(logits.dim(1));
  for (auto l : labels) {
    if (l < 0 || l >= k) throw DataError(std::string(op) + ": label " + std::to_string(l) + " outside [0," + std::to_string(k) + ")");
  }
}

// Row-wise softmax computed with max subtraction.
template <typename T>
BasicTensor<T> softmax_rows(const BasicTensor<T>& z) {
  BasicTensor<T> p(z.shape());
  const std::size_t n = z.dim(0), k = z.dim(1);
  for (std::size_t r = 0; r < n; ++r) {
    const T* zr = z.raw() + r * k;
    T* pr = p.raw() + r * k;
    const T m = *std::max_element(zr, zr + k);
    double total = 0.0;
    for (std::size_t j = 0; j < k; ++j) total += std::exp(static_cast<double>(zr[j] - m));
    for (std::size_t j = 0; j < k; ++j) pr[j] = static_cast<T>(std::exp(static_cast<double>(zr[j] - m)) / total);
  }
  return p;
}

}  // namespace

template <typename T>
const typename Graph<T>::Record& Graph<T>::at(Node n) const {
  if (n.graph != this) throw GraphError("node belongs to a different graph");
  return nodes_.at(n.id);
}

template <typename T>
typename Graph<T>::Node Graph<T>::append(Record r) {
  nodes_.push_back(std::move(r));
  return Node{this, nodes_.size() - 1};
}

template <typename T>
typename Graph<T>::Node Graph<T>::input(TensorT value, std::string label, bool requires_grad) {
  Record r;
  r.op = Op::input;
  r.value = std::move(value);
  r.label = std::move(label);
  r.requires_grad = requires_grad;
  return append(std::move(r));
}

template <typename T>
typename Graph<T>::Node Graph<T>::parameter(Parameter<T>& param) {
  Record r;
  r.op = Op::parameter;
  r.value = param.value;
  r.label = param.name;
  r.param = &param;
  r.requires_grad = param.trainable;
  return append(std::move(r));
}

template <typename T>
typename Graph<T>::Node Graph<T>::record(Op op, std::span<const Node> inputs, OpAttrs attrs, std::string label) {
  for (const auto& n : inputs) {
    if (n.graph != this) throw GraphError(std::string(op_name(op)) + ": input node belongs to a different graph");
    if (n.id >= nodes_.size()) throw GraphError(std::string(op_name(op)) + ": unknown input node");
  }
  if (op == Op::input || op == Op::parameter) throw GraphError("leaves are created with input()/parameter()");
  const std::size_t arity = expected_arity(op);
  if (op == Op::concat ? inputs.size() < 2 : inputs.size() != arity) {
    if (op == Op::concat) throw ShapeError("concat needs at least two inputs");
    throw GraphError(std::string(op_name(op)) + " expects " + std::to_string(arity) + " inputs, got " +
                     std::to_string(inputs.size()));
  }

  Record r;
  r.op = op;
  r.label = std::move(label);
  for (const auto& n : inputs) {
    r.inputs.push_back(n.id);
    r.requires_grad = r.requires_grad || nodes_[n.id].requires_grad;
  }
  auto in = [&](std::size_t i) -> const TensorT& { return nodes_[inputs[i].id].value; };

  switch (op) {
    case Op::add: r.value = kernels::add(in(0), in(1)); break;
    case Op::mul: r.value = kernels::mul(in(0), in(1)); break;
    case Op::scale: r.value = kernels::scale(in(0), static_cast<T>(attrs.scalar)); break;
    case Op::relu: r.value = kernels::relu(in(0)); break;
    case Op::sigmoid: r.value = kernels::sigmoid(in(0)); break;
    case Op::softmax:
      if (in(0).rank() != 2) throw ShapeError("softmax expects [N,K], got " + shape_to_string(in(0).shape()));
      r.value = softmax_rows(in(0));
      break;
    case Op::conv2d: r.value = kernels::conv2d(in(0), in(1), in(2)); break;
    case Op::maxpool2d: {
      auto pooled = kernels::maxpool2d(in(0));
      r.value = std::move(pooled.output);
      r.argmax = std::move(pooled.argmax);
      break;
    }
    case Op::concat: {
      std::vector<const TensorT*> parts;
      for (std::size_t i = 0; i < inputs.size(); ++i) parts.push_back(&in(i));
      r.value = kernels::concat_channels<T>(std::span<const TensorT* const>(parts));
      break;
    }
    case Op::matmul: r.value = kernels::matmul(in(0), in(1)); break;
    case Op::bias_add: r.value = kernels::add_row_bias(in(0), in(1)); break;
    case Op::flatten: {
      const Shape& s = in(0).shape();
      if (s.size() < 2) throw ShapeError("flatten expects rank >= 2, got " + shape_to_string(s));
      r.value = in(0).reshaped(Shape{s[0], shape_size(s) / s[0]});
      break;
    }
    case Op::sum: r.value = kernels::sum(in(0)); break;
    case Op::softmax_cross_entropy: {
      const TensorT& z = in(0);
      check_labels(z, attrs.labels, "softmax_cross_entropy");
      const std::size_t n = z.dim(0), k = z.dim(1);
      r.aux = softmax_rows(z);
      double total = 0.0;
      for (std::size_t row = 0; row < n; ++row) {
        const T* zr = z.raw() + row * k;
        const double m = *std::max_element(zr, zr + k);
        double s = 0.0;
        for (std::size_t j = 0; j < k; ++j) s += std::exp(zr[j] - m);
        total += m + std::log(s) - zr[attrs.labels[row]];
      }
      r.value = TensorT::scalar(static_cast<T>(total / static_cast<double>(n)));
      break;
    }
    case Op::sigmoid_bce: {
      const TensorT& z = in(0);
      check_labels(z, attrs.labels, "sigmoid_bce");
      const std::size_t n = z.dim(0), k = z.dim(1);
      r.aux = kernels::sigmoid(z);
      double total = 0.0;
      for (std::size_t row = 0; row < n; ++row) {
        for (std::size_t j = 0; j < k; ++j) {
          const double x = z.raw()[row * k + j];
          const double y = static_cast<std::int32_t>(j) == attrs.labels[row] ? 1.0 : 0.0;
          total += std::max(x, 0.0) - x * y + std::log1p(std::exp(-std::abs(x)));
        }
      }
      r.value = TensorT::scalar(static_cast<T>(total / static_cast<double>(n * k)));
      break;
    }
    case Op::input:
    case Op::parameter: break;
  }
  if ((op == Op::softmax_cross_entropy || op == Op::sigmoid_bce) && !std::isfinite(r.value[0])) {
    throw NumericError(std::string(op_name(op)) + " produced a non-finite loss");
  }
  r.attrs = std::move(attrs);
  return append(std::move(r));
}

template <typename T>
std::map<std::string, BasicTensor<T>> Graph<T>::backward(Node loss) {
  const Record& root = at(loss);
  if (root.value.size() != 1) {
    throw ShapeError("backward needs a scalar loss, got shape " + shape_to_string(root.value.shape()));
  }

  std::vector<TensorT> grads(loss.id + 1);
  grads[loss.id] = TensorT(root.value.shape(), T(1));

  auto accumulate = [&](std::size_t target, TensorT contribution) {
    if (!nodes_[target].requires_grad) return;
    if (grads[target].empty()) {
      grads[target] = std::move(contribution);
    } else {
      kernels::add_inplace(grads[target], contribution);
    }
  };

  for (std::size_t id = loss.id + 1; id-- > 0;) {
    Record& r = nodes_[id];
    if (r.op == Op::input || r.op == Op::parameter) continue;
    if (grads[id].empty() || !r.requires_grad) {
      grads[id] = TensorT();
      continue;
    }
    const TensorT g = std::move(grads[id]);
    grads[id] = TensorT();
    auto in = [&](std::size_t i) -> const TensorT& { return nodes_[r.inputs[i]].value; };
    auto wants = [&](std::size_t i) { return nodes_[r.inputs[i]].requires_grad; };

    switch (r.op) {
      case Op::add:
        // Both operands may be the same node; the second contribution then
        // adds onto the first in input order.
        accumulate(r.inputs[0], g);
        accumulate(r.inputs[1], g);
        break;
      case Op::mul:
        if (wants(0)) accumulate(r.inputs[0], kernels::mul(g, in(1)));
        if (wants(1)) accumulate(r.inputs[1], kernels::mul(g, in(0)));
        break;
      case Op::scale: accumulate(r.inputs[0], kernels::scale(g, static_cast<T>(r.attrs.scalar))); break;
      case Op::relu: {
        TensorT d = g;
        const T* y = r.value.raw();
        for (std::size_t i = 0; i < d.size(); ++i) {
          if (!(y[i] > T(0))) d[i] = T(0);
        }
        accumulate(r.inputs[0], std::move(d));
        break;
      }
      case Op::sigmoid: {
        TensorT d = g;
        const T* y = r.value.raw();
        for (std::size_t i = 0; i < d.size(); ++i) d[i] *= y[i] * (T(1) - y[i]);
        accumulate(r.inputs[0], std::move(d));
        break;
      }
      case Op::softmax: {
        TensorT d(g.shape());
        const std::size_t n = g.dim(0), k = g.dim(1);
        for (std::size_t row = 0; row < n; ++row) {
          const T* y = r.value.raw() + row * k;
          const T* gr = g.raw() + row * k;
          T dot = T(0);
          for (std::size_t j = 0; j < k; ++j) dot += gr[j] * y[j];
          for (std::size_t j = 0; j < k; ++j) d[row * k + j] = y[j] * (gr[j] - dot);
        }
        accumulate(r.inputs[0], std::move(d));
        break;
      }
      case Op::conv2d: {
        auto cg = kernels::conv2d_backward(in(0), in(1), g, wants(0));
        if (wants(0)) accumulate(r.inputs[0], std::move(cg.input));
        accumulate(r.inputs[1], std::move(cg.kernel));
        accumulate(r.inputs[2], std::move(cg.bias));
        break;
      }
      case Op::maxpool2d:
        accumulate(r.inputs[0], kernels::maxpool2d_backward(g, std::span<const std::size_t>(r.argmax), in(0).shape()));
        break;
      case Op::concat: {
        std::size_t offset = 0;
        for (std::size_t i = 0; i < r.inputs.size(); ++i) {
          const std::size_t c = in(i).dim(3);
          if (wants(i)) accumulate(r.inputs[i], kernels::slice_channels(g, offset, c));
          offset += c;
        }
        break;
      }
      case Op::matmul:
        if (wants(0)) accumulate(r.inputs[0], kernels::matmul_nt(g, in(1)));
        if (wants(1)) accumulate(r.inputs[1], kernels::matmul_tn(in(0), g));
        break;
      case Op::bias_add: {
        accumulate(r.inputs[0], g);
        if (wants(1)) {
          TensorT db(in(1).shape());
          const std::size_t rows = g.dim(0), cols = g.dim(1);
          for (std::size_t row = 0; row < rows; ++row) {
            for (std::size_t c = 0; c < cols; ++c) db[c] += g[row * cols + c];
          }
          accumulate(r.inputs[1], std::move(db));
        }
        break;
      }
      case Op::flatten: accumulate(r.inputs[0], g.reshaped(in(0).shape())); break;
      case Op::sum: accumulate(r.inputs[0], TensorT(in(0).shape(), g.item())); break;
      case Op::softmax_cross_entropy: {
        const std::size_t n = r.aux.dim(0), k = r.aux.dim(1);
        TensorT d = r.aux;
        const T s = g.item() / static_cast<T>(n);
        for (std::size_t row = 0; row < n; ++row) {
          d[row * k + static_cast<std::size_t>(r.attrs.labels[row])] -= T(1);
        }
        for (T& v : d.data()) v *= s;
        accumulate(r.inputs[0], std::move(d));
        break;
      }
      case Op::sigmoid_bce: {
        const std::size_t n = r.aux.dim(0), k = r.aux.dim(1);
        TensorT d = r.aux;
        const T s = g.item() / static_cast<T>(n * k);
        for (std::size_t row = 0; row < n; ++row) {
          d[row * k + static_cast<std::size_t>(r.attrs.labels[row])] -= T(1);
        }
        for (T& v : d.data()) v *= s;
        accumulate(r.inputs[0], std::move(d));
        break;
      }
      case Op::input:
      case Op::parameter: break;
    }
  }

  std::map<std::string, TensorT> result;
  for (std::size_t id = 0; id < nodes_.size(); ++id) {
    Record& r = nodes_[id];
    if (r.op != Op::input && r.op != Op::parameter) continue;
    if (!r.requires_grad) {
      r.grad = TensorT();
      continue;
    }
    r.grad = (id <= loss.id && !grads[id].empty()) ? std::move(grads[id]) : TensorT::zeros(r.value.shape());
    if (r.param != nullptr) {
      auto [it, fresh] = result.try_emplace(r.param->name, r.grad);
      if (!fresh) kernels::add_inplace(it->second, r.grad);
    }
  }
  for (std::size_t id = 0; id < nodes_.size(); ++id) {
    Record& r = nodes_[id];
    if (r.op != Op::parameter || !r.requires_grad) continue;
    Parameter<T>& p = *r.param;
    if (p.grad.empty()) {
      p.grad = r.grad;
    } else {
      kernels::add_inplace(p.grad, r.grad);
    }
  }
  return result;
}

template class Graph<float>;
template class Graph<double>;

namespace ag {

template <typename T>
static BasicNode<T> rec(Op op, std::initializer_list<BasicNode<T>> in, OpAttrs attrs, std::string label) {
  const std::vector<BasicNode<T>> inputs(in);
  if (inputs.front().graph == nullptr) throw GraphError("node is not attached to a graph");
  return inputs.front().graph->record(op, inputs, std::move(attrs), std::move(label));
}

template <typename T>
BasicNode<T> add(BasicNode<T> a, BasicNode<T> b, std::string label) {
  return rec<T>(Op::add, {a, b}, {}, std::move(label));
}
template <typename T>
BasicNode<T> mul(BasicNode<T> a, BasicNode<T> b, std::string label) {
  return rec<T>(Op::mul, {a, b}, {}, std::move(label));
}
template <typename T>
BasicNode<T> scale(BasicNode<T> a, double s, std::string label) {
  OpAttrs attrs;
  attrs.scalar = s;
  return rec<T>(Op::scale, {a}, std::move(attrs), std::move(label));
}
template <typename T>
BasicNode<T> relu(BasicNode<T> a, std::string label) {
  return rec<T>(Op::relu, {a}, {}, std::move(label));
}
template <typename T>
BasicNode<T> sigmoid(BasicNode<T> a, std::string label) {
  return rec<T>(Op::sigmoid, {a}, {}, std::move(label));
}
template <typename T>
BasicNode<T> softmax(BasicNode<T> a, std::string label) {
  return rec<T>(Op::softmax, {a}, {}, std::move(label));
}
template <typename T>
BasicNode<T> conv2d(BasicNode<T> x, BasicNode<T> kernel, BasicNode<T> bias, std::string label) {
  return rec<T>(Op::conv2d, {x, kernel, bias}, {}, std::move(label));
}
template <typename T>
BasicNode<T> maxpool2d(BasicNode<T> x, std::string label) {
  return rec<T>(Op::maxpool2d, {x}, {}, std::move(label));
}
template <typename T>
BasicNode<T> concat(const std::vector<BasicNode<T>>& inputs, std::string label) {
  if (inputs.empty() || inputs.front().graph == nullptr) throw ShapeError("concat needs at least two inputs");
  return inputs.front().graph->record(Op::concat, inputs, {}, std::move(label));
}
template <typename T>
BasicNode<T> matmul(BasicNode<T> a, BasicNode<T> b, std::string label) {
  return rec<T>(Op::matmul, {a, b}, {}, std::move(label));
}
template <typename T>
BasicNode<T> bias_add(BasicNode<T> x, BasicNode<T> bias, std::string label) {
  return rec<T>(Op::bias_add, {x, bias}, {}, std::move(label));
}
template <typename T>
BasicNode<T> flatten(BasicNode<T> x, std::string label) {
  return rec<T>(Op::flatten, {x}, {}, std::move(label));
}
template <typename T>
BasicNode<T> sum(BasicNode<T> x, std::string label) {
  return rec<T>(Op::sum, {x}, {}, std::move(label));
}
template <typename T>
BasicNode<T> softmax_cross_entropy(BasicNode<T> logits, std::vector<std::int32_t> labels, std::string label) {
  OpAttrs attrs;
  attrs.labels = std::move(labels);
  return rec<T>(Op::softmax_cross_entropy, {logits}, std::move(attrs), std::move(label));
}
template <typename T>
BasicNode<T> sigmoid_bce(BasicNode<T> logits, std::vector<std::int32_t> labels, std::string label) {
  OpAttrs attrs;
  attrs.labels = std::move(labels);
  return rec<T>(Op::sigmoid_bce, {logits}, std::move(attrs), std::move(label));
}

#define LRNET_INSTANTIATE(T)                                                                         \
  template BasicNode<T> add<T>(BasicNode<T>, BasicNode<T>, std::string);                            \
  template BasicNode<T> mul<T>(BasicNode<T>, BasicNode<T>, std::string);                            \
  template BasicNode<T> scale<T>(BasicNode<T>, double, std::string);                                \
  template BasicNode<T> relu<T>(BasicNode<T>, std::string);                                         \
  template BasicNode<T> sigmoid<T>(BasicNode<T>, std::string);                                      \
  template BasicNode<T> softmax<T>(BasicNode<T>, std::string);                                      \
  template BasicNode<T> conv2d<T>(BasicNode<T>, BasicNode<T>, BasicNode<T>, std::string);           \
  template BasicNode<T> maxpool2d<T>(BasicNode<T>, std::string);                                    \
  template BasicNode<T> concat<T>(const std::vector<BasicNode<T>>&, std::string);                   \
  template BasicNode<T> matmul<T>(BasicNode<T>, BasicNode<T>, std::string);                         \
  template BasicNode<T> bias_add<T>(BasicNode<T>, BasicNode<T>, std::string);                       \
  template BasicNode<T> flatten<T>(BasicNode<T>, std::string);                                      \
  template BasicNode<T> sum<T>(BasicNode<T>, std::string);                                          \
  template BasicNode<T> softmax_cross_entropy<T>(BasicNode<T>, std::vector<std::int32_t>, std::string); \
  template BasicNode<T> sigmoid_bce<T>(BasicNode<T>, std::vector<std::int32_t>, std::string);

LRNET_INSTANTIATE(float)
LRNET_INSTANTIATE(double)

#undef LRNET_INSTANTIATE

}  // namespace ag
}  // namespace lrnet
