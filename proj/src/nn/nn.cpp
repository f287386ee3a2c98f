#include "lrnet/nn/nn.hpp"

#include <cmath>

#include "lrnet/core/kernels.hpp"

namespace lrnet::nn {

std::string_view layer_kind_name(LayerKind kind) {
  switch (kind) {
    case LayerKind::conv2d: return "conv2d";
    case LayerKind::dense: return "dense";
    case LayerKind::relu: return "relu";
    case LayerKind::sigmoid: return "sigmoid";
    case LayerKind::softmax: return "softmax";
    case LayerKind::maxpool: return "maxpool";
    case LayerKind::concat: return "concat";
    case LayerKind::residual_add: return "residual_add";
    case LayerKind::flatten: return "flatten";
  }
  return "unknown";
}

void LayerSpec::validate() const {
  if (kind == LayerKind::conv2d) {
    if (kernel != 1 && kernel != 3 && kernel != 5 && kernel != 7) {
      throw ConfigError("conv kernel must be one of 1,3,5,7, got " + std::to_string(kernel));
    }
  }
  if (kind == LayerKind::conv2d || kind == LayerKind::dense) {
    if (in == 0 || out == 0) throw ConfigError(std::string(layer_kind_name(kind)) + " extents must be positive");
  }
}

std::size_t LayerSpec::parameter_count() const {
  switch (kind) {
    case LayerKind::conv2d: return kernel * kernel * in * out + out;
    case LayerKind::dense: return in * out + out;
    default: return 0;
  }
}

template <typename T>
std::vector<Parameter<T>> init_parameters(const LayerSpec& spec, const std::string& name, std::mt19937_64& rng) {
  spec.validate();
  Shape weight_shape;
  std::string weight_name;
  std::size_t fan_in = 0;
  if (spec.kind == LayerKind::conv2d) {
    weight_shape = {spec.kernel, spec.kernel, spec.in, spec.out};
    weight_name = name + ".kernel";
    fan_in = spec.kernel * spec.kernel * spec.in;
  } else if (spec.kind == LayerKind::dense) {
    weight_shape = {spec.in, spec.out};
    weight_name = name + ".weight";
    fan_in = spec.in;
  } else {
    return {};
  }
  std::normal_distribution<double> normal(0.0, std::sqrt(2.0 / static_cast<double>(fan_in)));
  BasicTensor<T> weight(weight_shape);
  for (T& w : weight.data()) w = static_cast<T>(normal(rng));
  std::vector<Parameter<T>> params;
  params.push_back({weight_name, std::move(weight), {}, true});
  params.push_back({name + ".bias", BasicTensor<T>::zeros(Shape{spec.out}), {}, true});
  return params;
}

template <typename T>
BasicNode<T> residual_add(BasicNode<T> branch, BasicNode<T> skip, std::optional<Projection<T>> projection,
                          const std::string& label) {
  const Shape4 b = Shape4::of(branch.shape());
  const Shape4 s = Shape4::of(skip.shape());
  if (b.n != s.n || b.h != s.h || b.w != s.w) {
    throw ShapeError("residual_add: spatial mismatch " + shape_to_string(branch.shape()) + " vs " +
                     shape_to_string(skip.shape()));
  }
  if (projection) {
    skip = ag::conv2d(skip, projection->kernel, projection->bias, label.empty() ? label : label + ".proj");
  } else if (b.c != s.c) {
    throw ShapeError("residual_add: channels " + std::to_string(s.c) + " -> " + std::to_string(b.c) +
                     " need a projection");
  }
  return ag::add(branch, skip, label);
}

std::string_view output_activation_name(OutputActivation a) {
  return a == OutputActivation::softmax ? "softmax" : "sigmoid";
}

OutputActivation parse_output_activation(std::string_view name) {
  if (name == "softmax") return OutputActivation::softmax;
  if (name == "sigmoid") return OutputActivation::sigmoid;
  throw ConfigError("output_activation must be softmax or sigmoid, got '" + std::string(name) + "'");
}

template <typename T>
BasicNode<T> classification_loss(BasicNode<T> logits, std::vector<std::int32_t> labels, OutputActivation activation) {
  if (activation == OutputActivation::softmax) return ag::softmax_cross_entropy(logits, std::move(labels), "loss");
  return ag::sigmoid_bce(logits, std::move(labels), "loss");
}

template <typename T>
BasicTensor<T> output_probabilities(const BasicTensor<T>& logits, OutputActivation activation) {
  if (logits.rank() != 2) throw ShapeError("logits must be [N,K], got " + shape_to_string(logits.shape()));
  if (activation == OutputActivation::sigmoid) return kernels::sigmoid(logits);
  BasicTensor<T> p(logits.shape());
  const std::size_t n = logits.dim(0), k = logits.dim(1);
  for (std::size_t r = 0; r < n; ++r) {
    const T* z = logits.raw() + r * k;
    T m = z[0];
    for (std::size_t j = 1; j < k; ++j) m = std::max(m, z[j]);
    double total = 0.0;
    for (std::size_t j = 0; j < k; ++j) total += std::exp(static_cast<double>(z[j] - m));
    for (std::size_t j = 0; j < k; ++j) p[r * k + j] = static_cast<T>(std::exp(static_cast<double>(z[j] - m)) / total);
  }
  return p;
}

template <typename T>
std::vector<std::int32_t> argmax_rows(const BasicTensor<T>& scores) {
  if (scores.rank() != 2) throw ShapeError("argmax_rows expects [N,K]");
  const std::size_t n = scores.dim(0), k = scores.dim(1);
  std::vector<std::int32_t> out(n);
  for (std::size_t r = 0; r < n; ++r) {
    const T* s = scores.raw() + r * k;
    std::size_t best = 0;
    for (std::size_t j = 1; j < k; ++j) {
      if (s[j] > s[best]) best = j;
    }
    out[r] = static_cast<std::int32_t>(best);
  }
  return out;
}

std::string_view optimizer_name(OptimizerKind kind) { return kind == OptimizerKind::sgd ? "sgd" : "adam"; }

OptimizerKind parse_optimizer(std::string_view name) {
  if (name == "sgd") return OptimizerKind::sgd;
  if (name == "adam") return OptimizerKind::adam;
  throw ConfigError("optimizer must be sgd or adam, got '" + std::string(name) + "'");
}

template <typename T>
void optimizer_step(OptimizerState<T>& state, std::span<Parameter<T>> params) {
  for (const auto& p : params) {
    if (p.trainable && (p.grad.empty() || p.grad.shape() != p.value.shape())) {
      throw GraphError("optimizer_step: missing gradient for parameter " + p.name);
    }
  }
  ++state.step;
  if (state.kind == OptimizerKind::sgd) {
    for (auto& p : params) {
      if (!p.trainable) continue;
      T* w = p.value.raw();
      const T* g = p.grad.raw();
      for (std::size_t i = 0; i < p.value.size(); ++i) w[i] = static_cast<T>(w[i] - state.lr * g[i]);
    }
    return;
  }
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(state.beta1, t);
  const double correction2 = 1.0 - std::pow(state.beta2, t);
  for (auto& p : params) {
    if (!p.trainable) continue;
    auto& m = state.m[p.name];
    auto& v = state.v[p.name];
    if (m.empty()) m = BasicTensor<T>::zeros(p.value.shape());
    if (v.empty()) v = BasicTensor<T>::zeros(p.value.shape());
    T* w = p.value.raw();
    T* mm = m.raw();
    T* vv = v.raw();
    const T* g = p.grad.raw();
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      const double gi = g[i];
      const double mi = state.beta1 * mm[i] + (1.0 - state.beta1) * gi;
      const double vi = state.beta2 * vv[i] + (1.0 - state.beta2) * gi * gi;
      mm[i] = static_cast<T>(mi);
      vv[i] = static_cast<T>(vi);
      const double m_hat = mi / correction1;
      const double v_hat = vi / correction2;
      w[i] = static_cast<T>(w[i] - state.lr * m_hat / (std::sqrt(v_hat) + state.eps));
    }
  }
}

EarlyStopDecision early_stop_update(EarlyStopState& state, double val_loss) {
  if (!std::isfinite(val_loss)) throw NumericError("early stopping received a non-finite validation loss");
  const auto epoch = static_cast<std::int64_t>(state.epochs_seen);
  ++state.epochs_seen;
  if (val_loss < state.best_val_loss) {
    state.best_val_loss = val_loss;
    state.best_epoch = epoch;
    state.epochs_since_improve = 0;
  } else {
    ++state.epochs_since_improve;
  }
  return state.epochs_since_improve >= state.patience ? EarlyStopDecision::stop : EarlyStopDecision::proceed;
}

#define LRNET_INSTANTIATE(T)                                                                                   \
  template std::vector<Parameter<T>> init_parameters<T>(const LayerSpec&, const std::string&, std::mt19937_64&); \
  template BasicNode<T> residual_add<T>(BasicNode<T>, BasicNode<T>, std::optional<Projection<T>>,             \
                                        const std::string&);                                                  \
  template BasicNode<T> classification_loss<T>(BasicNode<T>, std::vector<std::int32_t>, OutputActivation);   \
  template BasicTensor<T> output_probabilities<T>(const BasicTensor<T>&, OutputActivation);                  \
  template std::vector<std::int32_t> argmax_rows<T>(const BasicTensor<T>&);                                  \
  template void optimizer_step<T>(OptimizerState<T>&, std::span<Parameter<T>>);

LRNET_INSTANTIATE(float)
LRNET_INSTANTIATE(double)

#undef LRNET_INSTANTIATE

}  // namespace lrnet::nn
