#pragma once

// Independent reference implementations used as test oracles. Nothing here
// calls into the kernels under test.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <vector>

#include "lrnet/autograd/graph.hpp"
#include "lrnet/core/tensor.hpp"

namespace lrnet::testing {

template <typename T>
BasicTensor<T> random_tensor(Shape shape, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  BasicTensor<T> t(std::move(shape));
  for (auto& v : t.data()) v = static_cast<T>(u(rng));
  return t;
}

/// Direct sliding-window SAME convolution: acc over dy -> dx -> i from zero,
/// skipping out-of-range taps, then plus bias.
template <typename T>
BasicTensor<T> direct_conv2d(const BasicTensor<T>& in, const BasicTensor<T>& ker, const BasicTensor<T>& bias) {
  const std::size_t N = in.dim(0), H = in.dim(1), W = in.dim(2), C = in.dim(3);
  const std::size_t k = ker.dim(0), O = ker.dim(3);
  const long p = static_cast<long>(k / 2);
  BasicTensor<T> out(Shape{N, H, W, O});
  for (std::size_t n = 0; n < N; ++n)
    for (std::size_t y = 0; y < H; ++y)
      for (std::size_t x = 0; x < W; ++x)
        for (std::size_t o = 0; o < O; ++o) {
          T acc = T(0);
          for (std::size_t dy = 0; dy < k; ++dy)
            for (std::size_t dx = 0; dx < k; ++dx)
              for (std::size_t i = 0; i < C; ++i) {
                const long sy = static_cast<long>(y + dy) - p;
                const long sx = static_cast<long>(x + dx) - p;
                if (sy < 0 || sx < 0 || sy >= static_cast<long>(H) || sx >= static_cast<long>(W)) continue;
                acc += in.at(n, static_cast<std::size_t>(sy), static_cast<std::size_t>(sx), i) *
                       ker[((dy * k + dx) * C + i) * O + o];
              }
          out.at(n, y, x, o) = acc + bias[o];
        }
  return out;
}

template <typename T>
BasicTensor<T> naive_matmul(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  const std::size_t M = a.dim(0), K = a.dim(1), P = b.dim(1);
  BasicTensor<T> out(Shape{M, P});
  for (std::size_t i = 0; i < M; ++i)
    for (std::size_t j = 0; j < P; ++j) {
      T acc = T(0);
      for (std::size_t k = 0; k < K; ++k) acc += a[i * K + k] * b[k * P + j];
      out[i * P + j] = acc;
    }
  return out;
}

/// Scalar bilinear resize with half-pixel centers and clamped coordinates.
inline std::vector<double> bilinear_reference(const std::vector<double>& src, int in_h, int in_w, int out_h, int out_w) {
  std::vector<double> out(static_cast<std::size_t>(out_h * out_w));
  for (int oy = 0; oy < out_h; ++oy) {
    for (int ox = 0; ox < out_w; ++ox) {
      double sy = (oy + 0.5) * (static_cast<double>(in_h) / out_h) - 0.5;
      double sx = (ox + 0.5) * (static_cast<double>(in_w) / out_w) - 0.5;
      sy = std::min(std::max(sy, 0.0), static_cast<double>(in_h - 1));
      sx = std::min(std::max(sx, 0.0), static_cast<double>(in_w - 1));
      const int y0 = static_cast<int>(std::floor(sy));
      const int x0 = static_cast<int>(std::floor(sx));
      const int y1 = std::min(y0 + 1, in_h - 1);
      const int x1 = std::min(x0 + 1, in_w - 1);
      const double fy = sy - y0, fx = sx - x0;
      auto at = [&](int y, int x) { return src[static_cast<std::size_t>(y * in_w + x)]; };
      const double top = at(y0, x0) * (1 - fx) + at(y0, x1) * fx;
      const double bot = at(y1, x0) * (1 - fx) + at(y1, x1) * fx;
      out[static_cast<std::size_t>(oy * out_w + ox)] = top * (1 - fy) + bot * fy;
    }
  }
  return out;
}

/// Piecewise-linear state of a recorded graph: ReLU input signs and max-pool
/// winners. Finite differences are only meaningful when it is unchanged.
inline std::vector<std::size_t> activation_pattern(const Graph<double>& g) {
  std::vector<std::size_t> pattern;
  for (std::size_t id = 0; id < g.size(); ++id) {
    const auto& r = g.record_at(id);
    if (r.op == Op::relu) {
      for (double v : g.record_at(r.inputs[0]).value.data()) pattern.push_back(v > 0.0 ? 1 : 0);
    } else if (r.op == Op::maxpool2d) {
      pattern.insert(pattern.end(), r.argmax.begin(), r.argmax.end());
    }
  }
  return pattern;
}

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
  std::size_t skipped_kinks = 0;
};

/// Builds the loss graph from leaves bound to `tensors`.
using LossBuilder = std::function<Node64(Graph<double>&, const std::vector<Node64>&)>;

/// Compares backward() against central differences (f(x+eps) - f(x-eps)) / 2eps
/// for every coordinate of every tensor. Coordinates whose perturbation
/// changes the activation pattern sit on a kink and are counted, not checked.
inline GradCheckResult gradcheck(std::vector<Tensor64> tensors, const LossBuilder& build, double eps = 1e-4) {
  auto evaluate = [&](const std::vector<Tensor64>& ts, std::vector<std::size_t>* pattern) {
    Graph<double> g;
    std::vector<Node64> leaves;
    for (const auto& t : ts) leaves.push_back(g.input(t, {}, true));
    Node64 loss = build(g, leaves);
    if (pattern) *pattern = activation_pattern(g);
    return loss.value().item();
  };

  Graph<double> g;
  std::vector<Node64> leaves;
  for (const auto& t : tensors) leaves.push_back(g.input(t, {}, true));
  Node64 loss = build(g, leaves);
  g.backward(loss);
  const auto base_pattern = activation_pattern(g);

  GradCheckResult result;
  for (std::size_t ti = 0; ti < tensors.size(); ++ti) {
    const Tensor64 analytic = g.grad(leaves[ti]);
    for (std::size_t j = 0; j < tensors[ti].size(); ++j) {
      const double saved = tensors[ti][j];
      std::vector<std::size_t> plus_pattern, minus_pattern;
      tensors[ti][j] = saved + eps;
      const double plus = evaluate(tensors, &plus_pattern);
      tensors[ti][j] = saved - eps;
      const double minus = evaluate(tensors, &minus_pattern);
      tensors[ti][j] = saved;
      if (plus_pattern != base_pattern || minus_pattern != base_pattern) {
        ++result.skipped_kinks;
        continue;
      }
      const double numeric = (plus - minus) / (2.0 * eps);
      const double a = analytic[j];
      const double denom = std::max({std::abs(a), std::abs(numeric), 1e-6});
      result.max_rel_error = std::max(result.max_rel_error, std::abs(a - numeric) / denom);
      ++result.checked;
    }
  }
  return result;
}

/// Builds the loss graph over a parameter set; parameters enter through
/// Graph::parameter.
using ParamLossBuilder = std::function<Node64(Graph<double>&, std::vector<Parameter<double>>&)>;

/// gradcheck() over named parameters instead of raw leaves. Checks at most
/// `max_per_tensor` evenly spaced coordinates of each parameter.
inline GradCheckResult gradcheck_params(std::vector<Parameter<double>>& params, const ParamLossBuilder& build,
                                        std::size_t max_per_tensor = 0, double eps = 1e-4) {
  auto evaluate = [&](std::vector<std::size_t>* pattern) {
    Graph<double> g;
    Node64 loss = build(g, params);
    if (pattern) *pattern = activation_pattern(g);
    return loss.value().item();
  };

  for (auto& p : params) p.grad = Tensor64();
  Graph<double> g;
  Node64 loss = build(g, params);
  const auto analytic = g.backward(loss);
  const auto base_pattern = activation_pattern(g);

  GradCheckResult result;
  for (auto& p : params) {
    const Tensor64& grad = analytic.at(p.name);
    const std::size_t n = p.value.size();
    const std::size_t stride = (max_per_tensor == 0 || n <= max_per_tensor) ? 1 : n / max_per_tensor;
    for (std::size_t j = 0; j < n; j += stride) {
      const double saved = p.value[j];
      std::vector<std::size_t> plus_pattern, minus_pattern;
      p.value[j] = saved + eps;
      const double plus = evaluate(&plus_pattern);
      p.value[j] = saved - eps;
      const double minus = evaluate(&minus_pattern);
      p.value[j] = saved;
      if (plus_pattern != base_pattern || minus_pattern != base_pattern) {
        ++result.skipped_kinks;
        continue;
      }
      const double numeric = (plus - minus) / (2.0 * eps);
      const double denom = std::max({std::abs(grad[j]), std::abs(numeric), 1e-6});
      result.max_rel_error = std::max(result.max_rel_error, std::abs(grad[j] - numeric) / denom);
      ++result.checked;
    }
  }
  return result;
}

}  // namespace lrnet::testing
