#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include "lrnet/core/tensor.hpp"

// Numerical kernels over BasicTensor. All functions are pure: inputs are
// never modified, and every reduction runs in a fixed order so repeated calls
// produce bit-identical results.
//
// Image tensors are N,H,W,C. Convolution kernels are [k,k,Cin,Cout].
namespace lrnet::kernels {

/// Stride-1 SAME-padded convolution for odd k.
///
/// out[n,y,x,o] = bias[o] + sum over (dy,dx,i) of
///                in[n, y+dy-k/2, x+dx-k/2, i] * ker[dy,dx,i,o]
///
/// Out-of-range input reads as zero. The sum runs dy -> dx -> i. In double
/// precision the result is bit-identical to evaluating that sum directly; the
/// float path goes through a BLAS product and agrees to ~1e-6 relative.
template <typename T>
BasicTensor<T> conv2d(const BasicTensor<T>& input, const BasicTensor<T>& kernel,
                      const BasicTensor<T>& bias);

template <typename T>
struct Conv2dGrads {
  BasicTensor<T> input;  // empty when not requested
  BasicTensor<T> kernel;
  BasicTensor<T> bias;
};

template <typename T>
Conv2dGrads<T> conv2d_backward(const BasicTensor<T>& input, const BasicTensor<T>& kernel,
                               const BasicTensor<T>& grad_out, bool want_input_grad = true);

template <typename T>
struct PoolResult {
  BasicTensor<T> output;
  /// Flat input index of the winning element for every output element.
  std::vector<std::size_t> argmax;
};

/// 2x2 max pool, stride 2, floor mode. Ties resolve to the first element in
/// row-major window order.
template <typename T>
PoolResult<T> maxpool2d(const BasicTensor<T>& input);

template <typename T>
BasicTensor<T> maxpool2d_backward(const BasicTensor<T>& grad_out,
                                  std::span<const std::size_t> argmax, const Shape& input_shape);

/// Stacks channels in argument order. Needs at least two inputs.
template <typename T>
BasicTensor<T> concat_channels(std::span<const BasicTensor<T>* const> inputs);

template <typename T>
BasicTensor<T> concat_channels(const std::vector<BasicTensor<T>>& inputs);

/// Channels [begin, begin + count) of a rank-4 tensor.
template <typename T>
BasicTensor<T> slice_channels(const BasicTensor<T>& input, std::size_t begin, std::size_t count);

/// [M,K] x [K,P] -> [M,P].
template <typename T>
BasicTensor<T> matmul(const BasicTensor<T>& a, const BasicTensor<T>& b);
/// a^T b for a [K,M], b [K,P].
template <typename T>
BasicTensor<T> matmul_tn(const BasicTensor<T>& a, const BasicTensor<T>& b);
/// a b^T for a [M,K], b [P,K].
template <typename T>
BasicTensor<T> matmul_nt(const BasicTensor<T>& a, const BasicTensor<T>& b);

template <typename T>
BasicTensor<T> add(const BasicTensor<T>& a, const BasicTensor<T>& b);
template <typename T>
BasicTensor<T> mul(const BasicTensor<T>& a, const BasicTensor<T>& b);
template <typename T>
BasicTensor<T> scale(const BasicTensor<T>& a, T s);

/// In-place a += b for equal shapes.
template <typename T>
void add_inplace(BasicTensor<T>& a, const BasicTensor<T>& b);

template <typename T>
BasicTensor<T> relu(const BasicTensor<T>& a);
template <typename T>
BasicTensor<T> sigmoid(const BasicTensor<T>& a);

/// Adds bias[j] to every row of a rank-2 [M,P] tensor.
template <typename T>
BasicTensor<T> add_row_bias(const BasicTensor<T>& a, const BasicTensor<T>& bias);

/// Sum of all elements as a shape-{1} tensor.
template <typename T>
BasicTensor<T> sum(const BasicTensor<T>& a);

/// Throws NumericError naming `what` if any element is NaN or infinite.
template <typename T>
void ensure_finite(const BasicTensor<T>& t, std::string_view what);

}  // namespace lrnet::kernels
