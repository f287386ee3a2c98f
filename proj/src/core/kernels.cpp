#include "lrnet/core/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "gemm.hpp"

namespace lrnet {

std::string shape_to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ']';
  return os.str();
}

Shape4 Shape4::of(const Shape& shape) {
  if (shape.size() != 4) throw ShapeError("expected a rank-4 N,H,W,C tensor, got " + shape_to_string(shape));
  for (auto e : shape) {
    if (e == 0) throw ShapeError("zero extent in " + shape_to_string(shape));
  }
  return {shape[0], shape[1], shape[2], shape[3]};
}

namespace kernels {
namespace {

// Upper bound on im2col scratch, in elements.
constexpr std::size_t kColumnBudget = std::size_t{1} << 23;

struct ConvGeometry {
  Shape4 in;
  std::size_t k = 1;
  std::size_t pad = 0;
  std::size_t cout = 1;
  std::size_t patch = 1;  // k*k*Cin, one im2col row
  std::size_t pixels = 1;  // H*W
  std::size_t chunk = 1;  // images per im2col batch
};

template <typename T>
ConvGeometry conv_geometry(const BasicTensor<T>& input, const BasicTensor<T>& kernel) {
  ConvGeometry g;
  g.in = Shape4::of(input.shape());
  const auto& ks = kernel.shape();
  if (ks.size() != 4 || ks[0] != ks[1]) {
    throw ShapeError("conv2d kernel must be [k,k,Cin,Cout], got " + shape_to_string(ks));
  }
  g.k = ks[0];
  if (g.k % 2 == 0) throw ConfigError("conv2d kernel size must be odd, got " + std::to_string(g.k));
  if (ks[2] != g.in.c) {
    throw ShapeError("conv2d kernel Cin " + std::to_string(ks[2]) + " does not match input channels " +
                     std::to_string(g.in.c));
  }
  g.pad = g.k / 2;
  g.cout = ks[3];
  g.patch = g.k * g.k * g.in.c;
  g.pixels = g.in.h * g.in.w;
  g.chunk = std::clamp<std::size_t>(kColumnBudget / (g.pixels * g.patch), 1, g.in.n);
  return g;
}

// Rows are output pixels of images [n0, n0+count); columns are (dy,dx,i).
template <typename T>
void im2col(const ConvGeometry& g, const T* in, std::size_t n0, std::size_t count, T* col) {
  const std::size_t H = g.in.h, W = g.in.w, C = g.in.c, k = g.k;
  for (std::size_t n = n0; n < n0 + count; ++n) {
    const T* img = in + n * H * W * C;
    for (std::size_t y = 0; y < H; ++y) {
      for (std::size_t x = 0; x < W; ++x) {
        T* row = col;
        col += g.patch;
        for (std::size_t dy = 0; dy < k; ++dy) {
          const std::ptrdiff_t sy = static_cast<std::ptrdiff_t>(y + dy) - static_cast<std::ptrdiff_t>(g.pad);
          for (std::size_t dx = 0; dx < k; ++dx, row += C) {
            const std::ptrdiff_t sx = static_cast<std::ptrdiff_t>(x + dx) - static_cast<std::ptrdiff_t>(g.pad);
            if (sy < 0 || sx < 0 || sy >= static_cast<std::ptrdiff_t>(H) || sx >= static_cast<std::ptrdiff_t>(W)) {
              std::fill(row, row + C, T(0));
            } else {
              const T* src = img + (static_cast<std::size_t>(sy) * W + static_cast<std::size_t>(sx)) * C;
              std::copy(src, src + C, row);
            }
          }
        }
      }
    }
  }
}

template <typename T>
void col2im_accumulate(const ConvGeometry& g, const T* col, std::size_t n0, std::size_t count, T* grad_in) {
  const std::size_t H = g.in.h, W = g.in.w, C = g.in.c, k = g.k;
  for (std::size_t n = n0; n < n0 + count; ++n) {
    T* img = grad_in + n * H * W * C;
    for (std::size_t y = 0; y < H; ++y) {
      for (std::size_t x = 0; x < W; ++x) {
        const T* row = col;
        col += g.patch;
        for (std::size_t dy = 0; dy < k; ++dy) {
          const std::ptrdiff_t sy = static_cast<std::ptrdiff_t>(y + dy) - static_cast<std::ptrdiff_t>(g.pad);
          for (std::size_t dx = 0; dx < k; ++dx, row += C) {
            const std::ptrdiff_t sx = static_cast<std::ptrdiff_t>(x + dx) - static_cast<std::ptrdiff_t>(g.pad);
            if (sy < 0 || sx < 0 || sy >= static_cast<std::ptrdiff_t>(H) || sx >= static_cast<std::ptrdiff_t>(W)) continue;
            T* dst = img + (static_cast<std::size_t>(sy) * W + static_cast<std::size_t>(sx)) * C;
            for (std::size_t i = 0; i < C; ++i) dst[i] += row[i];
          }
        }
      }
    }
  }
}

template <typename T>
void require_same_shape(const BasicTensor<T>& a, const BasicTensor<T>& b, std::string_view op) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_to_string(a.shape()) + " vs " +
                     shape_to_string(b.shape()));
  }
}

template <typename T>
void require_matrix(const BasicTensor<T>& a, std::string_view op) {
  if (a.rank() != 2) throw ShapeError(std::string(op) + ": expected rank-2, got " + shape_to_string(a.shape()));
}

}  // namespace

template <typename T>
void ensure_finite(const BasicTensor<T>& t, std::string_view what) {
  for (T v : t.data()) {
    if (!std::isfinite(v)) throw NumericError(std::string(what) + " produced a non-finite value");
  }
}

template <typename T>
BasicTensor<T> conv2d(const BasicTensor<T>& input, const BasicTensor<T>& kernel, const BasicTensor<T>& bias) {
  const ConvGeometry g = conv_geometry(input, kernel);
  if (bias.shape() != Shape{g.cout}) {
    throw ShapeError("conv2d bias must be [" + std::to_string(g.cout) + "], got " + shape_to_string(bias.shape()));
  }
  BasicTensor<T> out(Shape{g.in.n, g.in.h, g.in.w, g.cout});
  if (g.k == 1) {
    detail::gemm<T>(false, false, g.in.n * g.pixels, g.cout, g.in.c, input.raw(), g.in.c, kernel.raw(),
                    g.cout, out.raw(), g.cout, false);
  } else {
    std::vector<T> col(g.chunk * g.pixels * g.patch);
    for (std::size_t n0 = 0; n0 < g.in.n; n0 += g.chunk) {
      const std::size_t count = std::min(g.chunk, g.in.n - n0);
      im2col(g, input.raw(), n0, count, col.data());
      detail::gemm<T>(false, false, count * g.pixels, g.cout, g.patch, col.data(), g.patch, kernel.raw(), g.cout,
                      out.raw() + n0 * g.pixels * g.cout, g.cout, false);
    }
  }
  T* o = out.raw();
  const T* b = bias.raw();
  for (std::size_t r = 0, rows = g.in.n * g.pixels; r < rows; ++r, o += g.cout) {
    for (std::size_t c = 0; c < g.cout; ++c) o[c] += b[c];
  }
  ensure_finite(out, "conv2d");
  return out;
}

template <typename T>
Conv2dGrads<T> conv2d_backward(const BasicTensor<T>& input, const BasicTensor<T>& kernel,
                               const BasicTensor<T>& grad_out, bool want_input_grad) {
  const ConvGeometry g = conv_geometry(input, kernel);
  if (grad_out.shape() != Shape{g.in.n, g.in.h, g.in.w, g.cout}) {
    throw ShapeError("conv2d_backward: gradient shape " + shape_to_string(grad_out.shape()) +
                     " does not match output");
  }
  Conv2dGrads<T> grads;
  grads.kernel = BasicTensor<T>(kernel.shape());
  grads.bias = BasicTensor<T>(Shape{g.cout});
  if (want_input_grad) grads.input = BasicTensor<T>(input.shape());

  const std::size_t rows = g.in.n * g.pixels;
  {
    T* db = grads.bias.raw();
    const T* go = grad_out.raw();
    for (std::size_t r = 0; r < rows; ++r, go += g.cout) {
      for (std::size_t c = 0; c < g.cout; ++c) db[c] += go[c];
    }
  }

  if (g.k == 1) {
    // dK = X^T dY, dX = dY K^T over the whole batch.
    detail::gemm<T>(true, false, g.in.c, g.cout, rows, input.raw(), g.in.c, grad_out.raw(), g.cout,
                    grads.kernel.raw(), g.cout, false);
    if (want_input_grad) {
      detail::gemm<T>(false, true, rows, g.in.c, g.cout, grad_out.raw(), g.cout, kernel.raw(), g.cout,
                      grads.input.raw(), g.in.c, false);
    }
    return grads;
  }

  std::vector<T> col(g.chunk * g.pixels * g.patch);
  for (std::size_t n0 = 0; n0 < g.in.n; n0 += g.chunk) {
    const std::size_t count = std::min(g.chunk, g.in.n - n0);
    const T* go = grad_out.raw() + n0 * g.pixels * g.cout;
    im2col(g, input.raw(), n0, count, col.data());
    detail::gemm<T>(true, false, g.patch, g.cout, count * g.pixels, col.data(), g.patch, go, g.cout,
                    grads.kernel.raw(), g.cout, n0 != 0);
    if (want_input_grad) {
      detail::gemm<T>(false, true, count * g.pixels, g.patch, g.cout, go, g.cout, kernel.raw(), g.cout, col.data(),
                      g.patch, false);
      col2im_accumulate(g, col.data(), n0, count, grads.input.raw());
    }
  }
  return grads;
}

template <typename T>
PoolResult<T> maxpool2d(const BasicTensor<T>& input) {
  const Shape4 s = Shape4::of(input.shape());
  if (s.h < 2 || s.w < 2) throw ShapeError("maxpool2d needs H,W >= 2, got " + shape_to_string(input.shape()));
  const std::size_t oh = (s.h - 2) / 2 + 1, ow = (s.w - 2) / 2 + 1;
  PoolResult<T> r{BasicTensor<T>(Shape{s.n, oh, ow, s.c}), {}};
  r.argmax.resize(r.output.size());
  const T* in = input.raw();
  T* out = r.output.raw();
  std::size_t o = 0;
  for (std::size_t n = 0; n < s.n; ++n) {
    for (std::size_t y = 0; y < oh; ++y) {
      for (std::size_t x = 0; x < ow; ++x) {
        for (std::size_t c = 0; c < s.c; ++c, ++o) {
          std::size_t best = ((n * s.h + 2 * y) * s.w + 2 * x) * s.c + c;
          for (std::size_t dy = 0; dy < 2; ++dy) {
            for (std::size_t dx = 0; dx < 2; ++dx) {
              const std::size_t idx = ((n * s.h + 2 * y + dy) * s.w + 2 * x + dx) * s.c + c;
              if (in[idx] > in[best]) best = idx;
            }
          }
          out[o] = in[best];
          r.argmax[o] = best;
        }
      }
    }
  }
  return r;
}

template <typename T>
BasicTensor<T> maxpool2d_backward(const BasicTensor<T>& grad_out, std::span<const std::size_t> argmax,
                                  const Shape& input_shape) {
  if (argmax.size() != grad_out.size()) throw ShapeError("maxpool2d_backward: argmax size mismatch");
  BasicTensor<T> gi(input_shape);
  for (std::size_t o = 0; o < argmax.size(); ++o) gi[argmax[o]] += grad_out[o];
  return gi;
}

template <typename T>
BasicTensor<T> concat_channels(std::span<const BasicTensor<T>* const> inputs) {
  if (inputs.size() < 2) throw ShapeError("concat_channels needs at least two inputs");
  const Shape4 first = Shape4::of(inputs[0]->shape());
  std::size_t total = 0;
  for (const auto* t : inputs) {
    const Shape4 s = Shape4::of(t->shape());
    if (s.n != first.n || s.h != first.h || s.w != first.w) {
      throw ShapeError("concat_channels: batch/spatial mismatch " + shape_to_string(t->shape()) + " vs " +
                       shape_to_string(inputs[0]->shape()));
    }
    total += s.c;
  }
  BasicTensor<T> out(Shape{first.n, first.h, first.w, total});
  const std::size_t pixels = first.n * first.h * first.w;
  T* dst = out.raw();
  for (std::size_t p = 0; p < pixels; ++p) {
    for (const auto* t : inputs) {
      const std::size_t c = t->dim(3);
      const T* src = t->raw() + p * c;
      dst = std::copy(src, src + c, dst);
    }
  }
  return out;
}

template <typename T>
BasicTensor<T> concat_channels(const std::vector<BasicTensor<T>>& inputs) {
  std::vector<const BasicTensor<T>*> ptrs;
  ptrs.reserve(inputs.size());
  for (const auto& t : inputs) ptrs.push_back(&t);
  return concat_channels<T>(std::span<const BasicTensor<T>* const>(ptrs));
}

template <typename T>
BasicTensor<T> slice_channels(const BasicTensor<T>& input, std::size_t begin, std::size_t count) {
  const Shape4 s = Shape4::of(input.shape());
  if (count == 0 || begin + count > s.c) {
    throw ShapeError("slice_channels: range [" + std::to_string(begin) + "," + std::to_string(begin + count) +
                     ") outside " + std::to_string(s.c) + " channels");
  }
  BasicTensor<T> out(Shape{s.n, s.h, s.w, count});
  const std::size_t pixels = s.n * s.h * s.w;
  T* dst = out.raw();
  for (std::size_t p = 0; p < pixels; ++p) {
    const T* src = input.raw() + p * s.c + begin;
    dst = std::copy(src, src + count, dst);
  }
  return out;
}

template <typename T>
BasicTensor<T> matmul(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  require_matrix(a, "matmul");
  require_matrix(b, "matmul");
  if (a.dim(1) != b.dim(0)) {
    throw ShapeError("matmul: inner extents differ " + shape_to_string(a.shape()) + " x " + shape_to_string(b.shape()));
  }
  BasicTensor<T> out(Shape{a.dim(0), b.dim(1)});
  detail::gemm<T>(false, false, a.dim(0), b.dim(1), a.dim(1), a.raw(), a.dim(1), b.raw(), b.dim(1), out.raw(),
                  b.dim(1), false);
  ensure_finite(out, "matmul");
  return out;
}

template <typename T>
BasicTensor<T> matmul_tn(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  require_matrix(a, "matmul_tn");
  require_matrix(b, "matmul_tn");
  if (a.dim(0) != b.dim(0)) throw ShapeError("matmul_tn: inner extents differ");
  BasicTensor<T> out(Shape{a.dim(1), b.dim(1)});
  detail::gemm<T>(true, false, a.dim(1), b.dim(1), a.dim(0), a.raw(), a.dim(1), b.raw(), b.dim(1), out.raw(),
                  b.dim(1), false);
  return out;
}

template <typename T>
BasicTensor<T> matmul_nt(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  require_matrix(a, "matmul_nt");
  require_matrix(b, "matmul_nt");
  if (a.dim(1) != b.dim(1)) throw ShapeError("matmul_nt: inner extents differ");
  BasicTensor<T> out(Shape{a.dim(0), b.dim(0)});
  detail::gemm<T>(false, true, a.dim(0), b.dim(0), a.dim(1), a.raw(), a.dim(1), b.raw(), b.dim(1), out.raw(),
                  b.dim(0), false);
  return out;
}

template <typename T>
BasicTensor<T> add(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  require_same_shape(a, b, "add");
  BasicTensor<T> out = a;
  add_inplace(out, b);
  ensure_finite(out, "add");
  return out;
}

template <typename T>
void add_inplace(BasicTensor<T>& a, const BasicTensor<T>& b) {
  require_same_shape(a, b, "add");
  T* x = a.raw();
  const T* y = b.raw();
  for (std::size_t i = 0, n = a.size(); i < n; ++i) x[i] += y[i];
}

template <typename T>
BasicTensor<T> mul(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  require_same_shape(a, b, "mul");
  BasicTensor<T> out = a;
  T* x = out.raw();
  const T* y = b.raw();
  for (std::size_t i = 0, n = out.size(); i < n; ++i) x[i] *= y[i];
  ensure_finite(out, "mul");
  return out;
}

template <typename T>
BasicTensor<T> scale(const BasicTensor<T>& a, T s) {
  BasicTensor<T> out = a;
  for (T& v : out.data()) v *= s;
  ensure_finite(out, "scale");
  return out;
}

template <typename T>
BasicTensor<T> relu(const BasicTensor<T>& a) {
  BasicTensor<T> out = a;
  for (T& v : out.data()) v = v > T(0) ? v : T(0);
  return out;
}

template <typename T>
BasicTensor<T> sigmoid(const BasicTensor<T>& a) {
  BasicTensor<T> out = a;
  for (T& v : out.data()) {
    // Split by sign so exp never overflows.
    if (v >= T(0)) {
      v = T(1) / (T(1) + std::exp(-v));
    } else {
      const T e = std::exp(v);
      v = e / (T(1) + e);
    }
  }
  return out;
}

template <typename T>
BasicTensor<T> add_row_bias(const BasicTensor<T>& a, const BasicTensor<T>& bias) {
  require_matrix(a, "add_row_bias");
  if (bias.shape() != Shape{a.dim(1)}) {
    throw ShapeError("add_row_bias: bias " + shape_to_string(bias.shape()) + " vs rows of " +
                     shape_to_string(a.shape()));
  }
  BasicTensor<T> out = a;
  T* o = out.raw();
  for (std::size_t r = 0; r < a.dim(0); ++r, o += a.dim(1)) {
    for (std::size_t c = 0; c < a.dim(1); ++c) o[c] += bias[c];
  }
  ensure_finite(out, "add_row_bias");
  return out;
}

template <typename T>
BasicTensor<T> sum(const BasicTensor<T>& a) {
  T acc = T(0);
  for (T v : a.data()) acc += v;
  if (!std::isfinite(acc)) throw NumericError("sum produced a non-finite value");
  return BasicTensor<T>::scalar(acc);
}

#define LRNET_INSTANTIATE(T)                                                                                  \
  template void ensure_finite<T>(const BasicTensor<T>&, std::string_view);                                   \
  template BasicTensor<T> conv2d<T>(const BasicTensor<T>&, const BasicTensor<T>&, const BasicTensor<T>&);    \
  template Conv2dGrads<T> conv2d_backward<T>(const BasicTensor<T>&, const BasicTensor<T>&,                   \
                                             const BasicTensor<T>&, bool);                                    \
  template PoolResult<T> maxpool2d<T>(const BasicTensor<T>&);                                                 \
  template BasicTensor<T> maxpool2d_backward<T>(const BasicTensor<T>&, std::span<const std::size_t>,         \
                                                const Shape&);                                                \
  template BasicTensor<T> concat_channels<T>(std::span<const BasicTensor<T>* const>);                        \
  template BasicTensor<T> concat_channels<T>(const std::vector<BasicTensor<T>>&);                            \
  template BasicTensor<T> slice_channels<T>(const BasicTensor<T>&, std::size_t, std::size_t);                \
  template BasicTensor<T> matmul<T>(const BasicTensor<T>&, const BasicTensor<T>&);                           \
  template BasicTensor<T> matmul_tn<T>(const BasicTensor<T>&, const BasicTensor<T>&);                        \
  template BasicTensor<T> matmul_nt<T>(const BasicTensor<T>&, const BasicTensor<T>&);                        \
  template BasicTensor<T> add<T>(const BasicTensor<T>&, const BasicTensor<T>&);                              \
  template void add_inplace<T>(BasicTensor<T>&, const BasicTensor<T>&);                                      \
  template BasicTensor<T> mul<T>(const BasicTensor<T>&, const BasicTensor<T>&);                              \
  template BasicTensor<T> scale<T>(const BasicTensor<T>&, T);                                                 \
  template BasicTensor<T> relu<T>(const BasicTensor<T>&);                                                     \
  template BasicTensor<T> sigmoid<T>(const BasicTensor<T>&);                                                  \
  template BasicTensor<T> add_row_bias<T>(const BasicTensor<T>&, const BasicTensor<T>&);                     \
  template BasicTensor<T> sum<T>(const BasicTensor<T>&);

LRNET_INSTANTIATE(float)
LRNET_INSTANTIATE(double)

#undef LRNET_INSTANTIATE

}  // namespace kernels
}  // namespace lrnet
