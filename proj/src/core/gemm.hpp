#pragma once

#include <cstddef>

namespace lrnet::detail {

/// C = op(A) * op(B)   (or C += ... when `accumulate`), row-major.
///
/// op(A) is M x K, op(B) is K x N. Float dispatches to BLAS. Double runs a
/// fixed-order loop: each C element is summed over ascending k starting from
/// zero, which makes it bit-compatible with a direct scalar reference.
template <typename T>
void gemm(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k, const T* a,
          std::size_t lda, const T* b, std::size_t ldb, T* c, std::size_t ldc, bool accumulate);

}  // namespace lrnet::detail
