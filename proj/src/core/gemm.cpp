#include "gemm.hpp"

#include <cblas.h>

#include <algorithm>
#include <mutex>
#include <vector>

namespace lrnet::detail {

namespace {

void pin_blas_threads() {
  static std::once_flag once;
  std::call_once(once, [] { openblas_set_num_threads(1); });
}

}  // namespace

template <>
void gemm<float>(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k,
                 const float* a, std::size_t lda, const float* b, std::size_t ldb, float* c,
                 std::size_t ldc, bool accumulate) {
  pin_blas_threads();
  cblas_sgemm(CblasRowMajor, trans_a ? CblasTrans : CblasNoTrans,
              trans_b ? CblasTrans : CblasNoTrans, static_cast<blasint>(m),
              static_cast<blasint>(n), static_cast<blasint>(k), 1.0f, a,
              static_cast<blasint>(lda), b, static_cast<blasint>(ldb), accumulate ? 1.0f : 0.0f,
              c, static_cast<blasint>(ldc));
}

template <>
void gemm<double>(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k,
                  const double* a, std::size_t lda, const double* b, std::size_t ldb, double* c,
                  std::size_t ldc, bool accumulate) {
  auto a_at = [&](std::size_t i, std::size_t p) { return trans_a ? a[p * lda + i] : a[i * lda + p]; };
  // Row i of the result accumulates in a scratch row so `accumulate` adds the
  // finished sum once instead of interleaving with the k loop.
  std::vector<double> row(n);
  for (std::size_t i = 0; i < m; ++i) {
    std::fill(row.begin(), row.end(), 0.0);
    for (std::size_t p = 0; p < k; ++p) {
      const double av = a_at(i, p);
      if (!trans_b) {
        const double* brow = b + p * ldb;
        for (std::size_t j = 0; j < n; ++j) row[j] += av * brow[j];
      } else {
        for (std::size_t j = 0; j < n; ++j) row[j] += av * b[j * ldb + p];
      }
    }
    double* crow = c + i * ldc;
    if (accumulate) {
      for (std::size_t j = 0; j < n; ++j) crow[j] += row[j];
    } else {
      for (std::size_t j = 0; j < n; ++j) crow[j] = row[j];
    }
  }
}

}  // namespace lrnet::detail
