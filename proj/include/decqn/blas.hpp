#pragma once

#include <type_traits>

#include "decqn/common.hpp"
#include "decqn/mat.hpp"

#ifdef DECQN_USE_CBLAS
#include <cblas.h>
#endif

namespace decqn {

// C = alpha * op(A) * op(B) + beta * C, row-major. Dispatches to CBLAS for
// float/double when available; the portable fallback keeps tests and other
// scalar types working without it.
template <typename T>
void gemm(bool trans_a, bool trans_b, T alpha, const Mat<T>& a, const Mat<T>& b,
          T beta, Mat<T>& c) {
  const int m = trans_a ? a.cols() : a.rows();
  const int k = trans_a ? a.rows() : a.cols();
  const int kb = trans_b ? b.cols() : b.rows();
  const int n = trans_b ? b.rows() : b.cols();
  if (k != kb) throw LogicError("gemm: inner dimensions do not match");
  if (c.rows() != m || c.cols() != n) {
    if (beta != T(0)) throw LogicError("gemm: output shape mismatch with nonzero beta");
    c.resize(m, n);
  }

#ifdef DECQN_USE_CBLAS
  if constexpr (std::is_same_v<T, float> || std::is_same_v<T, double>) {
    const CBLAS_TRANSPOSE ta = trans_a ? CblasTrans : CblasNoTrans;
    const CBLAS_TRANSPOSE tb = trans_b ? CblasTrans : CblasNoTrans;
    if constexpr (std::is_same_v<T, float>) {
      cblas_sgemm(CblasRowMajor, ta, tb, m, n, k, alpha, a.data(), a.cols(),
                  b.data(), b.cols(), beta, c.data(), c.cols());
    } else {
      cblas_dgemm(CblasRowMajor, ta, tb, m, n, k, alpha, a.data(), a.cols(),
                  b.data(), b.cols(), beta, c.data(), c.cols());
    }
    return;
  }
#endif

  auto at = [&](int i, int j) { return trans_a ? a(j, i) : a(i, j); };
  auto bt = [&](int i, int j) { return trans_b ? b(j, i) : b(i, j); };
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < n; ++j) {
      T acc = T(0);
      for (int p = 0; p < k; ++p) acc += at(i, p) * bt(p, j);
      c(i, j) = alpha * acc + (beta == T(0) ? T(0) : beta * c(i, j));
    }
  }
}

}  // namespace decqn
