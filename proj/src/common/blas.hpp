#pragma once

#include <cblas.h>

#include "common/real.hpp"

namespace ctig {

// Row-major C = alpha * op(A) * op(B) + beta * C.
// op(A): M x K, op(B): K x N, C: M x N.
inline void gemm(bool trans_a, bool trans_b, int m, int n, int k, real alpha,
                 const real* a, int lda, const real* b, int ldb, real beta,
                 real* c, int ldc) {
#ifdef CTIG_REAL_DOUBLE
  cblas_dgemm(CblasRowMajor, trans_a ? CblasTrans : CblasNoTrans,
              trans_b ? CblasTrans : CblasNoTrans, m, n, k, alpha, a, lda, b,
              ldb, beta, c, ldc);
#else
  cblas_sgemm(CblasRowMajor, trans_a ? CblasTrans : CblasNoTrans,
              trans_b ? CblasTrans : CblasNoTrans, m, n, k, alpha, a, lda, b,
              ldb, beta, c, ldc);
#endif
}

// Convenience wrapper with natural leading dimensions.
inline void gemm(bool trans_a, bool trans_b, int m, int n, int k, real alpha,
                 const real* a, const real* b, real beta, real* c) {
  gemm(trans_a, trans_b, m, n, k, alpha, a, trans_a ? m : k, b, trans_b ? k : n,
       beta, c, n);
}

}  // namespace ctig
