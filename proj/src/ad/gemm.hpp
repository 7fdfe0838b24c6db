#pragma once

#include <cstddef>

namespace apnet2::ad::detail {

// Row-major C = alpha * op(A) * op(B) + beta * C, op(A): m x k, op(B): k x n.
void gemm(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k, float alpha, const float* a,
          const float* b, float beta, float* c);
void gemm(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k, double alpha, const double* a,
          const double* b, double beta, double* c);

// True when the BLAS probe found wrong results and the portable kernel is in use.
bool blas_fallback_active(bool double_precision);

}  // namespace apnet2::ad::detail
