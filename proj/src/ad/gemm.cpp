#include "gemm.hpp"

#include <cblas.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <type_traits>
#include <vector>

namespace apnet2::ad::detail {
namespace {

// One BLAS thread: results do not depend on the machine's core count.
const bool single_threaded = [] {
  openblas_set_num_threads(1);
  return true;
}();

CBLAS_TRANSPOSE op(bool t) { return t ? CblasTrans : CblasNoTrans; }

void blas(bool ta, bool tb, std::size_t m, std::size_t n, std::size_t k, float alpha, const float* a, const float* b,
          float beta, float* c) {
  cblas_sgemm(CblasRowMajor, op(ta), op(tb), static_cast<int>(m), static_cast<int>(n), static_cast<int>(k), alpha, a,
              static_cast<int>(ta ? m : k), b, static_cast<int>(tb ? k : n), beta, c, static_cast<int>(n));
}

void blas(bool ta, bool tb, std::size_t m, std::size_t n, std::size_t k, double alpha, const double* a,
          const double* b, double beta, double* c) {
  cblas_dgemm(CblasRowMajor, op(ta), op(tb), static_cast<int>(m), static_cast<int>(n), static_cast<int>(k), alpha, a,
              static_cast<int>(ta ? m : k), b, static_cast<int>(tb ? k : n), beta, c, static_cast<int>(n));
}

// Portable kernel. Inner loop runs over contiguous j whenever op(B) rows are contiguous.
template <typename T>
void loops(bool ta, bool tb, std::size_t m, std::size_t n, std::size_t k, T alpha, const T* a, const T* b, T beta,
           T* c) {
  for (std::size_t i = 0; i < m; ++i) {
    T* ci = c + i * n;
    if (beta == T{0})
      std::fill_n(ci, n, T{0});
    else if (beta != T{1})
      for (std::size_t j = 0; j < n; ++j) ci[j] *= beta;
    if (tb) {
      for (std::size_t j = 0; j < n; ++j) {
        T acc{0};
        for (std::size_t q = 0; q < k; ++q) acc += (ta ? a[q * m + i] : a[i * k + q]) * b[j * k + q];
        ci[j] += alpha * acc;
      }
    } else {
      for (std::size_t q = 0; q < k; ++q) {
        const T aiq = alpha * (ta ? a[q * m + i] : a[i * k + q]);
        const T* bq = b + q * n;
        for (std::size_t j = 0; j < n; ++j) ci[j] += aiq * bq[j];
      }
    }
  }
}

// Some OpenBLAS builds select a kernel that returns wrong results on certain CPUs
// (0.3.20's Cooper Lake dgemm). Probe every transpose mode once at shapes that exercise
// the blocked paths and fall back to the portable kernel on any mismatch.
template <typename T>
bool blas_is_sound() {
  const std::size_t shapes[][3] = {{64, 240, 4}, {37, 300, 19}, {160, 160, 160}};
  std::uint32_t state = 12345;
  auto next = [&] {
    state = state * 1664525u + 1013904223u;
    return static_cast<T>(static_cast<double>(state >> 8) / 16777216.0 - 0.5);
  };
  for (const auto& s : shapes)
    for (int mode = 0; mode < 4; ++mode) {
      const bool ta = mode & 1, tb = mode & 2;
      const std::size_t m = s[0], n = s[1], k = s[2];
      std::vector<T> a(m * k), b(k * n), c(m * n), r;
      for (auto& v : a) v = next();
      for (auto& v : b) v = next();
      for (auto& v : c) v = next();
      r = c;
      blas(ta, tb, m, n, k, T{1}, a.data(), b.data(), T{1}, c.data());
      loops(ta, tb, m, n, k, T{1}, a.data(), b.data(), T{1}, r.data());
      const double tol = std::is_same_v<T, float> ? 1e-3 : 1e-10;
      for (std::size_t i = 0; i < c.size(); ++i)
        if (!(std::abs(static_cast<double>(c[i]) - static_cast<double>(r[i])) <= tol)) return false;
    }
  return true;
}

template <typename T>
void dispatch(bool ta, bool tb, std::size_t m, std::size_t n, std::size_t k, T alpha, const T* a, const T* b,
              T beta, T* c) {
  static const bool sound = blas_is_sound<T>();
  if (m == 0 || n == 0) return;
  if (sound)
    blas(ta, tb, m, n, k, alpha, a, b, beta, c);
  else
    loops(ta, tb, m, n, k, alpha, a, b, beta, c);
}

}  // namespace

void gemm(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k, float alpha, const float* a,
          const float* b, float beta, float* c) {
  dispatch(trans_a, trans_b, m, n, k, alpha, a, b, beta, c);
}

void gemm(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k, double alpha, const double* a,
          const double* b, double beta, double* c) {
  dispatch(trans_a, trans_b, m, n, k, alpha, a, b, beta, c);
}

bool blas_fallback_active(bool double_precision) {
  return double_precision ? !blas_is_sound<double>() : !blas_is_sound<float>();
}

}  // namespace apnet2::ad::detail
