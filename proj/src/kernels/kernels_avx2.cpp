#include <immintrin.h>

#include "kernels_impl.hpp"

namespace subat::kernels::avx2 {

namespace {

inline double hsum(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_add_pd(lo, hi);
  const __m128d swapped = _mm_unpackhi_pd(lo, lo);
  return _mm_cvtsd_f64(_mm_add_sd(lo, swapped));
}

// 4 rows x 8 columns of C held in registers across the k loop.
inline void block_4x8(std::size_t k, const double* a, std::size_t lda, const double* b,
                      std::size_t ldb, double* c, std::size_t ldc) {
  __m256d c00 = _mm256_loadu_pd(c);
  __m256d c01 = _mm256_loadu_pd(c + 4);
  __m256d c10 = _mm256_loadu_pd(c + ldc);
  __m256d c11 = _mm256_loadu_pd(c + ldc + 4);
  __m256d c20 = _mm256_loadu_pd(c + 2 * ldc);
  __m256d c21 = _mm256_loadu_pd(c + 2 * ldc + 4);
  __m256d c30 = _mm256_loadu_pd(c + 3 * ldc);
  __m256d c31 = _mm256_loadu_pd(c + 3 * ldc + 4);
  for (std::size_t p = 0; p < k; ++p) {
    const double* bp = b + p * ldb;
    const __m256d b0 = _mm256_loadu_pd(bp);
    const __m256d b1 = _mm256_loadu_pd(bp + 4);
    __m256d av = _mm256_broadcast_sd(a + p);
    c00 = _mm256_fmadd_pd(av, b0, c00);
    c01 = _mm256_fmadd_pd(av, b1, c01);
    av = _mm256_broadcast_sd(a + lda + p);
    c10 = _mm256_fmadd_pd(av, b0, c10);
    c11 = _mm256_fmadd_pd(av, b1, c11);
    av = _mm256_broadcast_sd(a + 2 * lda + p);
    c20 = _mm256_fmadd_pd(av, b0, c20);
    c21 = _mm256_fmadd_pd(av, b1, c21);
    av = _mm256_broadcast_sd(a + 3 * lda + p);
    c30 = _mm256_fmadd_pd(av, b0, c30);
    c31 = _mm256_fmadd_pd(av, b1, c31);
  }
  _mm256_storeu_pd(c, c00);
  _mm256_storeu_pd(c + 4, c01);
  _mm256_storeu_pd(c + ldc, c10);
  _mm256_storeu_pd(c + ldc + 4, c11);
  _mm256_storeu_pd(c + 2 * ldc, c20);
  _mm256_storeu_pd(c + 2 * ldc + 4, c21);
  _mm256_storeu_pd(c + 3 * ldc, c30);
  _mm256_storeu_pd(c + 3 * ldc + 4, c31);
}

inline void block_1x8(std::size_t k, const double* a, const double* b, std::size_t ldb,
                      double* c) {
  __m256d c0 = _mm256_loadu_pd(c);
  __m256d c1 = _mm256_loadu_pd(c + 4);
  for (std::size_t p = 0; p < k; ++p) {
    const double* bp = b + p * ldb;
    const __m256d av = _mm256_broadcast_sd(a + p);
    c0 = _mm256_fmadd_pd(av, _mm256_loadu_pd(bp), c0);
    c1 = _mm256_fmadd_pd(av, _mm256_loadu_pd(bp + 4), c1);
  }
  _mm256_storeu_pd(c, c0);
  _mm256_storeu_pd(c + 4, c1);
}

inline void block_1x4(std::size_t k, const double* a, const double* b, std::size_t ldb,
                      double* c) {
  __m256d c0 = _mm256_loadu_pd(c);
  for (std::size_t p = 0; p < k; ++p) {
    c0 = _mm256_fmadd_pd(_mm256_broadcast_sd(a + p), _mm256_loadu_pd(b + p * ldb), c0);
  }
  _mm256_storeu_pd(c, c0);
}

inline void block_1x1(std::size_t k, const double* a, const double* b, std::size_t ldb,
                      double* c) {
  double acc = *c;
  for (std::size_t p = 0; p < k; ++p) acc = __builtin_fma(a[p], b[p * ldb], acc);
  *c = acc;
}

}  // namespace

double dot(const double* a, const double* b, std::size_t n) {
  __m256d s0 = _mm256_setzero_pd();
  __m256d s1 = _mm256_setzero_pd();
  __m256d s2 = _mm256_setzero_pd();
  __m256d s3 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 16 <= n; i += 16) {
    s0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), s0);
    s1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4), s1);
    s2 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 8), _mm256_loadu_pd(b + i + 8), s2);
    s3 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 12), _mm256_loadu_pd(b + i + 12), s3);
  }
  for (; i + 4 <= n; i += 4) {
    s0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), s0);
  }
  double s = hsum(_mm256_add_pd(_mm256_add_pd(s0, s1), _mm256_add_pd(s2, s3)));
  for (; i < n; ++i) s = __builtin_fma(a[i], b[i], s);
  return s;
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
  const __m256d av = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    _mm256_storeu_pd(y + i, _mm256_fmadd_pd(av, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
    _mm256_storeu_pd(y + i + 4,
                     _mm256_fmadd_pd(av, _mm256_loadu_pd(x + i + 4), _mm256_loadu_pd(y + i + 4)));
  }
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(y + i, _mm256_fmadd_pd(av, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
  }
  for (; i < n; ++i) y[i] = __builtin_fma(alpha, x[i], y[i]);
}

void gemm(std::size_t m, std::size_t n, std::size_t k, const double* a, std::size_t lda,
          const double* b, std::size_t ldb, double* c, std::size_t ldc) {
  // Column panels outermost so an 8-wide panel of B stays hot in L1 while
  // every row block streams past it.
  std::size_t j = 0;
  for (; j + 8 <= n; j += 8) {
    std::size_t i = 0;
    for (; i + 4 <= m; i += 4) block_4x8(k, a + i * lda, lda, b + j, ldb, c + i * ldc + j, ldc);
    for (; i < m; ++i) block_1x8(k, a + i * lda, b + j, ldb, c + i * ldc + j);
  }
  for (; j + 4 <= n; j += 4) {
    for (std::size_t i = 0; i < m; ++i) block_1x4(k, a + i * lda, b + j, ldb, c + i * ldc + j);
  }
  for (; j < n; ++j) {
    for (std::size_t i = 0; i < m; ++i) block_1x1(k, a + i * lda, b + j, ldb, c + i * ldc + j);
  }
}

}  // namespace subat::kernels::avx2
