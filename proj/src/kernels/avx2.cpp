// Compiled with -mavx2 -mfma; only reached after a CPUID check.

#include <immintrin.h>

#include "dar/kernels.hpp"

namespace dar::kernels {
namespace {

inline double hsum(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_add_pd(lo, hi);
  __m128d sh = _mm_unpackhi_pd(lo, lo);
  return _mm_cvtsd_f64(_mm_add_sd(lo, sh));
}

double dot_avx2(const double* a, const double* b, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4), acc1);
  }
  for (; i + 4 <= n; i += 4)
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
  double s = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) s += a[i] * b[i];
  return s;
}

double sum_squares_avx2(const double* a, std::size_t n) { return dot_avx2(a, a, n); }

void axpy_avx2(double alpha, const double* x, double* y, std::size_t n) {
  const __m256d va = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(y + i, _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
  for (; i < n; ++i) y[i] += alpha * x[i];
}

// Row blocks of 4 accumulate over all columns in registers, so y is touched
// once per block instead of once per column.
void gemv_avx2(double alpha, const double* a, std::size_t rows, std::size_t cols, const double* x,
               double beta, double* y) {
  std::size_t i = 0;
  const __m256d vb = _mm256_set1_pd(beta);
  for (; i + 4 <= rows; i += 4) {
    __m256d acc = _mm256_setzero_pd();
    for (std::size_t j = 0; j < cols; ++j)
      acc = _mm256_fmadd_pd(_mm256_loadu_pd(a + j * rows + i), _mm256_set1_pd(x[j]), acc);
    acc = _mm256_mul_pd(acc, _mm256_set1_pd(alpha));
    if (beta != 0.0) acc = _mm256_fmadd_pd(vb, _mm256_loadu_pd(y + i), acc);
    _mm256_storeu_pd(y + i, acc);
  }
  for (; i < rows; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < cols; ++j) s += a[j * rows + i] * x[j];
    y[i] = alpha * s + (beta == 0.0 ? 0.0 : beta * y[i]);
  }
}

void gemv_t_avx2(double alpha, const double* a, std::size_t rows, std::size_t cols,
                 const double* x, double beta, double* y) {
  for (std::size_t j = 0; j < cols; ++j) {
    const double d = dot_avx2(a + j * rows, x, rows);
    y[j] = (beta == 0.0 ? 0.0 : beta * y[j]) + alpha * d;
  }
}

constexpr KernelTable kAvx2{dot_avx2, sum_squares_avx2, axpy_avx2, gemv_avx2, gemv_t_avx2};

}  // namespace

const KernelTable* avx2_table_impl() noexcept { return &kAvx2; }

}  // namespace dar::kernels
