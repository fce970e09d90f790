// AVX2 + FMA variants. This translation unit is compiled with -mavx2 -mfma;
// nothing in it may run before dispatch.cpp has confirmed CPU support.

#include "clade/kernels.hpp"

#if defined(CLADE_HAVE_AVX2_TU) && defined(__AVX2__) && defined(__FMA__)
#include <immintrin.h>

namespace clade::kernels::avx2 {
namespace {

struct F32 {
  using T = float;
  using V = __m256;
  static constexpr std::size_t width = 8;
  static V zero() { return _mm256_setzero_ps(); }
  static V load(const T* p) { return _mm256_loadu_ps(p); }
  static void store(T* p, V v) { _mm256_storeu_ps(p, v); }
  static V bcast(T v) { return _mm256_set1_ps(v); }
  static V fma(V a, V b, V c) { return _mm256_fmadd_ps(a, b, c); }
  static V add(V a, V b) { return _mm256_add_ps(a, b); }
  static T hsum(V v) {
    __m128 lo = _mm256_castps256_ps128(v);
    __m128 hi = _mm256_extractf128_ps(v, 1);
    lo = _mm_add_ps(lo, hi);
    __m128 sh = _mm_movehdup_ps(lo);
    __m128 s = _mm_add_ps(lo, sh);
    sh = _mm_movehl_ps(sh, s);
    s = _mm_add_ss(s, sh);
    return _mm_cvtss_f32(s);
  }
};

struct F64 {
  using T = double;
  using V = __m256d;
  static constexpr std::size_t width = 4;
  static V zero() { return _mm256_setzero_pd(); }
  static V load(const T* p) { return _mm256_loadu_pd(p); }
  static void store(T* p, V v) { _mm256_storeu_pd(p, v); }
  static V bcast(T v) { return _mm256_set1_pd(v); }
  static V fma(V a, V b, V c) { return _mm256_fmadd_pd(a, b, c); }
  static V add(V a, V b) { return _mm256_add_pd(a, b); }
  static T hsum(V v) {
    __m128d lo = _mm256_castpd256_pd128(v);
    __m128d hi = _mm256_extractf128_pd(v, 1);
    lo = _mm_add_pd(lo, hi);
    __m128d h = _mm_unpackhi_pd(lo, lo);
    return _mm_cvtsd_f64(_mm_add_sd(lo, h));
  }
};

// 4 x (2 * width) register tile: 8 accumulators, 2 B loads and 4 broadcasts
// per k step.
template <typename S>
void tile_4x2(std::size_t k, const typename S::T* a, std::size_t lda, const typename S::T* b,
              std::size_t ldb, typename S::T* c, std::size_t ldc) {
  using V = typename S::V;
  constexpr std::size_t w = S::width;
  V c00 = S::load(c), c01 = S::load(c + w);
  V c10 = S::load(c + ldc), c11 = S::load(c + ldc + w);
  V c20 = S::load(c + 2 * ldc), c21 = S::load(c + 2 * ldc + w);
  V c30 = S::load(c + 3 * ldc), c31 = S::load(c + 3 * ldc + w);
  for (std::size_t p = 0; p < k; ++p) {
    const V b0 = S::load(b + p * ldb);
    const V b1 = S::load(b + p * ldb + w);
    V av = S::bcast(a[p]);
    c00 = S::fma(av, b0, c00);
    c01 = S::fma(av, b1, c01);
    av = S::bcast(a[lda + p]);
    c10 = S::fma(av, b0, c10);
    c11 = S::fma(av, b1, c11);
    av = S::bcast(a[2 * lda + p]);
    c20 = S::fma(av, b0, c20);
    c21 = S::fma(av, b1, c21);
    av = S::bcast(a[3 * lda + p]);
    c30 = S::fma(av, b0, c30);
    c31 = S::fma(av, b1, c31);
  }
  S::store(c, c00);
  S::store(c + w, c01);
  S::store(c + ldc, c10);
  S::store(c + ldc + w, c11);
  S::store(c + 2 * ldc, c20);
  S::store(c + 2 * ldc + w, c21);
  S::store(c + 3 * ldc, c30);
  S::store(c + 3 * ldc + w, c31);
}

// One row of C, vectorised along n, scalar tail.
template <typename S>
void row_strip(std::size_t n, std::size_t k, const typename S::T* a, const typename S::T* b,
               std::size_t ldb, typename S::T* c) {
  using T = typename S::T;
  constexpr std::size_t w = S::width;
  std::size_t j = 0;
  for (; j + w <= n; j += w) {
    auto acc = S::load(c + j);
    for (std::size_t p = 0; p < k; ++p) acc = S::fma(S::bcast(a[p]), S::load(b + p * ldb + j), acc);
    S::store(c + j, acc);
  }
  for (; j < n; ++j) {
    T acc = c[j];
    for (std::size_t p = 0; p < k; ++p) acc += a[p] * b[p * ldb + j];
    c[j] = acc;
  }
}

template <typename S>
void gemm_nn_impl(std::size_t m, std::size_t n, std::size_t k, const typename S::T* a,
                  std::size_t lda, const typename S::T* b, std::size_t ldb, typename S::T* c,
                  std::size_t ldc) {
  constexpr std::size_t nb = 2 * S::width;
  const std::size_t n_full = n - n % nb;
  std::size_t i = 0;
  for (; i + 4 <= m; i += 4) {
    for (std::size_t j = 0; j < n_full; j += nb) tile_4x2<S>(k, a + i * lda, lda, b + j, ldb, c + i * ldc + j, ldc);
    if (n_full < n) {
      for (std::size_t r = 0; r < 4; ++r)
        row_strip<S>(n - n_full, k, a + (i + r) * lda, b + n_full, ldb, c + (i + r) * ldc + n_full);
    }
  }
  for (; i < m; ++i) row_strip<S>(n, k, a + i * lda, b, ldb, c + i * ldc);
}

template <typename S>
void axpy_impl(std::size_t n, typename S::T alpha, const typename S::T* x, typename S::T* y) {
  constexpr std::size_t w = S::width;
  const auto av = S::bcast(alpha);
  std::size_t i = 0;
  for (; i + w <= n; i += w) S::store(y + i, S::fma(av, S::load(x + i), S::load(y + i)));
  for (; i < n; ++i) y[i] += alpha * x[i];
}

template <typename S>
typename S::T dot_impl(std::size_t n, const typename S::T* x, const typename S::T* y) {
  constexpr std::size_t w = S::width;
  auto acc0 = S::zero();
  auto acc1 = S::zero();
  std::size_t i = 0;
  for (; i + 2 * w <= n; i += 2 * w) {
    acc0 = S::fma(S::load(x + i), S::load(y + i), acc0);
    acc1 = S::fma(S::load(x + i + w), S::load(y + i + w), acc1);
  }
  for (; i + w <= n; i += w) acc0 = S::fma(S::load(x + i), S::load(y + i), acc0);
  typename S::T s = S::hsum(S::add(acc0, acc1));
  for (; i < n; ++i) s += x[i] * y[i];
  return s;
}

}  // namespace

bool compiled() { return true; }

void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const float* a, std::size_t lda,
             const float* b, std::size_t ldb, float* c, std::size_t ldc) {
  gemm_nn_impl<F32>(m, n, k, a, lda, b, ldb, c, ldc);
}
void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const double* a, std::size_t lda,
             const double* b, std::size_t ldb, double* c, std::size_t ldc) {
  gemm_nn_impl<F64>(m, n, k, a, lda, b, ldb, c, ldc);
}
void axpy(std::size_t n, float alpha, const float* x, float* y) { axpy_impl<F32>(n, alpha, x, y); }
void axpy(std::size_t n, double alpha, const double* x, double* y) { axpy_impl<F64>(n, alpha, x, y); }
float dot(std::size_t n, const float* x, const float* y) { return dot_impl<F32>(n, x, y); }
double dot(std::size_t n, const double* x, const double* y) { return dot_impl<F64>(n, x, y); }

}  // namespace clade::kernels::avx2

#else

// Non-x86 or a toolchain without AVX2 support: the dispatcher never selects
// these, they forward to the reference kernels so the symbols still link.
namespace clade::kernels::avx2 {
bool compiled() { return false; }
void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const float* a, std::size_t lda,
             const float* b, std::size_t ldb, float* c, std::size_t ldc) {
  ref::gemm_nn(m, n, k, a, lda, b, ldb, c, ldc);
}
void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const double* a, std::size_t lda,
             const double* b, std::size_t ldb, double* c, std::size_t ldc) {
  ref::gemm_nn(m, n, k, a, lda, b, ldb, c, ldc);
}
void axpy(std::size_t n, float alpha, const float* x, float* y) { ref::axpy(n, alpha, x, y); }
void axpy(std::size_t n, double alpha, const double* x, double* y) { ref::axpy(n, alpha, x, y); }
float dot(std::size_t n, const float* x, const float* y) { return ref::dot(n, x, y); }
double dot(std::size_t n, const double* x, const double* y) { return ref::dot(n, x, y); }
}  // namespace clade::kernels::avx2

#endif
