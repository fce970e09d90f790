#include <atomic>
#include <cstdlib>
#include <cstring>
#include <vector>

#include "clade/kernels.hpp"

namespace clade::kernels {
namespace {

Isa probe() {
#if defined(__x86_64__) || defined(__i386__)
  if (avx2::compiled() && __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma")) {
    return Isa::avx2;
  }
#endif
  return Isa::scalar;
}

Isa initial() {
  const char* force = std::getenv("CLADE_FORCE_SCALAR");
  if (force != nullptr && std::strcmp(force, "0") != 0 && *force != '\0') return Isa::scalar;
  return probe();
}

std::atomic<Isa>& current() {
  static std::atomic<Isa> isa{initial()};
  return isa;
}

template <typename T>
void transpose_into(std::vector<T>& out, const T* src, std::size_t ld, std::size_t rows,
                    std::size_t cols) {
  // src viewed as [cols, rows] with leading dimension ld; out is [rows, cols].
  out.resize(rows * cols);
  for (std::size_t r = 0; r < cols; ++r)
    for (std::size_t c = 0; c < rows; ++c) out[c * cols + r] = src[r * ld + c];
}

template <typename T>
void gemm_nn_dispatch(std::size_t m, std::size_t n, std::size_t k, const T* a, std::size_t lda,
                      const T* b, std::size_t ldb, T* c, std::size_t ldc) {
  if (current().load(std::memory_order_relaxed) == Isa::avx2) {
    avx2::gemm_nn(m, n, k, a, lda, b, ldb, c, ldc);
  } else {
    ref::gemm_nn(m, n, k, a, lda, b, ldb, c, ldc);
  }
}

}  // namespace

Isa detected_isa() { return probe(); }
Isa active_isa() { return current().load(); }

void set_active_isa(Isa isa) {
  if (isa == Isa::avx2 && probe() != Isa::avx2) isa = Isa::scalar;
  current().store(isa);
}

std::string_view isa_name(Isa isa) { return isa == Isa::avx2 ? "avx2" : "scalar"; }

template <typename T>
void gemm(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k, const T* a,
          std::size_t lda, const T* b, std::size_t ldb, T beta, T* c, std::size_t ldc) {
  if (beta == T(0)) {
    for (std::size_t i = 0; i < m; ++i) std::memset(c + i * ldc, 0, n * sizeof(T));
  } else if (beta != T(1)) {
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) c[i * ldc + j] *= beta;
  }
  if (m == 0 || n == 0 || k == 0) return;

  thread_local std::vector<T> pack_a;
  thread_local std::vector<T> pack_b;
  const T* pa = a;
  std::size_t la = lda;
  if (trans_a) {
    transpose_into(pack_a, a, lda, m, k);
    pa = pack_a.data();
    la = k;
  }
  const T* pb = b;
  std::size_t lb = ldb;
  if (trans_b) {
    transpose_into(pack_b, b, ldb, k, n);
    pb = pack_b.data();
    lb = n;
  }
  gemm_nn_dispatch(m, n, k, pa, la, pb, lb, c, ldc);
}

template <typename T>
void axpy(std::size_t n, T alpha, const T* x, T* y) {
  if (current().load(std::memory_order_relaxed) == Isa::avx2) {
    avx2::axpy(n, alpha, x, y);
  } else {
    ref::axpy(n, alpha, x, y);
  }
}

template <typename T>
T dot(std::size_t n, const T* x, const T* y) {
  if (current().load(std::memory_order_relaxed) == Isa::avx2) return avx2::dot(n, x, y);
  return ref::dot(n, x, y);
}

template void gemm<float>(bool, bool, std::size_t, std::size_t, std::size_t, const float*,
                          std::size_t, const float*, std::size_t, float, float*, std::size_t);
template void gemm<double>(bool, bool, std::size_t, std::size_t, std::size_t, const double*,
                           std::size_t, const double*, std::size_t, double, double*, std::size_t);
template void axpy<float>(std::size_t, float, const float*, float*);
template void axpy<double>(std::size_t, double, const double*, double*);
template float dot<float>(std::size_t, const float*, const float*);
template double dot<double>(std::size_t, const double*, const double*);

}  // namespace clade::kernels
