#pragma once

// Dense inner loops used by convolution, stitching and the optimizer.
//
// Every kernel exists as a portable scalar reference and as an AVX2/FMA
// variant. The variant is chosen once at runtime from the CPU feature bits;
// CLADE_FORCE_SCALAR=1 in the environment pins the reference path. Both paths
// are tested for equivalence in tests/unit/kernels_test.cpp.

#include <cstddef>
#include <string_view>

namespace clade::kernels {

enum class Isa { scalar, avx2 };

// Best ISA supported by this CPU and build.
Isa detected_isa();
// ISA currently used by the dispatching entry points below.
Isa active_isa();
// Overrides dispatch (tests and benchmarks). Requesting avx2 on a machine
// without it falls back to scalar.
void set_active_isa(Isa isa);
std::string_view isa_name(Isa isa);

// C[M,N] = op(A)[M,K] * op(B)[K,N] + beta * C, row-major with leading
// dimensions. op(X) is X or X^T depending on trans_a / trans_b.
template <typename T>
void gemm(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k,
          const T* a, std::size_t lda, const T* b, std::size_t ldb, T beta, T* c,
          std::size_t ldc);

// y += alpha * x
template <typename T>
void axpy(std::size_t n, T alpha, const T* x, T* y);

template <typename T>
T dot(std::size_t n, const T* x, const T* y);

// Per-ISA entry points, exposed for the equivalence tests. The *_nn kernels
// compute C += A * B with A, B already in row-major non-transposed layout.
namespace ref {
void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const float* a, std::size_t lda,
             const float* b, std::size_t ldb, float* c, std::size_t ldc);
void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const double* a, std::size_t lda,
             const double* b, std::size_t ldb, double* c, std::size_t ldc);
void axpy(std::size_t n, float alpha, const float* x, float* y);
void axpy(std::size_t n, double alpha, const double* x, double* y);
float dot(std::size_t n, const float* x, const float* y);
double dot(std::size_t n, const double* x, const double* y);
}  // namespace ref

namespace avx2 {
bool compiled();
void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const float* a, std::size_t lda,
             const float* b, std::size_t ldb, float* c, std::size_t ldc);
void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const double* a, std::size_t lda,
             const double* b, std::size_t ldb, double* c, std::size_t ldc);
void axpy(std::size_t n, float alpha, const float* x, float* y);
void axpy(std::size_t n, double alpha, const double* x, double* y);
float dot(std::size_t n, const float* x, const float* y);
double dot(std::size_t n, const double* x, const double* y);
}  // namespace avx2

}  // namespace clade::kernels
