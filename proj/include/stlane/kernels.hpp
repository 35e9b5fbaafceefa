#pragma once

#include <cstdint>

namespace stlane::kernels {

// The arithmetic inner loops exist in two lanes: a scalar reference and an
// AVX2/FMA variant. The lane is picked once at startup from CPUID; the
// STLANE_KERNEL env var (scalar|avx2) or force_backend() overrides it.
// Both lanes use the same k-accumulation order, so either lane is bitwise
// reproducible run-to-run; across lanes they agree to rounding (the FMA lane
// fuses) and are equivalence-tested under a relative tolerance.
enum class Backend { scalar, avx2 };

Backend active_backend();
void force_backend(Backend b);
bool avx2_supported();
const char* backend_name(Backend b);

// All GEMMs accumulate: C += op(A) * op(B). Row-major with leading dims.

// C(m x n) += A(m x k) * B(k x n)
template <class T>
void gemm_nn(int64_t m, int64_t n, int64_t k, const T* a, int64_t lda, const T* b, int64_t ldb,
             T* c, int64_t ldc);

// C(m x n) += A^T * B, A stored (k x m)
template <class T>
void gemm_tn(int64_t m, int64_t n, int64_t k, const T* a, int64_t lda, const T* b, int64_t ldb,
             T* c, int64_t ldc);

// C(m x n) += A * B^T, B stored (n x k)
template <class T>
void gemm_nt(int64_t m, int64_t n, int64_t k, const T* a, int64_t lda, const T* b, int64_t ldb,
             T* c, int64_t ldc);

template <class T>
void relu(T* x, int64_t n);

// dy *= (y > 0), where y is the stored ReLU output.
template <class T>
void relu_backward(T* dy, const T* y, int64_t n);

// y += alpha * x
template <class T>
void axpy(int64_t n, T alpha, const T* x, T* y);

template <class T>
double sum(const T* x, int64_t n);

// Shift-stabilized softmax; exp terms accumulated in double so the outputs
// sum to 1 within a few ulp even in the float instantiation.
template <class T>
void softmax_vec(const T* x, T* out, int64_t n);

}  // namespace stlane::kernels
