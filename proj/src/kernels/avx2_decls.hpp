#pragma once

#include <cstdint>

namespace stlane::kernels::detail {

void gemm_nn_avx2(int64_t m, int64_t n, int64_t k, const float* a, int64_t lda, const float* b,
                  int64_t ldb, float* c, int64_t ldc);
void gemm_nn_avx2(int64_t m, int64_t n, int64_t k, const double* a, int64_t lda, const double* b,
                  int64_t ldb, double* c, int64_t ldc);
void gemm_tn_avx2(int64_t m, int64_t n, int64_t k, const float* a, int64_t lda, const float* b,
                  int64_t ldb, float* c, int64_t ldc);
void gemm_tn_avx2(int64_t m, int64_t n, int64_t k, const double* a, int64_t lda, const double* b,
                  int64_t ldb, double* c, int64_t ldc);
void gemm_nt_avx2(int64_t m, int64_t n, int64_t k, const float* a, int64_t lda, const float* b,
                  int64_t ldb, float* c, int64_t ldc);
void gemm_nt_avx2(int64_t m, int64_t n, int64_t k, const double* a, int64_t lda, const double* b,
                  int64_t ldb, double* c, int64_t ldc);
void relu_avx2(float* x, int64_t n);
void relu_avx2(double* x, int64_t n);
void relu_backward_avx2(float* dy, const float* y, int64_t n);
void relu_backward_avx2(double* dy, const double* y, int64_t n);
void axpy_avx2(int64_t n, float alpha, const float* x, float* y);
void axpy_avx2(int64_t n, double alpha, const double* x, double* y);

}  // namespace stlane::kernels::detail
