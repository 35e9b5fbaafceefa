#pragma once

#include <cstdint>

// Scalar reference kernels. These define the semantics the SIMD lane is
// equivalence-tested against: per output element the k index ascends, one
// multiply and one add per step (no fusion; the build disables fp-contract).

namespace stlane::kernels::detail {

template <class T>
void gemm_nn_ref(int64_t m, int64_t n, int64_t k, const T* a, int64_t lda, const T* b,
                 int64_t ldb, T* c, int64_t ldc) {
  constexpr int64_t JB = 1024, LB = 128;  // keep the streamed B block L2-resident
  for (int64_t j0 = 0; j0 < n; j0 += JB) {
    const int64_t j1 = j0 + JB < n ? j0 + JB : n;
    for (int64_t l0 = 0; l0 < k; l0 += LB) {
      const int64_t l1 = l0 + LB < k ? l0 + LB : k;
      for (int64_t i = 0; i < m; ++i) {
        T* crow = c + i * ldc;
        const T* arow = a + i * lda;
        for (int64_t l = l0; l < l1; ++l) {
          const T av = arow[l];
          const T* brow = b + l * ldb;
          for (int64_t j = j0; j < j1; ++j) crow[j] += av * brow[j];
        }
      }
    }
  }
}

template <class T>
void gemm_tn_ref(int64_t m, int64_t n, int64_t k, const T* a, int64_t lda, const T* b,
                 int64_t ldb, T* c, int64_t ldc) {
  constexpr int64_t JB = 1024, LB = 128;
  for (int64_t j0 = 0; j0 < n; j0 += JB) {
    const int64_t j1 = j0 + JB < n ? j0 + JB : n;
    for (int64_t l0 = 0; l0 < k; l0 += LB) {
      const int64_t l1 = l0 + LB < k ? l0 + LB : k;
      for (int64_t i = 0; i < m; ++i) {
        T* crow = c + i * ldc;
        for (int64_t l = l0; l < l1; ++l) {
          const T av = a[l * lda + i];
          const T* brow = b + l * ldb;
          for (int64_t j = j0; j < j1; ++j) crow[j] += av * brow[j];
        }
      }
    }
  }
}

template <class T>
void gemm_nt_ref(int64_t m, int64_t n, int64_t k, const T* a, int64_t lda, const T* b,
                 int64_t ldb, T* c, int64_t ldc) {
  for (int64_t i = 0; i < m; ++i) {
    const T* arow = a + i * lda;
    for (int64_t j = 0; j < n; ++j) {
      const T* brow = b + j * ldb;
      T acc = T(0);
      for (int64_t l = 0; l < k; ++l) acc += arow[l] * brow[l];
      c[i * ldc + j] += acc;
    }
  }
}

template <class T>
void relu_ref(T* x, int64_t n) {
  for (int64_t i = 0; i < n; ++i)
    if (x[i] < T(0)) x[i] = T(0);
}

template <class T>
void relu_backward_ref(T* dy, const T* y, int64_t n) {
  for (int64_t i = 0; i < n; ++i)
    if (y[i] <= T(0)) dy[i] = T(0);
}

template <class T>
void axpy_ref(int64_t n, T alpha, const T* x, T* y) {
  for (int64_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

template <class T>
double sum_ref(const T* x, int64_t n) {
  double s = 0.0;
  for (int64_t i = 0; i < n; ++i) s += static_cast<double>(x[i]);
  return s;
}

}  // namespace stlane::kernels::detail
