#include "stlane/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <cstring>

#include "stlane/parallel.hpp"
#include "ref_impl.hpp"
#ifdef STLANE_HAVE_AVX2_TU
#include "avx2_decls.hpp"
#endif

namespace stlane::kernels {
namespace {

Backend resolve_backend() {
  if (const char* env = std::getenv("STLANE_KERNEL")) {
    if (std::strcmp(env, "scalar") == 0) return Backend::scalar;
    if (std::strcmp(env, "avx2") == 0 && avx2_supported()) return Backend::avx2;
  }
  return avx2_supported() ? Backend::avx2 : Backend::scalar;
}

Backend& backend_slot() {
  static Backend b = resolve_backend();
  return b;
}

// Below this many multiply-adds a GEMM runs on the calling thread.
constexpr double kParallelFlops = 1 << 18;

}  // namespace

bool avx2_supported() {
#ifdef STLANE_HAVE_AVX2_TU
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

Backend active_backend() { return backend_slot(); }

void force_backend(Backend b) {
  if (b == Backend::avx2 && !avx2_supported()) return;
  backend_slot() = b;
}

const char* backend_name(Backend b) { return b == Backend::avx2 ? "avx2" : "scalar"; }

namespace {

template <class T>
void gemm_nn_1t(bool simd, int64_t m, int64_t n, int64_t k, const T* a, int64_t lda, const T* b,
                int64_t ldb, T* c, int64_t ldc) {
#ifdef STLANE_HAVE_AVX2_TU
  if (simd) {
    detail::gemm_nn_avx2(m, n, k, a, lda, b, ldb, c, ldc);
    return;
  }
#else
  (void)simd;
#endif
  detail::gemm_nn_ref(m, n, k, a, lda, b, ldb, c, ldc);
}

template <class T>
void gemm_tn_1t(bool simd, int64_t m, int64_t n, int64_t k, const T* a, int64_t lda, const T* b,
                int64_t ldb, T* c, int64_t ldc) {
#ifdef STLANE_HAVE_AVX2_TU
  if (simd) {
    detail::gemm_tn_avx2(m, n, k, a, lda, b, ldb, c, ldc);
    return;
  }
#else
  (void)simd;
#endif
  detail::gemm_tn_ref(m, n, k, a, lda, b, ldb, c, ldc);
}

template <class T>
void gemm_nt_1t(bool simd, int64_t m, int64_t n, int64_t k, const T* a, int64_t lda, const T* b,
                int64_t ldb, T* c, int64_t ldc) {
#ifdef STLANE_HAVE_AVX2_TU
  if (simd) {
    detail::gemm_nt_avx2(m, n, k, a, lda, b, ldb, c, ldc);
    return;
  }
#else
  (void)simd;
#endif
  detail::gemm_nt_ref(m, n, k, a, lda, b, ldb, c, ldc);
}

}  // namespace

template <class T>
void gemm_nn(int64_t m, int64_t n, int64_t k, const T* a, int64_t lda, const T* b, int64_t ldb,
             T* c, int64_t ldc) {
  const bool simd = active_backend() == Backend::avx2;
  const double work = double(m) * double(n) * double(k);
  if (work < kParallelFlops) {
    gemm_nn_1t(simd, m, n, k, a, lda, b, ldb, c, ldc);
  } else if (m >= n) {
    parallel_for(0, m, 4, [&](int64_t i0, int64_t i1) {
      gemm_nn_1t(simd, i1 - i0, n, k, a + i0 * lda, lda, b, ldb, c + i0 * ldc, ldc);
    });
  } else {
    parallel_for(0, n, 16, [&](int64_t j0, int64_t j1) {
      gemm_nn_1t(simd, m, j1 - j0, k, a, lda, b + j0, ldb, c + j0, ldc);
    });
  }
}

template <class T>
void gemm_tn(int64_t m, int64_t n, int64_t k, const T* a, int64_t lda, const T* b, int64_t ldb,
             T* c, int64_t ldc) {
  const bool simd = active_backend() == Backend::avx2;
  const double work = double(m) * double(n) * double(k);
  if (work < kParallelFlops) {
    gemm_tn_1t(simd, m, n, k, a, lda, b, ldb, c, ldc);
  } else if (m >= n) {
    parallel_for(0, m, 4, [&](int64_t i0, int64_t i1) {
      gemm_tn_1t(simd, i1 - i0, n, k, a + i0, lda, b, ldb, c + i0 * ldc, ldc);
    });
  } else {
    parallel_for(0, n, 16, [&](int64_t j0, int64_t j1) {
      gemm_tn_1t(simd, m, j1 - j0, k, a, lda, b + j0, ldb, c + j0, ldc);
    });
  }
}

template <class T>
void gemm_nt(int64_t m, int64_t n, int64_t k, const T* a, int64_t lda, const T* b, int64_t ldb,
             T* c, int64_t ldc) {
  const bool simd = active_backend() == Backend::avx2;
  const double work = double(m) * double(n) * double(k);
  if (work < kParallelFlops) {
    gemm_nt_1t(simd, m, n, k, a, lda, b, ldb, c, ldc);
  } else if (m >= n) {
    parallel_for(0, m, 2, [&](int64_t i0, int64_t i1) {
      gemm_nt_1t(simd, i1 - i0, n, k, a + i0 * lda, lda, b, ldb, c + i0 * ldc, ldc);
    });
  } else {
    parallel_for(0, n, 8, [&](int64_t j0, int64_t j1) {
      gemm_nt_1t(simd, m, j1 - j0, k, a, lda, b + j0 * ldb, ldb, c + j0, ldc);
    });
  }
}

template <class T>
void relu(T* x, int64_t n) {
#ifdef STLANE_HAVE_AVX2_TU
  if (active_backend() == Backend::avx2) {
    detail::relu_avx2(x, n);
    return;
  }
#endif
  detail::relu_ref(x, n);
}

template <class T>
void relu_backward(T* dy, const T* y, int64_t n) {
#ifdef STLANE_HAVE_AVX2_TU
  if (active_backend() == Backend::avx2) {
    detail::relu_backward_avx2(dy, y, n);
    return;
  }
#endif
  detail::relu_backward_ref(dy, y, n);
}

template <class T>
void axpy(int64_t n, T alpha, const T* x, T* y) {
#ifdef STLANE_HAVE_AVX2_TU
  if (active_backend() == Backend::avx2) {
    detail::axpy_avx2(n, alpha, x, y);
    return;
  }
#endif
  detail::axpy_ref(n, alpha, x, y);
}

template <class T>
double sum(const T* x, int64_t n) {
  return detail::sum_ref(x, n);
}

template <class T>
void softmax_vec(const T* x, T* out, int64_t n) {
  T mx = x[0];
  for (int64_t i = 1; i < n; ++i) mx = std::max(mx, x[i]);
  double s = 0.0;
  for (int64_t i = 0; i < n; ++i) s += std::exp(static_cast<double>(x[i] - mx));
  for (int64_t i = 0; i < n; ++i)
    out[i] = static_cast<T>(std::exp(static_cast<double>(x[i] - mx)) / s);
}

#define STLANE_INSTANTIATE(T)                                                                   \
  template void gemm_nn<T>(int64_t, int64_t, int64_t, const T*, int64_t, const T*, int64_t, T*, \
                           int64_t);                                                            \
  template void gemm_tn<T>(int64_t, int64_t, int64_t, const T*, int64_t, const T*, int64_t, T*, \
                           int64_t);                                                            \
  template void gemm_nt<T>(int64_t, int64_t, int64_t, const T*, int64_t, const T*, int64_t, T*, \
                           int64_t);                                                            \
  template void relu<T>(T*, int64_t);                                                           \
  template void relu_backward<T>(T*, const T*, int64_t);                                        \
  template void axpy<T>(int64_t, T, const T*, T*);                                              \
  template double sum<T>(const T*, int64_t);                                                    \
  template void softmax_vec<T>(const T*, T*, int64_t);

STLANE_INSTANTIATE(float)
STLANE_INSTANTIATE(double)
#undef STLANE_INSTANTIATE

}  // namespace stlane::kernels
