// AVX2/FMA lane. Same k-accumulation order as the scalar reference; the only
// difference is fused multiply-add, so per-element results agree to rounding.

#include <cstdint>
#include <immintrin.h>

#include "avx2_decls.hpp"
#include "ref_impl.hpp"

namespace stlane::kernels::detail {
namespace {

struct v8f {
  __m256 v;
  using scalar = float;
  static constexpr int width = 8;
  static v8f load(const float* p) { return {_mm256_loadu_ps(p)}; }
  static v8f zero() { return {_mm256_setzero_ps()}; }
  static v8f broadcast(float s) { return {_mm256_set1_ps(s)}; }
  void store(float* p) const { _mm256_storeu_ps(p, v); }
  static v8f fmadd(v8f a, v8f b, v8f c) { return {_mm256_fmadd_ps(a.v, b.v, c.v)}; }
  float hsum() const {
    __m128 lo = _mm256_castps256_ps128(v);
    __m128 hi = _mm256_extractf128_ps(v, 1);
    __m128 s = _mm_add_ps(lo, hi);
    s = _mm_add_ps(s, _mm_movehl_ps(s, s));
    s = _mm_add_ss(s, _mm_shuffle_ps(s, s, 1));
    return _mm_cvtss_f32(s);
  }
};

struct v4d {
  __m256d v;
  using scalar = double;
  static constexpr int width = 4;
  static v4d load(const double* p) { return {_mm256_loadu_pd(p)}; }
  static v4d zero() { return {_mm256_setzero_pd()}; }
  static v4d broadcast(double s) { return {_mm256_set1_pd(s)}; }
  void store(double* p) const { _mm256_storeu_pd(p, v); }
  static v4d fmadd(v4d a, v4d b, v4d c) { return {_mm256_fmadd_pd(a.v, b.v, c.v)}; }
  double hsum() const {
    __m128d lo = _mm256_castpd256_pd128(v);
    __m128d hi = _mm256_extractf128_pd(v, 1);
    __m128d s = _mm_add_pd(lo, hi);
    s = _mm_add_sd(s, _mm_unpackhi_pd(s, s));
    return _mm_cvtsd_f64(s);
  }
};

// C += op(A)*B microkernel: 4 rows by 2 vectors, k innermost.
// TA selects A(i,l) = a[l*lda+i] (transposed) vs a[i*lda+l].
template <class V, bool TA>
void gemm_ab(int64_t m, int64_t n, int64_t k, const typename V::scalar* a, int64_t lda,
             const typename V::scalar* b, int64_t ldb, typename V::scalar* c, int64_t ldc) {
  using S = typename V::scalar;
  constexpr int64_t W = V::width;
  const int64_t nv = n & ~(2 * W - 1);
  auto at = [&](int64_t i, int64_t l) -> S { return TA ? a[l * lda + i] : a[i * lda + l]; };

  int64_t i = 0;
  for (; i + 4 <= m; i += 4) {
    for (int64_t j = 0; j < nv; j += 2 * W) {
      S* c0 = c + (i + 0) * ldc + j;
      S* c1 = c + (i + 1) * ldc + j;
      S* c2 = c + (i + 2) * ldc + j;
      S* c3 = c + (i + 3) * ldc + j;
      V a00 = V::load(c0), a01 = V::load(c0 + W);
      V a10 = V::load(c1), a11 = V::load(c1 + W);
      V a20 = V::load(c2), a21 = V::load(c2 + W);
      V a30 = V::load(c3), a31 = V::load(c3 + W);
      for (int64_t l = 0; l < k; ++l) {
        const V b0 = V::load(b + l * ldb + j);
        const V b1 = V::load(b + l * ldb + j + W);
        V s;
        s = V::broadcast(at(i + 0, l));
        a00 = V::fmadd(s, b0, a00);
        a01 = V::fmadd(s, b1, a01);
        s = V::broadcast(at(i + 1, l));
        a10 = V::fmadd(s, b0, a10);
        a11 = V::fmadd(s, b1, a11);
        s = V::broadcast(at(i + 2, l));
        a20 = V::fmadd(s, b0, a20);
        a21 = V::fmadd(s, b1, a21);
        s = V::broadcast(at(i + 3, l));
        a30 = V::fmadd(s, b0, a30);
        a31 = V::fmadd(s, b1, a31);
      }
      a00.store(c0);
      a01.store(c0 + W);
      a10.store(c1);
      a11.store(c1 + W);
      a20.store(c2);
      a21.store(c2 + W);
      a30.store(c3);
      a31.store(c3 + W);
    }
    // column tail, scalar
    for (int64_t r = 0; r < 4; ++r) {
      S* crow = c + (i + r) * ldc;
      for (int64_t l = 0; l < k; ++l) {
        const S av = at(i + r, l);
        const S* brow = b + l * ldb;
        for (int64_t j = nv; j < n; ++j) crow[j] += av * brow[j];
      }
    }
  }
  // row tail
  if (i < m) {
    if (TA)
      gemm_tn_ref(m - i, n, k, a + i, lda, b, ldb, c + i * ldc, ldc);
    else
      gemm_nn_ref(m - i, n, k, a + i * lda, lda, b, ldb, c + i * ldc, ldc);
  }
}

// C += A*B^T: row-by-row dot products, vectorized over k.
template <class V>
void gemm_nt_simd(int64_t m, int64_t n, int64_t k, const typename V::scalar* a, int64_t lda,
                  const typename V::scalar* b, int64_t ldb, typename V::scalar* c, int64_t ldc) {
  using S = typename V::scalar;
  constexpr int64_t W = V::width;
  const int64_t kv = k & ~(W - 1);
  for (int64_t i = 0; i < m; ++i) {
    const S* arow = a + i * lda;
    int64_t j = 0;
    for (; j + 4 <= n; j += 4) {
      V acc0 = V::zero(), acc1 = V::zero(), acc2 = V::zero(), acc3 = V::zero();
      const S* b0 = b + (j + 0) * ldb;
      const S* b1 = b + (j + 1) * ldb;
      const S* b2 = b + (j + 2) * ldb;
      const S* b3 = b + (j + 3) * ldb;
      for (int64_t l = 0; l < kv; l += W) {
        const V va = V::load(arow + l);
        acc0 = V::fmadd(va, V::load(b0 + l), acc0);
        acc1 = V::fmadd(va, V::load(b1 + l), acc1);
        acc2 = V::fmadd(va, V::load(b2 + l), acc2);
        acc3 = V::fmadd(va, V::load(b3 + l), acc3);
      }
      S s0 = acc0.hsum(), s1 = acc1.hsum(), s2 = acc2.hsum(), s3 = acc3.hsum();
      for (int64_t l = kv; l < k; ++l) {
        const S av = arow[l];
        s0 += av * b0[l];
        s1 += av * b1[l];
        s2 += av * b2[l];
        s3 += av * b3[l];
      }
      c[i * ldc + j + 0] += s0;
      c[i * ldc + j + 1] += s1;
      c[i * ldc + j + 2] += s2;
      c[i * ldc + j + 3] += s3;
    }
    for (; j < n; ++j) {
      V acc = V::zero();
      const S* brow = b + j * ldb;
      for (int64_t l = 0; l < kv; l += W) acc = V::fmadd(V::load(arow + l), V::load(brow + l), acc);
      S s = acc.hsum();
      for (int64_t l = kv; l < k; ++l) s += arow[l] * brow[l];
      c[i * ldc + j] += s;
    }
  }
}

}  // namespace

void gemm_nn_avx2(int64_t m, int64_t n, int64_t k, const float* a, int64_t lda, const float* b,
                  int64_t ldb, float* c, int64_t ldc) {
  gemm_ab<v8f, false>(m, n, k, a, lda, b, ldb, c, ldc);
}
void gemm_nn_avx2(int64_t m, int64_t n, int64_t k, const double* a, int64_t lda, const double* b,
                  int64_t ldb, double* c, int64_t ldc) {
  gemm_ab<v4d, false>(m, n, k, a, lda, b, ldb, c, ldc);
}
void gemm_tn_avx2(int64_t m, int64_t n, int64_t k, const float* a, int64_t lda, const float* b,
                  int64_t ldb, float* c, int64_t ldc) {
  gemm_ab<v8f, true>(m, n, k, a, lda, b, ldb, c, ldc);
}
void gemm_tn_avx2(int64_t m, int64_t n, int64_t k, const double* a, int64_t lda, const double* b,
                  int64_t ldb, double* c, int64_t ldc) {
  gemm_ab<v4d, true>(m, n, k, a, lda, b, ldb, c, ldc);
}
void gemm_nt_avx2(int64_t m, int64_t n, int64_t k, const float* a, int64_t lda, const float* b,
                  int64_t ldb, float* c, int64_t ldc) {
  gemm_nt_simd<v8f>(m, n, k, a, lda, b, ldb, c, ldc);
}
void gemm_nt_avx2(int64_t m, int64_t n, int64_t k, const double* a, int64_t lda, const double* b,
                  int64_t ldb, double* c, int64_t ldc) {
  gemm_nt_simd<v4d>(m, n, k, a, lda, b, ldb, c, ldc);
}

void relu_avx2(float* x, int64_t n) {
  const __m256 z = _mm256_setzero_ps();
  int64_t i = 0;
  for (; i + 8 <= n; i += 8) _mm256_storeu_ps(x + i, _mm256_max_ps(_mm256_loadu_ps(x + i), z));
  for (; i < n; ++i)
    if (x[i] < 0.0f) x[i] = 0.0f;
}
void relu_avx2(double* x, int64_t n) { relu_ref(x, n); }

void relu_backward_avx2(float* dy, const float* y, int64_t n) {
  const __m256 z = _mm256_setzero_ps();
  int64_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256 mask = _mm256_cmp_ps(_mm256_loadu_ps(y + i), z, _CMP_GT_OQ);
    _mm256_storeu_ps(dy + i, _mm256_and_ps(_mm256_loadu_ps(dy + i), mask));
  }
  for (; i < n; ++i)
    if (y[i] <= 0.0f) dy[i] = 0.0f;
}
void relu_backward_avx2(double* dy, const double* y, int64_t n) { relu_backward_ref(dy, y, n); }

void axpy_avx2(int64_t n, float alpha, const float* x, float* y) {
  const __m256 va = _mm256_set1_ps(alpha);
  int64_t i = 0;
  for (; i + 8 <= n; i += 8)
    _mm256_storeu_ps(y + i, _mm256_fmadd_ps(va, _mm256_loadu_ps(x + i), _mm256_loadu_ps(y + i)));
  for (; i < n; ++i) y[i] += alpha * x[i];
}
void axpy_avx2(int64_t n, double alpha, const double* x, double* y) {
  const __m256d va = _mm256_set1_pd(alpha);
  int64_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(y + i, _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
  for (; i < n; ++i) y[i] += alpha * x[i];
}

}  // namespace stlane::kernels::detail
