#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <vector>

#include "stlane/kernels.hpp"
#include "stlane/parallel.hpp"
#include "stlane/prng.hpp"
#include "testutil.hpp"

using namespace stlane;

namespace {

// plain triple loop, the oracle both lanes are checked against
template <class T>
std::vector<T> naive_gemm(char mode, int64_t m, int64_t n, int64_t k, const std::vector<T>& a,
                          const std::vector<T>& b, const std::vector<T>& c0) {
  std::vector<T> c = c0;
  for (int64_t i = 0; i < m; ++i)
    for (int64_t j = 0; j < n; ++j) {
      double acc = 0;
      for (int64_t l = 0; l < k; ++l) {
        const double av = mode == 't' ? a[size_t(l * m + i)] : a[size_t(i * k + l)];
        const double bv = mode == 'n' ? b[size_t(l * n + j)]
                          : mode == 't' ? b[size_t(l * n + j)]
                                        : b[size_t(j * k + l)];
        acc += av * bv;
      }
      c[size_t(i * n + j)] += static_cast<T>(acc);
    }
  return c;
}

template <class T>
void check_gemm_all_modes(kernels::Backend backend, double tol) {
  const auto saved = kernels::active_backend();
  kernels::force_backend(backend);
  SplitMix64 rng(42);
  const int64_t sizes[][3] = {{1, 1, 1},   {3, 5, 7},    {4, 16, 9},  {5, 33, 24},
                              {17, 2, 64}, {64, 100, 27}, {2, 130, 576}};
  for (const auto& s : sizes) {
    const int64_t m = s[0], n = s[1], k = s[2];
    auto a = testutil::random_tensor<T>({m * k}, rng).data;
    auto at = testutil::random_tensor<T>({k * m}, rng).data;
    auto b = testutil::random_tensor<T>({k * n}, rng).data;
    auto bt = testutil::random_tensor<T>({n * k}, rng).data;
    auto c0 = testutil::random_tensor<T>({m * n}, rng).data;

    auto c = c0;
    kernels::gemm_nn(m, n, k, a.data(), k, b.data(), n, c.data(), n);
    auto want = naive_gemm<T>('n', m, n, k, a, b, c0);
    for (size_t i = 0; i < c.size(); ++i)
      CHECK(testutil::rel_err(c[i], want[i]) < tol);

    c = c0;
    kernels::gemm_tn(m, n, k, at.data(), m, b.data(), n, c.data(), n);
    want = naive_gemm<T>('t', m, n, k, at, b, c0);
    for (size_t i = 0; i < c.size(); ++i)
      CHECK(testutil::rel_err(c[i], want[i]) < tol);

    c = c0;
    kernels::gemm_nt(m, n, k, a.data(), k, bt.data(), k, c.data(), n);
    want = naive_gemm<T>('x', m, n, k, a, bt, c0);
    for (size_t i = 0; i < c.size(); ++i)
      CHECK(testutil::rel_err(c[i], want[i]) < tol);
  }
  kernels::force_backend(saved);
}

}  // namespace

TEST_CASE("scalar gemm matches the naive oracle (float/double)") {
  check_gemm_all_modes<float>(kernels::Backend::scalar, 2e-5);
  check_gemm_all_modes<double>(kernels::Backend::scalar, 1e-12);
}

TEST_CASE("avx2 gemm matches the naive oracle when available") {
  if (!kernels::avx2_supported()) return;
  check_gemm_all_modes<float>(kernels::Backend::avx2, 2e-5);
  check_gemm_all_modes<double>(kernels::Backend::avx2, 1e-12);
}

TEST_CASE("scalar and avx2 lanes agree within rounding") {
  if (!kernels::avx2_supported()) return;
  SplitMix64 rng(7);
  const int64_t m = 37, n = 53, k = 191;
  auto a = testutil::random_tensor<float>({m * k}, rng).data;
  auto b = testutil::random_tensor<float>({k * n}, rng).data;
  std::vector<float> c_scalar(size_t(m * n), 0.0f), c_avx2 = c_scalar;

  kernels::force_backend(kernels::Backend::scalar);
  kernels::gemm_nn(m, n, k, a.data(), k, b.data(), n, c_scalar.data(), n);
  kernels::force_backend(kernels::Backend::avx2);
  kernels::gemm_nn(m, n, k, a.data(), k, b.data(), n, c_avx2.data(), n);
  kernels::force_backend(kernels::Backend::scalar);

  for (size_t i = 0; i < c_scalar.size(); ++i)
    CHECK(testutil::rel_err(c_scalar[i], c_avx2[i]) < 1e-5);
}

TEST_CASE("each lane is bitwise reproducible run to run") {
  SplitMix64 rng(11);
  const int64_t m = 19, n = 31, k = 67;
  auto a = testutil::random_tensor<float>({m * k}, rng).data;
  auto b = testutil::random_tensor<float>({k * n}, rng).data;
  for (auto backend : {kernels::Backend::scalar, kernels::Backend::avx2}) {
    if (backend == kernels::Backend::avx2 && !kernels::avx2_supported()) continue;
    kernels::force_backend(backend);
    std::vector<float> c1(size_t(m * n), 0.0f), c2 = c1;
    kernels::gemm_nn(m, n, k, a.data(), k, b.data(), n, c1.data(), n);
    kernels::gemm_nn(m, n, k, a.data(), k, b.data(), n, c2.data(), n);
    CHECK(c1 == c2);
  }
  kernels::force_backend(kernels::Backend::scalar);
}

TEST_CASE("relu and relu_backward") {
  for (auto backend : {kernels::Backend::scalar, kernels::Backend::avx2}) {
    if (backend == kernels::Backend::avx2 && !kernels::avx2_supported()) continue;
    kernels::force_backend(backend);
    std::vector<float> x = {-1.0f, 0.0f, 2.5f, -0.25f, 3.0f, -7.0f, 0.5f, 1.0f, -2.0f};
    std::vector<float> y = x;
    kernels::relu(y.data(), int64_t(y.size()));
    for (size_t i = 0; i < x.size(); ++i) CHECK(y[i] == std::max(0.0f, x[i]));
    std::vector<float> dy(x.size(), 1.0f);
    kernels::relu_backward(dy.data(), y.data(), int64_t(y.size()));
    for (size_t i = 0; i < x.size(); ++i) CHECK(dy[i] == (y[i] > 0.0f ? 1.0f : 0.0f));
  }
  kernels::force_backend(kernels::Backend::scalar);
}

TEST_CASE("softmax_vec: uniform, analytic pair, formula oracle") {
  std::vector<double> u(128, 3.25), w(128);
  kernels::softmax_vec(u.data(), w.data(), 128);
  for (double v : w) CHECK(testutil::close(v, 1.0 / 128.0, 1e-15));

  // (0, ln 3) -> (0.25, 0.75)
  std::vector<double> pair = {0.0, std::log(3.0)}, pw(2);
  kernels::softmax_vec(pair.data(), pw.data(), 2);
  CHECK(testutil::close(pw[0], 0.25, 1e-12));
  CHECK(testutil::close(pw[1], 0.75, 1e-12));

  SplitMix64 rng(3);
  std::vector<double> x(7), got(7);
  for (auto& v : x) v = rng.uniform(-4.0, 4.0);
  kernels::softmax_vec(x.data(), got.data(), 7);
  double denom = 0;
  for (double v : x) denom += std::exp(v);
  for (int i = 0; i < 7; ++i) CHECK(testutil::close(got[size_t(i)], std::exp(x[size_t(i)]) / denom, 1e-12));
}

TEST_CASE("softmax shift invariance (double, 1e-10)") {
  SplitMix64 rng(5);
  for (int rep = 0; rep < 100; ++rep) {
    std::vector<double> x(128), xs(128), w0(128), w1(128);
    const double shift = rng.uniform(-50.0, 50.0);
    for (int i = 0; i < 128; ++i) {
      x[size_t(i)] = rng.uniform(-5.0, 5.0);
      xs[size_t(i)] = x[size_t(i)] + shift;
    }
    kernels::softmax_vec(x.data(), w0.data(), 128);
    kernels::softmax_vec(xs.data(), w1.data(), 128);
    for (int i = 0; i < 128; ++i) CHECK(std::abs(w0[size_t(i)] - w1[size_t(i)]) < 1e-10);
  }
}

TEST_CASE("parallel_for covers the range exactly once") {
  std::vector<int> hits(1000, 0);
  parallel_for(0, 1000, 1, [&](int64_t b, int64_t e) {
    for (int64_t i = b; i < e; ++i) hits[size_t(i)]++;
  });
  for (int h : hits) CHECK(h == 1);
}
