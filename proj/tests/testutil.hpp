#pragma once

#include <cmath>
#include <vector>

#include "stlane/prng.hpp"
#include "stlane/tensor.hpp"

namespace testutil {

template <class T>
stlane::TensorT<T> random_tensor(std::vector<int64_t> shape, stlane::SplitMix64& rng,
                                 double lo = -1.0, double hi = 1.0) {
  stlane::TensorT<T> t(std::move(shape));
  for (auto& v : t.data) v = static_cast<T>(rng.uniform(lo, hi));
  return t;
}

inline stlane::LaneMask random_mask(int64_t h, int64_t w, stlane::SplitMix64& rng,
                                    double p = 0.3) {
  stlane::LaneMask m(h, w);
  for (auto& v : m.data) v = rng.bernoulli(p) ? 1 : 0;
  return m;
}

inline bool close(double a, double b, double tol) { return std::abs(a - b) <= tol; }

inline double rel_err(double got, double want) {
  const double denom = std::max({std::abs(got), std::abs(want), 1e-12});
  return std::abs(got - want) / denom;
}

// Finite-difference vs analytic agreement: relative where the magnitudes are
// meaningful, absolute floor below it.
inline bool grad_match(double analytic, double fd, double rel_tol, double abs_floor = 1e-8) {
  if (std::abs(analytic - fd) <= abs_floor) return true;
  return std::abs(analytic - fd) <= rel_tol * std::max(std::abs(analytic), std::abs(fd));
}

}  // namespace testutil
