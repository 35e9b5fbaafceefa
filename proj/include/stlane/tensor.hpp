#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace stlane {

// Dense n-d array, row-major (last index fastest). Carrier for activations,
// parameters and gradients. Instantiated for float (training/inference) and
// double (the finite-difference check harness).
template <class T>
struct TensorT {
  std::vector<int64_t> shape;
  std::vector<T> data;

  TensorT() = default;
  explicit TensorT(std::vector<int64_t> s) : shape(std::move(s)) {
    data.assign(static_cast<size_t>(count(shape)), T(0));
  }
  TensorT(std::vector<int64_t> s, std::vector<T> d) : shape(std::move(s)), data(std::move(d)) {
    if (count(shape) != static_cast<int64_t>(data.size()))
      throw std::invalid_argument("tensor: shape/data size mismatch");
  }

  static int64_t count(const std::vector<int64_t>& s) {
    int64_t n = 1;
    for (int64_t e : s) {
      if (e <= 0) throw std::invalid_argument("tensor: nonpositive extent");
      n *= e;
    }
    return n;
  }

  static TensorT zeros(std::vector<int64_t> s) { return TensorT(std::move(s)); }
  static TensorT full(std::vector<int64_t> s, T v) {
    TensorT t(std::move(s));
    t.fill(v);
    return t;
  }

  int64_t numel() const { return static_cast<int64_t>(data.size()); }
  int rank() const { return static_cast<int>(shape.size()); }
  int64_t dim(int i) const { return shape.at(static_cast<size_t>(i)); }

  T* ptr() { return data.data(); }
  const T* ptr() const { return data.data(); }

  void fill(T v) { std::fill(data.begin(), data.end(), v); }
  void zero() { fill(T(0)); }

  T& operator()(int64_t i) { return data[static_cast<size_t>(i)]; }
  T operator()(int64_t i) const { return data[static_cast<size_t>(i)]; }
  T& operator()(int64_t i, int64_t j) { return data[static_cast<size_t>(i * shape[1] + j)]; }
  T operator()(int64_t i, int64_t j) const { return data[static_cast<size_t>(i * shape[1] + j)]; }
  T& operator()(int64_t i, int64_t j, int64_t k) {
    return data[static_cast<size_t>((i * shape[1] + j) * shape[2] + k)];
  }
  T operator()(int64_t i, int64_t j, int64_t k) const {
    return data[static_cast<size_t>((i * shape[1] + j) * shape[2] + k)];
  }
  T& operator()(int64_t i, int64_t j, int64_t k, int64_t l) {
    return data[static_cast<size_t>(((i * shape[1] + j) * shape[2] + k) * shape[3] + l)];
  }
  T operator()(int64_t i, int64_t j, int64_t k, int64_t l) const {
    return data[static_cast<size_t>(((i * shape[1] + j) * shape[2] + k) * shape[3] + l)];
  }

  bool same_shape(const TensorT& o) const { return shape == o.shape; }

  bool all_finite() const {
    for (T v : data)
      if (!std::isfinite(static_cast<double>(v))) return false;
    return true;
  }

  template <class U>
  TensorT<U> cast() const {
    TensorT<U> out;
    out.shape = shape;
    out.data.resize(data.size());
    for (size_t i = 0; i < data.size(); ++i) out.data[i] = static_cast<U>(data[i]);
    return out;
  }

  // Reinterprets the flat buffer under a new shape of equal element count.
  TensorT reshaped(std::vector<int64_t> s) const {
    if (count(s) != numel()) throw std::invalid_argument("tensor: reshape count mismatch");
    return TensorT(std::move(s), data);
  }
};

using Tensor = TensorT<float>;
using TensorD = TensorT<double>;

std::string shape_str(const std::vector<int64_t>& s);

// Binary segmentation mask; nonzero = lane.
struct LaneMask {
  int64_t height = 0;
  int64_t width = 0;
  std::vector<uint8_t> data;

  LaneMask() = default;
  LaneMask(int64_t h, int64_t w) : height(h), width(w), data(static_cast<size_t>(h * w), 0) {}

  uint8_t& at(int64_t r, int64_t c) { return data[static_cast<size_t>(r * width + c)]; }
  uint8_t at(int64_t r, int64_t c) const { return data[static_cast<size_t>(r * width + c)]; }
  int64_t numel() const { return height * width; }
  int64_t lane_count() const {
    int64_t n = 0;
    for (uint8_t v : data) n += (v != 0);
    return n;
  }
  bool operator==(const LaneMask& o) const {
    return height == o.height && width == o.width && data == o.data;
  }
};

}  // namespace stlane
