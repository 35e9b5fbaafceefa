#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "stlane/kernels.hpp"
#include "stlane/tensor.hpp"

namespace stlane {

// One convolution layer as a row of the layer schedule.
struct ConvSpec {
  int64_t in_channels = 0;
  int64_t out_channels = 0;
  int64_t kh = 3, kw = 3;
  int64_t ph = 1, pw = 1;
  int64_t stride = 1;
  bool has_bias = true;
  bool relu = false;
  std::string name;  // layer-qualified, used in diagnostics
};

inline int64_t conv_out_extent(int64_t in, int64_t k, int64_t p, int64_t s) {
  return (in + 2 * p - k) / s + 1;
}

template <class T>
struct Conv2dCache {
  TensorT<T> input;   // needed for the weight gradient
  TensorT<T> output;  // kept only for ReLU layers (backward mask)
};

// Cross-correlation (no kernel flip). Bias per output channel, optional ReLU.
template <class T>
TensorT<T> conv2d_forward(const TensorT<T>& x, const ConvSpec& spec, const TensorT<T>& weight,
                          const TensorT<T>* bias, Conv2dCache<T>* cache);

// Returns dx; accumulates into dweight/dbias.
template <class T>
TensorT<T> conv2d_backward(const TensorT<T>& dy, const ConvSpec& spec, const TensorT<T>& weight,
                           const Conv2dCache<T>& cache, TensorT<T>& dweight, TensorT<T>* dbias);

// 2x2/stride-2 max pooling; ties resolve to the first element in scan order.
// argmax records the flat input index each output element came from.
template <class T>
TensorT<T> maxpool2x2_forward(const TensorT<T>& x, std::vector<int32_t>* argmax);

template <class T>
TensorT<T> maxpool2x2_backward(const TensorT<T>& dy, const std::vector<int32_t>& argmax,
                               int64_t in_h, int64_t in_w);

// Half-pixel-center sampling with edge clamp; exact on constants.
template <class T>
TensorT<T> upsample_bilinear2x_forward(const TensorT<T>& x);

template <class T>
TensorT<T> upsample_bilinear2x_backward(const TensorT<T>& dy);

template <class T>
TensorT<T> softmax(const TensorT<T>& x, int axis);

template <class T>
struct LinearCache {
  TensorT<T> input;
};

template <class T>
TensorT<T> linear_forward(const TensorT<T>& x, const TensorT<T>& weight, const TensorT<T>* bias,
                          LinearCache<T>* cache);

template <class T>
TensorT<T> linear_backward(const TensorT<T>& dy, const TensorT<T>& weight,
                           const LinearCache<T>& cache, TensorT<T>& dweight, TensorT<T>* dbias);

// y += M x
template <class T>
inline void matvec_acc(const TensorT<T>& m, const TensorT<T>& x, TensorT<T>& y) {
  kernels::gemm_nt(m.dim(0), 1, m.dim(1), m.ptr(), m.dim(1), x.ptr(), m.dim(1), y.ptr(), 1);
}

// y += M^T x
template <class T>
inline void matvec_t_acc(const TensorT<T>& m, const TensorT<T>& x, TensorT<T>& y) {
  kernels::gemm_tn(m.dim(1), 1, m.dim(0), m.ptr(), m.dim(1), x.ptr(), 1, y.ptr(), 1);
}

// M += u v^T
template <class T>
inline void outer_acc(const TensorT<T>& u, const TensorT<T>& v, TensorT<T>& m) {
  kernels::gemm_nn(u.numel(), v.numel(), 1, u.ptr(), 1, v.ptr(), v.numel(), m.ptr(), v.numel());
}

template <class T>
struct Parameter {
  std::string name;
  TensorT<T> value;
  TensorT<T> grad;
};

// Named parameters in fixed insertion order. Insertion order is the layer
// schedule order and doubles as the checkpoint manifest order.
template <class T>
class ParamStore {
public:
  Parameter<T>& add(const std::string& name, std::vector<int64_t> shape);
  Parameter<T>& at(const std::string& name);
  const Parameter<T>& at(const std::string& name) const;
  bool contains(const std::string& name) const { return index_.count(name) != 0; }

  size_t size() const { return params_.size(); }
  Parameter<T>& operator[](size_t i) { return params_[i]; }
  const Parameter<T>& operator[](size_t i) const { return params_[i]; }

  void zero_grads();
  int64_t total_size() const;

  template <class U>
  ParamStore<U> cast() const {
    ParamStore<U> out;
    for (const auto& p : params_) {
      auto& q = out.add(p.name, p.value.shape);
      q.value = p.value.template cast<U>();
    }
    return out;
  }

private:
  std::vector<Parameter<T>> params_;
  std::unordered_map<std::string, size_t> index_;
};

}  // namespace stlane
