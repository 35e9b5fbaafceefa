#pragma once

#include <vector>

#include "stlane/config.hpp"
#include "stlane/nn_core.hpp"
#include "stlane/recurrent.hpp"

namespace stlane {

// Per-frame intermediates of the attention module, exposed for tests and the
// visualization CLI. w entries are nonnegative and sum to 1 per frame.
template <class T>
struct AttentionTrace {
  std::vector<TensorT<T>> x;     // reduced bottleneck, length D
  std::vector<TensorT<T>> z;     // pre-attention signal
  std::vector<TensorT<T>> w;     // attention weights
  std::vector<TensorT<T>> xbar;  // weighted output
  std::vector<TensorT<T>> h;     // extractor hidden state after each frame
  TensorT<T> h_final;
  TensorT<T> x_out;  // c3 x map_h x map_w
};

template <class T>
struct AttStepCache {
  TensorT<T> x, h_prev, z, a, w, xbar;
};

template <class T>
struct AttentionCache {
  std::vector<AttStepCache<T>> steps;
  std::vector<LstmStepCache<T>> lstm_steps;
  std::vector<GruStepCache<T>> gru_steps;
  Conv2dCache<T> k_out;
  int64_t map_h = 0, map_w = 0;
};

// 1x1 reduction of the bottleneck to one channel, flattened row-major.
template <class T>
TensorT<T> reduce_bottleneck(const TensorT<T>& x_down4, const ParamStore<T>& params,
                             Conv2dCache<T>* cache);

// z = U.x + H.h_prev, w = softmax(W.z), xbar = w * x; the application of
// U/H/W is scalar (tem), elementwise (st) or affine (stfc).
template <class T>
void attention_step(const TensorT<T>& x, const TensorT<T>& h_prev, AttentionVariant variant,
                    const ParamStore<T>& params, TensorT<T>& w, TensorT<T>& xbar,
                    AttStepCache<T>* cache, int frame_index = 0);

// Runs the N-frame loop (attention_step then extractor step) and expands the
// final hidden state through the 1x1 output conv. xs are the reduced
// bottleneck vectors in frame order.
template <class T>
TensorT<T> attention_forward(const std::vector<TensorT<T>>& xs, const TensorT<T>& h0,
                             const TensorT<T>& c0, AttentionVariant variant, Extractor extractor,
                             const ParamStore<T>& params, int64_t map_h, int64_t map_w,
                             AttentionTrace<T>* trace, AttentionCache<T>* cache,
                             RecurrentState<T>* final_state = nullptr);

// BPTT over the frame loop; returns d(xs) per frame and accumulates all
// attention/extractor/conv parameter gradients.
template <class T>
std::vector<TensorT<T>> attention_backward(const TensorT<T>& d_x_out, AttentionVariant variant,
                                           Extractor extractor, ParamStore<T>& params,
                                           const AttentionCache<T>& cache);

}  // namespace stlane
