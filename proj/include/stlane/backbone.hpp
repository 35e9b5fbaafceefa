#pragma once

#include <array>

#include "stlane/config.hpp"
#include "stlane/nn_core.hpp"

namespace stlane {

// skips[0..3] are the pre-pool activations of In_ConvBlock and
// Down_ConvBlock_1..3, concatenated into the matching decoder stages.
template <class T>
struct EncoderOutput {
  TensorT<T> bottleneck;
  std::array<TensorT<T>, 4> skips;
};

template <class T>
struct EncoderCache {
  std::array<Conv2dCache<T>, 10> conv;
  std::array<std::vector<int32_t>, 4> pool_argmax;
};

template <class T>
EncoderOutput<T> encode_frame(const TensorT<T>& frame, const ParamStore<T>& params,
                              const ModelConfig& cfg, EncoderCache<T>* cache);

// d_skips may be null for frames whose skips feed nothing. Returns d(frame).
template <class T>
TensorT<T> encode_frame_backward(const TensorT<T>& d_bottleneck,
                                 const std::array<TensorT<T>, 4>* d_skips, ParamStore<T>& params,
                                 const ModelConfig& cfg, const EncoderCache<T>& cache);

template <class T>
struct DecoderCache {
  std::array<Conv2dCache<T>, 9> conv;  // Up_Conv_4_1 .. Up_Conv_1_2, Out_Conv
};

// Four {bilinear x2, concat [upsampled, skip], conv, conv} stages, then the
// 1x1 Out_Conv with no activation.
template <class T>
TensorT<T> decode(const TensorT<T>& x_out, const std::array<TensorT<T>, 4>& skips,
                  const ParamStore<T>& params, const ModelConfig& cfg, DecoderCache<T>* cache);

template <class T>
void decode_backward(const TensorT<T>& dlogits, ParamStore<T>& params, const ModelConfig& cfg,
                     const DecoderCache<T>& cache, TensorT<T>& d_x_out,
                     std::array<TensorT<T>, 4>& d_skips);

}  // namespace stlane
