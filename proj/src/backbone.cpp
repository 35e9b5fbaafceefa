#include "stlane/backbone.hpp"

#include <stdexcept>

namespace stlane {
namespace {

template <class T>
TensorT<T> run_conv(const char* name, const TensorT<T>& x, bool relu, const ParamStore<T>& ps,
                    Conv2dCache<T>* cache) {
  const auto& weight = ps.at(std::string(name) + ".weight").value;
  ConvSpec spec;
  spec.in_channels = weight.dim(1);
  spec.out_channels = weight.dim(0);
  spec.kh = weight.dim(2);
  spec.kw = weight.dim(3);
  spec.ph = spec.kh / 2;
  spec.pw = spec.kw / 2;
  spec.relu = relu;
  spec.name = name;
  return conv2d_forward(x, spec, weight, &ps.at(std::string(name) + ".bias").value, cache);
}

template <class T>
TensorT<T> run_conv_backward(const char* name, const TensorT<T>& dy, bool relu, ParamStore<T>& ps,
                             const Conv2dCache<T>& cache) {
  auto& wparam = ps.at(std::string(name) + ".weight");
  ConvSpec spec;
  spec.in_channels = wparam.value.dim(1);
  spec.out_channels = wparam.value.dim(0);
  spec.kh = wparam.value.dim(2);
  spec.kw = wparam.value.dim(3);
  spec.ph = spec.kh / 2;
  spec.pw = spec.kw / 2;
  spec.relu = relu;
  spec.name = name;
  return conv2d_backward(dy, spec, wparam.value, cache, wparam.grad,
                         &ps.at(std::string(name) + ".bias").grad);
}

constexpr const char* kEncoderConvs[10] = {
    "In_Conv_1",     "In_Conv_2",     "Down_Conv_1_1", "Down_Conv_1_2", "Down_Conv_2_1",
    "Down_Conv_2_2", "Down_Conv_3_1", "Down_Conv_3_2", "Down_Conv_4_1", "Down_Conv_4_2"};

constexpr const char* kDecoderConvs[9] = {"Up_Conv_4_1", "Up_Conv_4_2", "Up_Conv_3_1",
                                          "Up_Conv_3_2", "Up_Conv_2_1", "Up_Conv_2_2",
                                          "Up_Conv_1_1", "Up_Conv_1_2", "Out_Conv"};

// concat [a, b] along channels
template <class T>
TensorT<T> concat_channels(const TensorT<T>& a, const TensorT<T>& b) {
  if (a.dim(1) != b.dim(1) || a.dim(2) != b.dim(2))
    throw std::invalid_argument("decode: skip spatial size mismatch: " + shape_str(a.shape) +
                                " vs " + shape_str(b.shape));
  TensorT<T> out({a.dim(0) + b.dim(0), a.dim(1), a.dim(2)});
  std::copy(a.data.begin(), a.data.end(), out.data.begin());
  std::copy(b.data.begin(), b.data.end(), out.data.begin() + a.numel());
  return out;
}

}  // namespace

template <class T>
EncoderOutput<T> encode_frame(const TensorT<T>& frame, const ParamStore<T>& params,
                              const ModelConfig& cfg, EncoderCache<T>* cache) {
  if (frame.rank() != 3 || frame.dim(0) != 3 || frame.dim(1) != cfg.height ||
      frame.dim(2) != cfg.width)
    throw std::invalid_argument("encode_frame: expected 3x" + std::to_string(cfg.height) + "x" +
                                std::to_string(cfg.width) + " frame, got " +
                                shape_str(frame.shape));
  EncoderOutput<T> out;
  auto cc = [&](int i) { return cache ? &cache->conv[static_cast<size_t>(i)] : nullptr; };

  TensorT<T> x = run_conv(kEncoderConvs[0], frame, true, params, cc(0));
  x = run_conv(kEncoderConvs[1], x, true, params, cc(1));
  for (int b = 0; b < 4; ++b) {
    out.skips[static_cast<size_t>(b)] = x;
    x = maxpool2x2_forward(x, cache ? &cache->pool_argmax[static_cast<size_t>(b)] : nullptr);
    x = run_conv(kEncoderConvs[2 + 2 * b], x, true, params, cc(2 + 2 * b));
    x = run_conv(kEncoderConvs[3 + 2 * b], x, true, params, cc(3 + 2 * b));
  }
  out.bottleneck = std::move(x);
  return out;
}

template <class T>
TensorT<T> encode_frame_backward(const TensorT<T>& d_bottleneck,
                                 const std::array<TensorT<T>, 4>* d_skips, ParamStore<T>& params,
                                 const ModelConfig& cfg, const EncoderCache<T>& cache) {
  (void)cfg;
  TensorT<T> g = d_bottleneck;
  for (int b = 3; b >= 0; --b) {
    g = run_conv_backward(kEncoderConvs[3 + 2 * b], g, true, params,
                          cache.conv[static_cast<size_t>(3 + 2 * b)]);
    g = run_conv_backward(kEncoderConvs[2 + 2 * b], g, true, params,
                          cache.conv[static_cast<size_t>(2 + 2 * b)]);
    const auto& pre_pool = cache.conv[static_cast<size_t>(b == 0 ? 1 : 2 * b + 1)].output;
    g = maxpool2x2_backward(g, cache.pool_argmax[static_cast<size_t>(b)], pre_pool.dim(1),
                            pre_pool.dim(2));
    if (d_skips && (*d_skips)[static_cast<size_t>(b)].numel() > 0)
      kernels::axpy(g.numel(), T(1), (*d_skips)[static_cast<size_t>(b)].ptr(), g.ptr());
  }
  g = run_conv_backward(kEncoderConvs[1], g, true, params, cache.conv[1]);
  return run_conv_backward(kEncoderConvs[0], g, true, params, cache.conv[0]);
}

template <class T>
TensorT<T> decode(const TensorT<T>& x_out, const std::array<TensorT<T>, 4>& skips,
                  const ParamStore<T>& params, const ModelConfig& cfg, DecoderCache<T>* cache) {
  (void)cfg;
  auto cc = [&](int i) { return cache ? &cache->conv[static_cast<size_t>(i)] : nullptr; };
  TensorT<T> x = x_out;
  for (int b = 0; b < 4; ++b) {
    x = upsample_bilinear2x_forward(x);
    x = concat_channels(x, skips[static_cast<size_t>(3 - b)]);
    x = run_conv(kDecoderConvs[2 * b], x, true, params, cc(2 * b));
    x = run_conv(kDecoderConvs[2 * b + 1], x, true, params, cc(2 * b + 1));
  }
  return run_conv(kDecoderConvs[8], x, false, params, cc(8));
}

template <class T>
void decode_backward(const TensorT<T>& dlogits, ParamStore<T>& params, const ModelConfig& cfg,
                     const DecoderCache<T>& cache, TensorT<T>& d_x_out,
                     std::array<TensorT<T>, 4>& d_skips) {
  const auto c = cfg.channels();
  const int64_t up_ch[4] = {c[3], c[2], c[1], c[0]};  // upsampled channel count per stage
  TensorT<T> g = run_conv_backward(kDecoderConvs[8], dlogits, false, params, cache.conv[8]);
  for (int b = 3; b >= 0; --b) {
    g = run_conv_backward(kDecoderConvs[2 * b + 1], g, true, params,
                          cache.conv[static_cast<size_t>(2 * b + 1)]);
    g = run_conv_backward(kDecoderConvs[2 * b], g, true, params,
                          cache.conv[static_cast<size_t>(2 * b)]);
    // split the concat gradient: [upsampled | skip]
    const int64_t uc = up_ch[b];
    const int64_t h = g.dim(1), w = g.dim(2);
    TensorT<T> g_up({uc, h, w});
    TensorT<T> g_skip({g.dim(0) - uc, h, w});
    std::copy(g.data.begin(), g.data.begin() + g_up.numel(), g_up.data.begin());
    std::copy(g.data.begin() + g_up.numel(), g.data.end(), g_skip.data.begin());
    d_skips[static_cast<size_t>(3 - b)] = std::move(g_skip);
    g = upsample_bilinear2x_backward(g_up);
  }
  d_x_out = std::move(g);
}

#define STLANE_INSTANTIATE_BACKBONE(T)                                                          \
  template EncoderOutput<T> encode_frame<T>(const TensorT<T>&, const ParamStore<T>&,            \
                                            const ModelConfig&, EncoderCache<T>*);              \
  template TensorT<T> encode_frame_backward<T>(const TensorT<T>&,                               \
                                               const std::array<TensorT<T>, 4>*, ParamStore<T>&,\
                                               const ModelConfig&, const EncoderCache<T>&);     \
  template TensorT<T> decode<T>(const TensorT<T>&, const std::array<TensorT<T>, 4>&,            \
                                const ParamStore<T>&, const ModelConfig&, DecoderCache<T>*);    \
  template void decode_backward<T>(const TensorT<T>&, ParamStore<T>&, const ModelConfig&,       \
                                   const DecoderCache<T>&, TensorT<T>&,                         \
                                   std::array<TensorT<T>, 4>&);

STLANE_INSTANTIATE_BACKBONE(float)
STLANE_INSTANTIATE_BACKBONE(double)
#undef STLANE_INSTANTIATE_BACKBONE

}  // namespace stlane
