#include "stlane/attention.hpp"

#include <cmath>
#include <stdexcept>

namespace stlane {
namespace {

template <class T>
ConvSpec conv1x1_spec(const TensorT<T>& weight, const char* name) {
  ConvSpec s;
  s.in_channels = weight.dim(1);
  s.out_channels = weight.dim(0);
  s.kh = s.kw = 1;
  s.ph = s.pw = 0;
  s.relu = false;
  s.name = name;
  return s;
}

// out += U applied to v: scalar multiply, elementwise multiply, or affine map.
template <class T>
void apply_map(AttentionVariant variant, const ParamStore<T>& ps, const std::string& layer,
               const TensorT<T>& v, TensorT<T>& out) {
  const auto& wgt = ps.at(layer + ".weight").value;
  switch (variant) {
    case AttentionVariant::tem:
      kernels::axpy(v.numel(), wgt(0), v.ptr(), out.ptr());
      break;
    case AttentionVariant::st:
      for (int64_t k = 0; k < v.numel(); ++k) out(k) += wgt(k) * v(k);
      break;
    case AttentionVariant::stfc:
      kernels::axpy(v.numel(), T(1), ps.at(layer + ".bias").value.ptr(), out.ptr());
      matvec_acc(wgt, v, out);
      break;
  }
}

// d_in += transpose of the map applied to d_out; accumulates map gradients.
template <class T>
void apply_map_backward(AttentionVariant variant, ParamStore<T>& ps, const std::string& layer,
                        const TensorT<T>& v_in, const TensorT<T>& d_out, TensorT<T>& d_in) {
  auto& wparam = ps.at(layer + ".weight");
  switch (variant) {
    case AttentionVariant::tem: {
      double acc = 0;
      for (int64_t k = 0; k < v_in.numel(); ++k) acc += double(d_out(k)) * double(v_in(k));
      wparam.grad(0) += static_cast<T>(acc);
      kernels::axpy(v_in.numel(), wparam.value(0), d_out.ptr(), d_in.ptr());
      break;
    }
    case AttentionVariant::st:
      for (int64_t k = 0; k < v_in.numel(); ++k) {
        wparam.grad(k) += d_out(k) * v_in(k);
        d_in(k) += wparam.value(k) * d_out(k);
      }
      break;
    case AttentionVariant::stfc:
      outer_acc(d_out, v_in, wparam.grad);
      kernels::axpy(d_out.numel(), T(1), d_out.ptr(), ps.at(layer + ".bias").grad.ptr());
      matvec_t_acc(wparam.value, d_out, d_in);
      break;
  }
}

}  // namespace

template <class T>
TensorT<T> reduce_bottleneck(const TensorT<T>& x_down4, const ParamStore<T>& params,
                             Conv2dCache<T>* cache) {
  const auto& wgt = params.at("In_Attention_Conv_5_1.weight").value;
  const auto spec = conv1x1_spec(wgt, "In_Attention_Conv_5_1");
  TensorT<T> map = conv2d_forward(x_down4, spec, wgt,
                                  &params.at("In_Attention_Conv_5_1.bias").value, cache);
  return map.reshaped({map.dim(1) * map.dim(2)});
}

template <class T>
void attention_step(const TensorT<T>& x, const TensorT<T>& h_prev, AttentionVariant variant,
                    const ParamStore<T>& params, TensorT<T>& w, TensorT<T>& xbar,
                    AttStepCache<T>* cache, int frame_index) {
  if (x.numel() != h_prev.numel())
    throw std::invalid_argument("attention_step: x/h length mismatch");
  const int64_t d = x.numel();

  TensorT<T> z({d});
  apply_map(variant, params, "AttentionLayer_1", x, z);       // U . x
  apply_map(variant, params, "AttentionLayer_2", h_prev, z);  // + H . h
  TensorT<T> a({d});
  apply_map(variant, params, "AttentionLayer_3", z, a);  // W . z
  if (!z.all_finite() || !a.all_finite())
    throw std::runtime_error("attention_step: non-finite intermediate at frame " +
                             std::to_string(frame_index));
  w = TensorT<T>({d});
  kernels::softmax_vec(a.ptr(), w.ptr(), d);
  xbar = TensorT<T>({d});
  for (int64_t k = 0; k < d; ++k) xbar(k) = w(k) * x(k);

  if (cache) {
    cache->x = x;
    cache->h_prev = h_prev;
    cache->z = std::move(z);
    cache->a = std::move(a);
    cache->w = w;
    cache->xbar = xbar;
  }
}

template <class T>
TensorT<T> attention_forward(const std::vector<TensorT<T>>& xs, const TensorT<T>& h0,
                             const TensorT<T>& c0, AttentionVariant variant, Extractor extractor,
                             const ParamStore<T>& params, int64_t map_h, int64_t map_w,
                             AttentionTrace<T>* trace, AttentionCache<T>* cache,
                             RecurrentState<T>* final_state) {
  const int n = static_cast<int>(xs.size());
  if (n == 0) throw std::invalid_argument("attention_forward: empty frame sequence");

  RecurrentState<T> state{h0, c0};
  if (cache) {
    cache->steps.resize(static_cast<size_t>(n));
    if (extractor == Extractor::lstm)
      cache->lstm_steps.resize(static_cast<size_t>(n));
    else
      cache->gru_steps.resize(static_cast<size_t>(n));
    cache->map_h = map_h;
    cache->map_w = map_w;
  }

  for (int i = 0; i < n; ++i) {
    TensorT<T> w, xbar;
    AttStepCache<T> local;
    AttStepCache<T>* step_cache =
        cache ? &cache->steps[static_cast<size_t>(i)] : (trace ? &local : nullptr);
    attention_step(xs[static_cast<size_t>(i)], state.h, variant, params, w, xbar, step_cache,
                   i + 1);
    if (trace) {
      trace->x.push_back(xs[static_cast<size_t>(i)]);
      trace->z.push_back(step_cache->z);
      trace->w.push_back(w);
      trace->xbar.push_back(xbar);
    }
    if (extractor == Extractor::lstm) {
      state = lstm_step(xbar, state, params,
                        cache ? &cache->lstm_steps[static_cast<size_t>(i)] : nullptr);
    } else {
      state.h = gru_step(xbar, state.h, params,
                         cache ? &cache->gru_steps[static_cast<size_t>(i)] : nullptr);
    }
    if (trace) trace->h.push_back(state.h);
  }

  const auto& wgt = params.at("Out_Attention_Conv_5_2.weight").value;
  const auto spec = conv1x1_spec(wgt, "Out_Attention_Conv_5_2");
  TensorT<T> hmap = state.h.reshaped({int64_t(1), map_h, map_w});
  TensorT<T> x_out = conv2d_forward(hmap, spec, wgt,
                                    &params.at("Out_Attention_Conv_5_2.bias").value,
                                    cache ? &cache->k_out : nullptr);
  if (trace) {
    trace->h_final = state.h;
    trace->x_out = x_out;
  }
  if (final_state) *final_state = state;
  return x_out;
}

template <class T>
std::vector<TensorT<T>> attention_backward(const TensorT<T>& d_x_out, AttentionVariant variant,
                                           Extractor extractor, ParamStore<T>& params,
                                           const AttentionCache<T>& cache) {
  const int n = static_cast<int>(cache.steps.size());
  const int64_t d = cache.map_h * cache.map_w;

  auto& k_out_w = params.at("Out_Attention_Conv_5_2.weight");
  const auto spec = conv1x1_spec(k_out_w.value, "Out_Attention_Conv_5_2");
  TensorT<T> d_hmap =
      conv2d_backward(d_x_out, spec, k_out_w.value, cache.k_out, k_out_w.grad,
                      &params.at("Out_Attention_Conv_5_2.bias").grad);
  TensorT<T> dh = d_hmap.reshaped({d});
  TensorT<T> dc({d});

  std::vector<TensorT<T>> d_xs(static_cast<size_t>(n));
  for (int i = n - 1; i >= 0; --i) {
    const auto& step = cache.steps[static_cast<size_t>(i)];
    TensorT<T> dxbar, dh_prev_ext, dc_prev;
    if (extractor == Extractor::lstm) {
      lstm_step_backward(dh, dc, cache.lstm_steps[static_cast<size_t>(i)], params, dxbar,
                         dh_prev_ext, dc_prev);
    } else {
      gru_step_backward(dh, cache.gru_steps[static_cast<size_t>(i)], params, dxbar, dh_prev_ext);
      dc_prev = TensorT<T>({d});
    }

    // xbar = w * x
    TensorT<T> dw({d}), dx({d});
    for (int64_t k = 0; k < d; ++k) {
      dw(k) = dxbar(k) * step.x(k);
      dx(k) = dxbar(k) * step.w(k);
    }
    // softmax backward: da = w * (dw - <dw, w>)
    double dot = 0;
    for (int64_t k = 0; k < d; ++k) dot += double(dw(k)) * double(step.w(k));
    TensorT<T> da({d});
    for (int64_t k = 0; k < d; ++k) da(k) = step.w(k) * (dw(k) - static_cast<T>(dot));

    TensorT<T> dz({d});
    apply_map_backward(variant, params, "AttentionLayer_3", step.z, da, dz);
    TensorT<T> dh_prev_att({d});
    apply_map_backward(variant, params, "AttentionLayer_1", step.x, dz, dx);
    apply_map_backward(variant, params, "AttentionLayer_2", step.h_prev, dz, dh_prev_att);

    d_xs[static_cast<size_t>(i)] = std::move(dx);
    dh = std::move(dh_prev_ext);
    kernels::axpy(d, T(1), dh_prev_att.ptr(), dh.ptr());
    dc = std::move(dc_prev);
  }
  return d_xs;
}

#define STLANE_INSTANTIATE_ATT(T)                                                               \
  template TensorT<T> reduce_bottleneck<T>(const TensorT<T>&, const ParamStore<T>&,             \
                                           Conv2dCache<T>*);                                    \
  template void attention_step<T>(const TensorT<T>&, const TensorT<T>&, AttentionVariant,       \
                                  const ParamStore<T>&, TensorT<T>&, TensorT<T>&,               \
                                  AttStepCache<T>*, int);                                       \
  template TensorT<T> attention_forward<T>(const std::vector<TensorT<T>>&, const TensorT<T>&,   \
                                           const TensorT<T>&, AttentionVariant, Extractor,      \
                                           const ParamStore<T>&, int64_t, int64_t,              \
                                           AttentionTrace<T>*, AttentionCache<T>*,              \
                                           RecurrentState<T>*);                                 \
  template std::vector<TensorT<T>> attention_backward<T>(const TensorT<T>&, AttentionVariant,   \
                                                         Extractor, ParamStore<T>&,            \
                                                         const AttentionCache<T>&);

STLANE_INSTANTIATE_ATT(float)
STLANE_INSTANTIATE_ATT(double)
#undef STLANE_INSTANTIATE_ATT

}  // namespace stlane
