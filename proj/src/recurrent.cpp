#include "stlane/recurrent.hpp"

#include <cmath>

namespace stlane {
namespace {

template <class T>
TensorT<T> gate_preact(const ParamStore<T>& ps, const std::string& prefix, const char* gate,
                       const TensorT<T>& x, const TensorT<T>& h_prev) {
  TensorT<T> a = ps.at(prefix + ".b_" + gate).value;
  matvec_acc(ps.at(prefix + ".P_" + gate).value, x, a);
  matvec_acc(ps.at(prefix + ".Q_" + gate).value, h_prev, a);
  return a;
}

template <class T>
void sigmoid_inplace(TensorT<T>& t) {
  for (auto& v : t.data) v = T(1) / (T(1) + std::exp(-v));
}

template <class T>
void tanh_inplace(TensorT<T>& t) {
  for (auto& v : t.data) v = std::tanh(v);
}

// Accumulates parameter gradients of one gate and the chained dx/dh_prev.
template <class T>
void gate_backward(ParamStore<T>& ps, const std::string& prefix, const char* gate,
                   const TensorT<T>& da, const TensorT<T>& x, const TensorT<T>& h_prev,
                   TensorT<T>& dx, TensorT<T>& dh_prev) {
  auto& pp = ps.at(prefix + ".P_" + gate);
  auto& qq = ps.at(prefix + ".Q_" + gate);
  outer_acc(da, x, pp.grad);
  outer_acc(da, h_prev, qq.grad);
  kernels::axpy(da.numel(), T(1), da.ptr(), ps.at(prefix + ".b_" + gate).grad.ptr());
  matvec_t_acc(pp.value, da, dx);
  matvec_t_acc(qq.value, da, dh_prev);
}

}  // namespace

template <class T>
RecurrentState<T> lstm_step(const TensorT<T>& x, const RecurrentState<T>& prev,
                            const ParamStore<T>& params, LstmStepCache<T>* cache) {
  const int64_t d = x.numel();
  TensorT<T> f = gate_preact(params, "LSTM", "f", x, prev.h);
  TensorT<T> i = gate_preact(params, "LSTM", "i", x, prev.h);
  TensorT<T> g = gate_preact(params, "LSTM", "c", x, prev.h);
  TensorT<T> o = gate_preact(params, "LSTM", "o", x, prev.h);
  sigmoid_inplace(f);
  sigmoid_inplace(i);
  sigmoid_inplace(o);
  tanh_inplace(g);

  RecurrentState<T> next{TensorT<T>({d}), TensorT<T>({d})};
  for (int64_t k = 0; k < d; ++k) {
    next.c(k) = f(k) * prev.c(k) + i(k) * g(k);
    next.h(k) = o(k) * std::tanh(next.c(k));
  }
  if (cache) {
    cache->x = x;
    cache->h_prev = prev.h;
    cache->c_prev = prev.c;
    cache->f = std::move(f);
    cache->i = std::move(i);
    cache->o = std::move(o);
    cache->g = std::move(g);
    cache->c = next.c;
  }
  return next;
}

template <class T>
void lstm_step_backward(const TensorT<T>& dh, const TensorT<T>& dc, const LstmStepCache<T>& cache,
                        ParamStore<T>& params, TensorT<T>& dx, TensorT<T>& dh_prev,
                        TensorT<T>& dc_prev) {
  const int64_t d = dh.numel();
  dx = TensorT<T>({d});
  dh_prev = TensorT<T>({d});
  dc_prev = TensorT<T>({d});
  TensorT<T> da_f({d}), da_i({d}), da_c({d}), da_o({d});
  for (int64_t k = 0; k < d; ++k) {
    const T tc = std::tanh(cache.c(k));
    const T do_ = dh(k) * tc;
    const T dck = dc(k) + dh(k) * cache.o(k) * (T(1) - tc * tc);
    const T df = dck * cache.c_prev(k);
    const T di = dck * cache.g(k);
    const T dg = dck * cache.i(k);
    dc_prev(k) = dck * cache.f(k);
    da_f(k) = df * cache.f(k) * (T(1) - cache.f(k));
    da_i(k) = di * cache.i(k) * (T(1) - cache.i(k));
    da_o(k) = do_ * cache.o(k) * (T(1) - cache.o(k));
    da_c(k) = dg * (T(1) - cache.g(k) * cache.g(k));
  }
  gate_backward(params, "LSTM", "f", da_f, cache.x, cache.h_prev, dx, dh_prev);
  gate_backward(params, "LSTM", "i", da_i, cache.x, cache.h_prev, dx, dh_prev);
  gate_backward(params, "LSTM", "c", da_c, cache.x, cache.h_prev, dx, dh_prev);
  gate_backward(params, "LSTM", "o", da_o, cache.x, cache.h_prev, dx, dh_prev);
}

template <class T>
TensorT<T> gru_step(const TensorT<T>& x, const TensorT<T>& h_prev, const ParamStore<T>& params,
                    GruStepCache<T>* cache) {
  const int64_t d = x.numel();
  TensorT<T> r = gate_preact(params, "GRU", "r", x, h_prev);
  TensorT<T> z = gate_preact(params, "GRU", "z", x, h_prev);
  sigmoid_inplace(r);
  sigmoid_inplace(z);
  TensorT<T> rh({d});
  for (int64_t k = 0; k < d; ++k) rh(k) = r(k) * h_prev(k);
  TensorT<T> g = params.at("GRU.b_h").value;
  matvec_acc(params.at("GRU.P_h").value, x, g);
  matvec_acc(params.at("GRU.Q_h").value, rh, g);
  tanh_inplace(g);
  TensorT<T> h({d});
  for (int64_t k = 0; k < d; ++k) h(k) = (T(1) - z(k)) * h_prev(k) + z(k) * g(k);
  if (cache) {
    cache->x = x;
    cache->h_prev = h_prev;
    cache->r = std::move(r);
    cache->z = std::move(z);
    cache->g = std::move(g);
    cache->rh = std::move(rh);
  }
  return h;
}

template <class T>
void gru_step_backward(const TensorT<T>& dh, const GruStepCache<T>& cache, ParamStore<T>& params,
                       TensorT<T>& dx, TensorT<T>& dh_prev) {
  const int64_t d = dh.numel();
  dx = TensorT<T>({d});
  dh_prev = TensorT<T>({d});
  TensorT<T> da_z({d}), da_g({d}), drh({d});
  for (int64_t k = 0; k < d; ++k) {
    const T dz = dh(k) * (cache.g(k) - cache.h_prev(k));
    const T dg = dh(k) * cache.z(k);
    dh_prev(k) = dh(k) * (T(1) - cache.z(k));
    da_z(k) = dz * cache.z(k) * (T(1) - cache.z(k));
    da_g(k) = dg * (T(1) - cache.g(k) * cache.g(k));
  }
  // candidate gate: g = tanh(P_h x + Q_h rh + b_h)
  auto& ph = params.at("GRU.P_h");
  auto& qh = params.at("GRU.Q_h");
  outer_acc(da_g, cache.x, ph.grad);
  outer_acc(da_g, cache.rh, qh.grad);
  kernels::axpy(d, T(1), da_g.ptr(), params.at("GRU.b_h").grad.ptr());
  matvec_t_acc(ph.value, da_g, dx);
  matvec_t_acc(qh.value, da_g, drh);

  TensorT<T> da_r({d});
  for (int64_t k = 0; k < d; ++k) {
    dh_prev(k) += drh(k) * cache.r(k);
    da_r(k) = drh(k) * cache.h_prev(k) * cache.r(k) * (T(1) - cache.r(k));
  }
  gate_backward(params, "GRU", "r", da_r, cache.x, cache.h_prev, dx, dh_prev);
  gate_backward(params, "GRU", "z", da_z, cache.x, cache.h_prev, dx, dh_prev);
}

#define STLANE_INSTANTIATE_RNN(T)                                                               \
  template RecurrentState<T> lstm_step<T>(const TensorT<T>&, const RecurrentState<T>&,          \
                                          const ParamStore<T>&, LstmStepCache<T>*);             \
  template void lstm_step_backward<T>(const TensorT<T>&, const TensorT<T>&,                     \
                                      const LstmStepCache<T>&, ParamStore<T>&, TensorT<T>&,     \
                                      TensorT<T>&, TensorT<T>&);                                \
  template TensorT<T> gru_step<T>(const TensorT<T>&, const TensorT<T>&, const ParamStore<T>&,   \
                                  GruStepCache<T>*);                                            \
  template void gru_step_backward<T>(const TensorT<T>&, const GruStepCache<T>&, ParamStore<T>&, \
                                     TensorT<T>&, TensorT<T>&);

STLANE_INSTANTIATE_RNN(float)
STLANE_INSTANTIATE_RNN(double)
#undef STLANE_INSTANTIATE_RNN

}  // namespace stlane
