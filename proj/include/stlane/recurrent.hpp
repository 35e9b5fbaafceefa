#pragma once

#include "stlane/nn_core.hpp"

namespace stlane {

template <class T>
struct RecurrentState {
  TensorT<T> h;
  TensorT<T> c;  // unused by GRU
  static RecurrentState zeros(int64_t d) { return {TensorT<T>({d}), TensorT<T>({d})}; }
};

template <class T>
struct LstmStepCache {
  TensorT<T> x, h_prev, c_prev;
  TensorT<T> f, i, o, g;  // gate activations; g is the tanh candidate
  TensorT<T> c;           // new cell state
};

// Gates f,i,o through the logistic sigmoid, candidate through tanh,
// c = f*c_prev + i*g, h = o*tanh(c). Parameters LSTM.P_*/Q_*/b_* for
// gates f,i,c,o.
template <class T>
RecurrentState<T> lstm_step(const TensorT<T>& x, const RecurrentState<T>& prev,
                            const ParamStore<T>& params, LstmStepCache<T>* cache);

template <class T>
void lstm_step_backward(const TensorT<T>& dh, const TensorT<T>& dc, const LstmStepCache<T>& cache,
                        ParamStore<T>& params, TensorT<T>& dx, TensorT<T>& dh_prev,
                        TensorT<T>& dc_prev);

template <class T>
struct GruStepCache {
  TensorT<T> x, h_prev;
  TensorT<T> r, z, g;  // reset, update, tanh candidate
  TensorT<T> rh;       // r * h_prev, input to the candidate's recurrent map
};

// Update/reset-gate recurrence: r,z sigmoid; g = tanh(P_h x + Q_h (r*h) + b_h);
// h' = (1-z)*h + z*g. Parameters GRU.P_*/Q_*/b_* for gates r,z,h.
template <class T>
TensorT<T> gru_step(const TensorT<T>& x, const TensorT<T>& h_prev, const ParamStore<T>& params,
                    GruStepCache<T>* cache);

template <class T>
void gru_step_backward(const TensorT<T>& dh, const GruStepCache<T>& cache, ParamStore<T>& params,
                       TensorT<T>& dx, TensorT<T>& dh_prev);

}  // namespace stlane
