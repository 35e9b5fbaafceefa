#include "stlane/nn_core.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "stlane/kernels.hpp"

namespace stlane {

std::string shape_str(const std::vector<int64_t>& s) {
  std::ostringstream os;
  for (size_t i = 0; i < s.size(); ++i) os << (i ? "x" : "") << s[i];
  return os.str();
}

namespace {

[[noreturn]] void shape_error(const std::string& layer, const std::string& msg) {
  throw std::invalid_argument((layer.empty() ? std::string("op") : layer) + ": " + msg);
}

// Spatial tile of the unrolled input: col is (C_in*kh*kw) x (j1-j0), where the
// column index runs over output positions oy*outW+ox.
template <class T>
void im2col_block(const T* x, int64_t cin, int64_t h, int64_t w, const ConvSpec& s, int64_t out_w,
                  int64_t j0, int64_t j1, T* col) {
  const int64_t ld = j1 - j0;
  for (int64_t c = 0; c < cin; ++c) {
    const T* plane = x + c * h * w;
    for (int64_t di = 0; di < s.kh; ++di) {
      for (int64_t dj = 0; dj < s.kw; ++dj) {
        T* dst = col + ((c * s.kh + di) * s.kw + dj) * ld;
        int64_t j = j0;
        while (j < j1) {
          const int64_t oy = j / out_w;
          const int64_t ox = j % out_w;
          const int64_t row_end = std::min(j1, j - ox + out_w);
          const int64_t iy = oy * s.stride - s.ph + di;
          if (iy < 0 || iy >= h) {
            std::fill(dst + (j - j0), dst + (row_end - j0), T(0));
            j = row_end;
            continue;
          }
          const T* src = plane + iy * w;
          for (int64_t jj = j; jj < row_end; ++jj) {
            const int64_t ix = (ox + jj - j) * s.stride - s.pw + dj;
            dst[jj - j0] = (ix >= 0 && ix < w) ? src[ix] : T(0);
          }
          j = row_end;
        }
      }
    }
  }
}

// Scatter-add transpose of im2col_block.
template <class T>
void col2im_block(const T* col, int64_t cin, int64_t h, int64_t w, const ConvSpec& s,
                  int64_t out_w, int64_t j0, int64_t j1, T* dx) {
  const int64_t ld = j1 - j0;
  for (int64_t c = 0; c < cin; ++c) {
    T* plane = dx + c * h * w;
    for (int64_t di = 0; di < s.kh; ++di) {
      for (int64_t dj = 0; dj < s.kw; ++dj) {
        const T* src = col + ((c * s.kh + di) * s.kw + dj) * ld;
        for (int64_t j = j0; j < j1; ++j) {
          const int64_t oy = j / out_w;
          const int64_t ox = j % out_w;
          const int64_t iy = oy * s.stride - s.ph + di;
          const int64_t ix = ox * s.stride - s.pw + dj;
          if (iy >= 0 && iy < h && ix >= 0 && ix < w) plane[iy * w + ix] += src[j - j0];
        }
      }
    }
  }
}

template <class T>
std::vector<T>& workspace() {
  static thread_local std::vector<T> buf;
  return buf;
}

constexpr int64_t kColBlock = 2048;

}  // namespace

template <class T>
TensorT<T> conv2d_forward(const TensorT<T>& x, const ConvSpec& spec, const TensorT<T>& weight,
                          const TensorT<T>* bias, Conv2dCache<T>* cache) {
  if (x.rank() != 3) shape_error(spec.name, "expected CxHxW input, got " + shape_str(x.shape));
  if (x.dim(0) != spec.in_channels)
    shape_error(spec.name, "input has " + std::to_string(x.dim(0)) + " channels, spec wants " +
                               std::to_string(spec.in_channels));
  const int64_t h = x.dim(1), w = x.dim(2);
  if (h + 2 * spec.ph < spec.kh || w + 2 * spec.pw < spec.kw)
    shape_error(spec.name, "spatial extent smaller than kernel");
  if (!x.all_finite()) shape_error(spec.name, "non-finite input");

  const int64_t oh = conv_out_extent(h, spec.kh, spec.ph, spec.stride);
  const int64_t ow = conv_out_extent(w, spec.kw, spec.pw, spec.stride);
  const int64_t cout = spec.out_channels, cin = spec.in_channels;
  const int64_t kdim = cin * spec.kh * spec.kw;
  const int64_t npos = oh * ow;

  TensorT<T> y({cout, oh, ow});
  if (bias) {
    for (int64_t oc = 0; oc < cout; ++oc)
      std::fill(y.ptr() + oc * npos, y.ptr() + (oc + 1) * npos, (*bias)(oc));
  }

  if (spec.kh == 1 && spec.kw == 1 && spec.stride == 1 && spec.ph == 0 && spec.pw == 0) {
    kernels::gemm_nn(cout, npos, cin, weight.ptr(), cin, x.ptr(), npos, y.ptr(), npos);
  } else {
    auto& col = workspace<T>();
    const int64_t block = std::min(npos, kColBlock);
    col.resize(static_cast<size_t>(kdim * block));
    for (int64_t j0 = 0; j0 < npos; j0 += block) {
      const int64_t j1 = std::min(npos, j0 + block);
      im2col_block(x.ptr(), cin, h, w, spec, ow, j0, j1, col.data());
      kernels::gemm_nn(cout, j1 - j0, kdim, weight.ptr(), kdim, col.data(), j1 - j0, y.ptr() + j0,
                       npos);
    }
  }

  if (spec.relu) kernels::relu(y.ptr(), y.numel());
  if (cache) {
    cache->input = x;
    if (spec.relu) cache->output = y;
  }
  return y;
}

template <class T>
TensorT<T> conv2d_backward(const TensorT<T>& dy, const ConvSpec& spec, const TensorT<T>& weight,
                           const Conv2dCache<T>& cache, TensorT<T>& dweight, TensorT<T>* dbias) {
  const TensorT<T>& x = cache.input;
  const int64_t h = x.dim(1), w = x.dim(2);
  const int64_t oh = dy.dim(1), ow = dy.dim(2);
  const int64_t cout = spec.out_channels, cin = spec.in_channels;
  const int64_t kdim = cin * spec.kh * spec.kw;
  const int64_t npos = oh * ow;
  if (dy.dim(0) != cout) shape_error(spec.name, "gradient channel mismatch");

  TensorT<T> dyr = dy;
  if (spec.relu) kernels::relu_backward(dyr.ptr(), cache.output.ptr(), dyr.numel());

  if (dbias) {
    for (int64_t oc = 0; oc < cout; ++oc)
      (*dbias)(oc) += static_cast<T>(kernels::sum(dyr.ptr() + oc * npos, npos));
  }

  TensorT<T> dx({cin, h, w});

  if (spec.kh == 1 && spec.kw == 1 && spec.stride == 1 && spec.ph == 0 && spec.pw == 0) {
    // dW += dY X^T ; dX = W^T dY
    kernels::gemm_nt(cout, cin, npos, dyr.ptr(), npos, x.ptr(), npos, dweight.ptr(), cin);
    kernels::gemm_tn(cin, npos, cout, weight.ptr(), cin, dyr.ptr(), npos, dx.ptr(), npos);
    return dx;
  }

  auto& col = workspace<T>();
  const int64_t block = std::min(npos, kColBlock);
  col.resize(static_cast<size_t>(kdim * block));
  for (int64_t j0 = 0; j0 < npos; j0 += block) {
    const int64_t j1 = std::min(npos, j0 + block);
    im2col_block(x.ptr(), cin, h, w, spec, ow, j0, j1, col.data());
    // dW += dY[:, j0:j1] * col^T
    kernels::gemm_nt(cout, kdim, j1 - j0, dyr.ptr() + j0, npos, col.data(), j1 - j0, dweight.ptr(),
                     kdim);
    // dcol = W^T * dY[:, j0:j1], reusing the col buffer
    std::fill(col.begin(), col.begin() + static_cast<size_t>(kdim * (j1 - j0)), T(0));
    kernels::gemm_tn(kdim, j1 - j0, cout, weight.ptr(), kdim, dyr.ptr() + j0, npos, col.data(),
                     j1 - j0);
    col2im_block(col.data(), cin, h, w, spec, ow, j0, j1, dx.ptr());
  }
  return dx;
}

template <class T>
TensorT<T> maxpool2x2_forward(const TensorT<T>& x, std::vector<int32_t>* argmax) {
  if (x.rank() != 3) shape_error("maxpool", "expected CxHxW input");
  const int64_t c = x.dim(0), h = x.dim(1), w = x.dim(2);
  if (h % 2 || w % 2) shape_error("maxpool", "odd spatial extent " + shape_str(x.shape));
  const int64_t oh = h / 2, ow = w / 2;
  TensorT<T> y({c, oh, ow});
  if (argmax) argmax->resize(static_cast<size_t>(c * oh * ow));
  for (int64_t ch = 0; ch < c; ++ch) {
    const T* plane = x.ptr() + ch * h * w;
    T* out = y.ptr() + ch * oh * ow;
    for (int64_t oy = 0; oy < oh; ++oy) {
      for (int64_t ox = 0; ox < ow; ++ox) {
        const int64_t iy = oy * 2, ix = ox * 2;
        int64_t best = iy * w + ix;
        T bv = plane[best];
        const int64_t cand[3] = {iy * w + ix + 1, (iy + 1) * w + ix, (iy + 1) * w + ix + 1};
        for (int64_t idx : cand) {
          if (plane[idx] > bv) {  // strict: first in scan order wins ties
            bv = plane[idx];
            best = idx;
          }
        }
        out[oy * ow + ox] = bv;
        if (argmax)
          (*argmax)[static_cast<size_t>(ch * oh * ow + oy * ow + ox)] =
              static_cast<int32_t>(ch * h * w + best);
      }
    }
  }
  return y;
}

template <class T>
TensorT<T> maxpool2x2_backward(const TensorT<T>& dy, const std::vector<int32_t>& argmax,
                               int64_t in_h, int64_t in_w) {
  const int64_t c = dy.dim(0);
  TensorT<T> dx({c, in_h, in_w});
  const int64_t n = dy.numel();
  for (int64_t i = 0; i < n; ++i) dx.data[static_cast<size_t>(argmax[i])] += dy.data[i];
  return dx;
}

namespace {

// Half-pixel source coordinate for 2x upscaling: src = (i+0.5)/2 - 0.5.
inline void bilinear_taps(int64_t i, int64_t extent, int64_t& lo, int64_t& hi, double& t) {
  const double src = 0.5 * static_cast<double>(i) - 0.25;
  const int64_t f = static_cast<int64_t>(std::floor(src));
  t = src - static_cast<double>(f);
  lo = std::clamp<int64_t>(f, 0, extent - 1);
  hi = std::clamp<int64_t>(f + 1, 0, extent - 1);
}

}  // namespace

template <class T>
TensorT<T> upsample_bilinear2x_forward(const TensorT<T>& x) {
  if (x.rank() != 3) shape_error("upsample", "expected CxHxW input");
  const int64_t c = x.dim(0), h = x.dim(1), w = x.dim(2);
  TensorT<T> y({c, 2 * h, 2 * w});
  std::vector<int64_t> x0(2 * w), x1(2 * w);
  std::vector<T> tx(2 * w);
  for (int64_t j = 0; j < 2 * w; ++j) {
    double t;
    bilinear_taps(j, w, x0[j], x1[j], t);
    tx[j] = static_cast<T>(t);
  }
  for (int64_t ch = 0; ch < c; ++ch) {
    const T* plane = x.ptr() + ch * h * w;
    T* out = y.ptr() + ch * 4 * h * w;
    for (int64_t i = 0; i < 2 * h; ++i) {
      int64_t y0, y1;
      double tyd;
      bilinear_taps(i, h, y0, y1, tyd);
      const T ty = static_cast<T>(tyd);
      const T* r0 = plane + y0 * w;
      const T* r1 = plane + y1 * w;
      T* dst = out + i * 2 * w;
      for (int64_t j = 0; j < 2 * w; ++j) {
        // lerp form keeps constants exact
        const T a = r0[x0[j]] + tx[j] * (r0[x1[j]] - r0[x0[j]]);
        const T b = r1[x0[j]] + tx[j] * (r1[x1[j]] - r1[x0[j]]);
        dst[j] = a + ty * (b - a);
      }
    }
  }
  return y;
}

template <class T>
TensorT<T> upsample_bilinear2x_backward(const TensorT<T>& dy) {
  const int64_t c = dy.dim(0), oh = dy.dim(1), ow = dy.dim(2);
  const int64_t h = oh / 2, w = ow / 2;
  TensorT<T> dx({c, h, w});
  std::vector<int64_t> x0(ow), x1(ow);
  std::vector<T> tx(ow);
  for (int64_t j = 0; j < ow; ++j) {
    double t;
    bilinear_taps(j, w, x0[j], x1[j], t);
    tx[j] = static_cast<T>(t);
  }
  for (int64_t ch = 0; ch < c; ++ch) {
    const T* g = dy.ptr() + ch * oh * ow;
    T* plane = dx.ptr() + ch * h * w;
    for (int64_t i = 0; i < oh; ++i) {
      int64_t y0, y1;
      double tyd;
      bilinear_taps(i, h, y0, y1, tyd);
      const T ty = static_cast<T>(tyd);
      T* r0 = plane + y0 * w;
      T* r1 = plane + y1 * w;
      const T* src = g + i * ow;
      for (int64_t j = 0; j < ow; ++j) {
        const T v = src[j];
        const T v0 = v - ty * v;  // (1-ty)*v, matching a + t*(b-a)
        const T v1 = ty * v;
        r0[x0[j]] += v0 - tx[j] * v0;
        r0[x1[j]] += tx[j] * v0;
        r1[x0[j]] += v1 - tx[j] * v1;
        r1[x1[j]] += tx[j] * v1;
      }
    }
  }
  return dx;
}

template <class T>
TensorT<T> softmax(const TensorT<T>& x, int axis) {
  if (axis < 0 || axis >= x.rank()) shape_error("softmax", "axis out of range");
  int64_t outer = 1, inner = 1;
  for (int i = 0; i < axis; ++i) outer *= x.dim(i);
  for (int i = axis + 1; i < x.rank(); ++i) inner *= x.dim(i);
  const int64_t len = x.dim(axis);
  TensorT<T> y = x;
  if (inner == 1) {
    for (int64_t o = 0; o < outer; ++o)
      kernels::softmax_vec(x.ptr() + o * len, y.ptr() + o * len, len);
    return y;
  }
  for (int64_t o = 0; o < outer; ++o) {
    for (int64_t in = 0; in < inner; ++in) {
      const T* src = x.ptr() + o * len * inner + in;
      T* dst = y.ptr() + o * len * inner + in;
      T mx = src[0];
      for (int64_t l = 1; l < len; ++l) mx = std::max(mx, src[l * inner]);
      double s = 0.0;
      for (int64_t l = 0; l < len; ++l) s += std::exp(static_cast<double>(src[l * inner] - mx));
      for (int64_t l = 0; l < len; ++l)
        dst[l * inner] = static_cast<T>(std::exp(static_cast<double>(src[l * inner] - mx)) / s);
    }
  }
  return y;
}

template <class T>
TensorT<T> linear_forward(const TensorT<T>& x, const TensorT<T>& weight, const TensorT<T>* bias,
                          LinearCache<T>* cache) {
  const int64_t din = weight.dim(1), dout = weight.dim(0);
  if (x.numel() != din)
    shape_error("linear", "input length " + std::to_string(x.numel()) + " vs weight " +
                              shape_str(weight.shape));
  TensorT<T> y({dout});
  if (bias) y.data = bias->data;
  matvec_acc(weight, x, y);
  if (cache) cache->input = x;
  return y;
}

template <class T>
TensorT<T> linear_backward(const TensorT<T>& dy, const TensorT<T>& weight,
                           const LinearCache<T>& cache, TensorT<T>& dweight, TensorT<T>* dbias) {
  const int64_t din = weight.dim(1);
  TensorT<T> dx({din});
  matvec_t_acc(weight, dy, dx);
  outer_acc(dy, cache.input, dweight);
  if (dbias) kernels::axpy(dy.numel(), T(1), dy.ptr(), dbias->ptr());
  return dx;
}

template <class T>
Parameter<T>& ParamStore<T>::add(const std::string& name, std::vector<int64_t> shape) {
  if (index_.count(name)) throw std::invalid_argument("duplicate parameter name: " + name);
  index_[name] = params_.size();
  params_.push_back(Parameter<T>{name, TensorT<T>(shape), TensorT<T>(shape)});
  return params_.back();
}

template <class T>
Parameter<T>& ParamStore<T>::at(const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end()) throw std::invalid_argument("unknown parameter: " + name);
  return params_[it->second];
}

template <class T>
const Parameter<T>& ParamStore<T>::at(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw std::invalid_argument("unknown parameter: " + name);
  return params_[it->second];
}

template <class T>
void ParamStore<T>::zero_grads() {
  for (auto& p : params_) p.grad.zero();
}

template <class T>
int64_t ParamStore<T>::total_size() const {
  int64_t n = 0;
  for (const auto& p : params_) n += p.value.numel();
  return n;
}

#define STLANE_INSTANTIATE_CORE(T)                                                             \
  template TensorT<T> conv2d_forward<T>(const TensorT<T>&, const ConvSpec&, const TensorT<T>&, \
                                        const TensorT<T>*, Conv2dCache<T>*);                   \
  template TensorT<T> conv2d_backward<T>(const TensorT<T>&, const ConvSpec&, const TensorT<T>&,\
                                         const Conv2dCache<T>&, TensorT<T>&, TensorT<T>*);     \
  template TensorT<T> maxpool2x2_forward<T>(const TensorT<T>&, std::vector<int32_t>*);         \
  template TensorT<T> maxpool2x2_backward<T>(const TensorT<T>&, const std::vector<int32_t>&,   \
                                             int64_t, int64_t);                                \
  template TensorT<T> upsample_bilinear2x_forward<T>(const TensorT<T>&);                       \
  template TensorT<T> upsample_bilinear2x_backward<T>(const TensorT<T>&);                      \
  template TensorT<T> softmax<T>(const TensorT<T>&, int);                                      \
  template TensorT<T> linear_forward<T>(const TensorT<T>&, const TensorT<T>&, const TensorT<T>*,\
                                        LinearCache<T>*);                                      \
  template TensorT<T> linear_backward<T>(const TensorT<T>&, const TensorT<T>&,                 \
                                         const LinearCache<T>&, TensorT<T>&, TensorT<T>*);     \
  template class ParamStore<T>;

STLANE_INSTANTIATE_CORE(float)
STLANE_INSTANTIATE_CORE(double)
#undef STLANE_INSTANTIATE_CORE

}  // namespace stlane
