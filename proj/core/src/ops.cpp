/* Copyright 2026 The waspseg Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#include "waspseg/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "waspseg/error.hpp"
#include "waspseg/rng.hpp"

namespace waspseg {
namespace {

void require_nonempty(const Shape& s, std::string_view where) {
  if (s.empty()) throw ShapeError(std::string(where) + ": empty tensor " + s.str());
}

// Source coordinate and blend weight of one output index, align-corners-false.
struct Tap {
  int lo;
  int hi;
  double frac;
};

std::vector<Tap> bilinear_taps(int in, int out) {
  std::vector<Tap> taps(static_cast<std::size_t>(out));
  const double scale = static_cast<double>(in) / static_cast<double>(out);
  for (int i = 0; i < out; ++i) {
    double src = (static_cast<double>(i) + 0.5) * scale - 0.5;
    if (src < 0.0) src = 0.0;
    int lo = static_cast<int>(std::floor(src));
    if (lo > in - 1) lo = in - 1;
    const int hi = std::min(lo + 1, in - 1);
    taps[static_cast<std::size_t>(i)] = {lo, hi, src - lo};
  }
  return taps;
}

}  // namespace

template <class T>
BasicTensor<T> bilinear_resize(const BasicTensor<T>& x, int out_h, int out_w) {
  if (out_h < 1 || out_w < 1) {
    throw ShapeError("bilinear_resize: target extent must be >= 1, got " +
                     std::to_string(out_h) + "x" + std::to_string(out_w));
  }
  require_nonempty(x.shape(), "bilinear_resize");
  if (out_h == x.h() && out_w == x.w()) return x;
  const auto ty = bilinear_taps(x.h(), out_h);
  const auto tx = bilinear_taps(x.w(), out_w);
  BasicTensor<T> y(Shape{x.n(), x.c(), out_h, out_w});
  for (int n = 0; n < x.n(); ++n) {
    for (int c = 0; c < x.c(); ++c) {
      const auto src = x.plane(n, c);
      auto dst = y.plane(n, c);
      for (int oy = 0; oy < out_h; ++oy) {
        const Tap& a = ty[static_cast<std::size_t>(oy)];
        const T* r0 = src.data() + static_cast<std::size_t>(a.lo) * x.w();
        const T* r1 = src.data() + static_cast<std::size_t>(a.hi) * x.w();
        for (int ox = 0; ox < out_w; ++ox) {
          const Tap& b = tx[static_cast<std::size_t>(ox)];
          // a + f (b - a) keeps constant inputs exactly constant.
          const double top = r0[b.lo] + b.frac * (static_cast<double>(r0[b.hi]) - r0[b.lo]);
          const double bottom = r1[b.lo] + b.frac * (static_cast<double>(r1[b.hi]) - r1[b.lo]);
          dst[static_cast<std::size_t>(oy) * out_w + ox] = static_cast<T>(top + a.frac * (bottom - top));
        }
      }
    }
  }
  return y;
}

template <class T>
BasicTensor<T> bilinear_resize_backward(const BasicTensor<T>& grad_out, const Shape& input_shape) {
  if (grad_out.h() == input_shape.h && grad_out.w() == input_shape.w) {
    require_same_shape(grad_out.shape(), input_shape, "bilinear_resize_backward");
    return grad_out;
  }
  const auto ty = bilinear_taps(input_shape.h, grad_out.h());
  const auto tx = bilinear_taps(input_shape.w, grad_out.w());
  std::vector<double> acc(input_shape.numel(), 0.0);
  for (int n = 0; n < grad_out.n(); ++n) {
    for (int c = 0; c < grad_out.c(); ++c) {
      const auto g = grad_out.plane(n, c);
      double* dst = acc.data() + (static_cast<std::size_t>(n) * input_shape.c + c) * input_shape.plane();
      for (int oy = 0; oy < grad_out.h(); ++oy) {
        const Tap& a = ty[static_cast<std::size_t>(oy)];
        for (int ox = 0; ox < grad_out.w(); ++ox) {
          const Tap& b = tx[static_cast<std::size_t>(ox)];
          const double v = g[static_cast<std::size_t>(oy) * grad_out.w() + ox];
          dst[a.lo * input_shape.w + b.lo] += (1.0 - a.frac) * (1.0 - b.frac) * v;
          dst[a.lo * input_shape.w + b.hi] += (1.0 - a.frac) * b.frac * v;
          dst[a.hi * input_shape.w + b.lo] += a.frac * (1.0 - b.frac) * v;
          dst[a.hi * input_shape.w + b.hi] += a.frac * b.frac * v;
        }
      }
    }
  }
  BasicTensor<T> out(input_shape);
  for (std::size_t i = 0; i < acc.size(); ++i) out[i] = static_cast<T>(acc[i]);
  return out;
}

template <class T>
BasicTensor<T> global_avg_pool(const BasicTensor<T>& x) {
  require_nonempty(x.shape(), "global_avg_pool");
  BasicTensor<T> y(Shape{x.n(), x.c(), 1, 1});
  for (int n = 0; n < x.n(); ++n) {
    for (int c = 0; c < x.c(); ++c) {
      double s = 0.0;
      for (T v : x.plane(n, c)) s += v;
      y.at(n, c, 0, 0) = static_cast<T>(s / static_cast<double>(x.shape().plane()));
    }
  }
  return y;
}

template <class T>
BasicTensor<T> global_avg_pool_backward(const BasicTensor<T>& grad_out, const Shape& input_shape) {
  require_same_shape(grad_out.shape(), Shape{input_shape.n, input_shape.c, 1, 1},
                     "global_avg_pool_backward");
  BasicTensor<T> gx(input_shape);
  const double inv = 1.0 / static_cast<double>(input_shape.plane());
  for (int n = 0; n < input_shape.n; ++n) {
    for (int c = 0; c < input_shape.c; ++c) {
      const T v = static_cast<T>(grad_out.at(n, c, 0, 0) * inv);
      for (T& g : gx.plane(n, c)) g = v;
    }
  }
  return gx;
}

template <class T>
BasicTensor<T> relu(const BasicTensor<T>& x) {
  BasicTensor<T> y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] > T{0} ? x[i] : T{0};
  return y;
}

template <class T>
BasicTensor<T> relu_backward(const BasicTensor<T>& x, const BasicTensor<T>& grad_out) {
  require_same_shape(x.shape(), grad_out.shape(), "relu_backward");
  BasicTensor<T> g(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) g[i] = x[i] > T{0} ? grad_out[i] : T{0};
  return g;
}

template <class T>
BasicTensor<T> sigmoid(const BasicTensor<T>& x) {
  BasicTensor<T> y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) {
    y[i] = static_cast<T>(1.0 / (1.0 + std::exp(-static_cast<double>(x[i]))));
  }
  return y;
}

template <class T>
BasicTensor<T> softmax_channels(const BasicTensor<T>& x) {
  require_nonempty(x.shape(), "softmax_channels");
  BasicTensor<T> y(x.shape());
  const std::size_t plane = x.shape().plane();
  std::vector<double> e(static_cast<std::size_t>(x.c()));
  for (int n = 0; n < x.n(); ++n) {
    for (std::size_t q = 0; q < plane; ++q) {
      double mx = -std::numeric_limits<double>::infinity();
      for (int c = 0; c < x.c(); ++c) mx = std::max(mx, static_cast<double>(x.plane(n, c)[q]));
      double sum = 0.0;
      for (int c = 0; c < x.c(); ++c) {
        e[c] = std::exp(static_cast<double>(x.plane(n, c)[q]) - mx);
        sum += e[c];
      }
      for (int c = 0; c < x.c(); ++c) y.plane(n, c)[q] = static_cast<T>(e[c] / sum);
    }
  }
  return y;
}

template <class T>
BasicTensor<T> softmax_channels_backward(const BasicTensor<T>& y, const BasicTensor<T>& grad_out) {
  require_same_shape(y.shape(), grad_out.shape(), "softmax_channels_backward");
  BasicTensor<T> gx(y.shape());
  const std::size_t plane = y.shape().plane();
  for (int n = 0; n < y.n(); ++n) {
    for (std::size_t q = 0; q < plane; ++q) {
      double dot = 0.0;
      for (int c = 0; c < y.c(); ++c) {
        dot += static_cast<double>(y.plane(n, c)[q]) * grad_out.plane(n, c)[q];
      }
      for (int c = 0; c < y.c(); ++c) {
        gx.plane(n, c)[q] =
            static_cast<T>(y.plane(n, c)[q] * (static_cast<double>(grad_out.plane(n, c)[q]) - dot));
      }
    }
  }
  return gx;
}

template <class T>
BasicTensor<T> batchnorm(const BasicTensor<T>& x, std::span<const T> gamma, std::span<const T> beta,
                         std::span<T> running_mean, std::span<T> running_var, Mode mode,
                         double momentum, double eps, BatchNormCache<T>* cache) {
  require_nonempty(x.shape(), "batchnorm");
  const auto channels = static_cast<std::size_t>(x.c());
  if (gamma.size() != channels || beta.size() != channels || running_mean.size() != channels ||
      running_var.size() != channels) {
    throw ShapeError("batchnorm: parameter length does not match " + std::to_string(channels) +
                     " channels");
  }
  const double count = static_cast<double>(x.n()) * static_cast<double>(x.shape().plane());
  BasicTensor<T> y(x.shape());
  BasicTensor<T> xhat(x.shape());
  std::vector<double> inv_std(channels);
  for (int c = 0; c < x.c(); ++c) {
    double mean = 0.0;
    double var = 0.0;
    if (mode == Mode::Train) {
      for (int n = 0; n < x.n(); ++n) {
        for (T v : x.plane(n, c)) mean += v;
      }
      mean /= count;
      for (int n = 0; n < x.n(); ++n) {
        for (T v : x.plane(n, c)) var += (v - mean) * (v - mean);
      }
      var /= count;
      const double unbiased = count > 1.0 ? var * count / (count - 1.0) : var;
      running_mean[c] = static_cast<T>((1.0 - momentum) * running_mean[c] + momentum * mean);
      running_var[c] = static_cast<T>((1.0 - momentum) * running_var[c] + momentum * unbiased);
    } else {
      mean = running_mean[c];
      var = running_var[c];
    }
    const double istd = 1.0 / std::sqrt(var + eps);
    inv_std[c] = istd;
    for (int n = 0; n < x.n(); ++n) {
      const auto src = x.plane(n, c);
      auto xh = xhat.plane(n, c);
      auto dst = y.plane(n, c);
      for (std::size_t q = 0; q < src.size(); ++q) {
        const double v = (src[q] - mean) * istd;
        xh[q] = static_cast<T>(v);
        dst[q] = static_cast<T>(gamma[c] * v + beta[c]);
      }
    }
  }
  if (cache != nullptr) {
    cache->normalized = std::move(xhat);
    cache->inv_std = std::move(inv_std);
    cache->mode = mode;
  }
  return y;
}

template <class T>
BatchNormGrads<T> batchnorm_backward(const BatchNormCache<T>& cache, std::span<const T> gamma,
                                     const BasicTensor<T>& grad_out) {
  const auto& xhat = cache.normalized;
  require_same_shape(xhat.shape(), grad_out.shape(), "batchnorm_backward");
  const double count = static_cast<double>(xhat.n()) * static_cast<double>(xhat.shape().plane());
  BatchNormGrads<T> g;
  g.input = BasicTensor<T>(xhat.shape());
  g.gamma.resize(static_cast<std::size_t>(xhat.c()));
  g.beta.resize(static_cast<std::size_t>(xhat.c()));
  for (int c = 0; c < xhat.c(); ++c) {
    double sum_g = 0.0;
    double sum_gx = 0.0;
    for (int n = 0; n < xhat.n(); ++n) {
      const auto go = grad_out.plane(n, c);
      const auto xh = xhat.plane(n, c);
      for (std::size_t q = 0; q < go.size(); ++q) {
        sum_g += go[q];
        sum_gx += static_cast<double>(go[q]) * xh[q];
      }
    }
    g.gamma[c] = static_cast<T>(sum_gx);
    g.beta[c] = static_cast<T>(sum_g);
    const double scale = static_cast<double>(gamma[c]) * cache.inv_std[c];
    for (int n = 0; n < xhat.n(); ++n) {
      const auto go = grad_out.plane(n, c);
      const auto xh = xhat.plane(n, c);
      auto gi = g.input.plane(n, c);
      for (std::size_t q = 0; q < go.size(); ++q) {
        if (cache.mode == Mode::Train) {
          gi[q] = static_cast<T>(scale / count * (count * go[q] - sum_g - xh[q] * sum_gx));
        } else {
          gi[q] = static_cast<T>(scale * go[q]);
        }
      }
    }
  }
  return g;
}

template <class T>
BasicTensor<T> dropout(const BasicTensor<T>& x, double p, Mode mode, std::uint64_t seed,
                       std::vector<T>* mask) {
  if (!(p >= 0.0 && p < 1.0)) {
    throw ConfigError("dropout: probability must lie in [0, 1), got " + std::to_string(p));
  }
  require_nonempty(x.shape(), "dropout");
  if (mode == Mode::Eval || p == 0.0) {
    if (mask != nullptr) mask->assign(x.size(), T{1});
    return x;
  }
  Rng rng(seed);
  const T keep_scale = static_cast<T>(1.0 / (1.0 - p));
  std::vector<T> m(x.size());
  BasicTensor<T> y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) {
    m[i] = rng.uniform() < p ? T{0} : keep_scale;
    y[i] = x[i] * m[i];
  }
  if (mask != nullptr) *mask = std::move(m);
  return y;
}

template <class T>
BasicTensor<T> dropout_backward(std::span<const T> mask, const BasicTensor<T>& grad_out) {
  if (mask.size() != grad_out.size()) throw ShapeError("dropout_backward: mask size mismatch");
  BasicTensor<T> g(grad_out.shape());
  for (std::size_t i = 0; i < mask.size(); ++i) g[i] = grad_out[i] * mask[i];
  return g;
}

template <class T>
BasicTensor<T> max_pool2d(const BasicTensor<T>& x, int kernel, int stride, int pad,
                          std::vector<std::size_t>* argmax) {
  require_nonempty(x.shape(), "max_pool2d");
  if (pad * 2 > kernel) throw ShapeError("max_pool2d: padding exceeds half the kernel");
  const int oh = (x.h() + 2 * pad - kernel) / stride + 1;
  const int ow = (x.w() + 2 * pad - kernel) / stride + 1;
  if (oh < 1 || ow < 1) throw ShapeError("max_pool2d: degenerate output size");
  BasicTensor<T> y(Shape{x.n(), x.c(), oh, ow});
  if (argmax != nullptr) argmax->assign(y.size(), 0);
  for (int n = 0; n < x.n(); ++n) {
    for (int c = 0; c < x.c(); ++c) {
      for (int oy = 0; oy < oh; ++oy) {
        for (int ox = 0; ox < ow; ++ox) {
          T best = -std::numeric_limits<T>::infinity();
          std::size_t where = 0;
          for (int ky = 0; ky < kernel; ++ky) {
            const int iy = oy * stride - pad + ky;
            if (iy < 0 || iy >= x.h()) continue;
            for (int kx = 0; kx < kernel; ++kx) {
              const int ix = ox * stride - pad + kx;
              if (ix < 0 || ix >= x.w()) continue;
              const std::size_t idx = x.index(n, c, iy, ix);
              if (x[idx] > best) {
                best = x[idx];
                where = idx;
              }
            }
          }
          const std::size_t out = y.index(n, c, oy, ox);
          y[out] = best;
          if (argmax != nullptr) (*argmax)[out] = where;
        }
      }
    }
  }
  return y;
}

template <class T>
BasicTensor<T> max_pool2d_backward(std::span<const std::size_t> argmax,
                                   const BasicTensor<T>& grad_out, const Shape& input_shape) {
  if (argmax.size() != grad_out.size()) throw ShapeError("max_pool2d_backward: argmax size");
  BasicTensor<T> g(input_shape);
  for (std::size_t i = 0; i < argmax.size(); ++i) g[argmax[i]] += grad_out[i];
  return g;
}

#define WASPSEG_INSTANTIATE_OPS(T)                                                            \
  template BasicTensor<T> bilinear_resize(const BasicTensor<T>&, int, int);                   \
  template BasicTensor<T> bilinear_resize_backward(const BasicTensor<T>&, const Shape&);      \
  template BasicTensor<T> global_avg_pool(const BasicTensor<T>&);                             \
  template BasicTensor<T> global_avg_pool_backward(const BasicTensor<T>&, const Shape&);      \
  template BasicTensor<T> relu(const BasicTensor<T>&);                                        \
  template BasicTensor<T> relu_backward(const BasicTensor<T>&, const BasicTensor<T>&);        \
  template BasicTensor<T> sigmoid(const BasicTensor<T>&);                                     \
  template BasicTensor<T> softmax_channels(const BasicTensor<T>&);                            \
  template BasicTensor<T> softmax_channels_backward(const BasicTensor<T>&,                    \
                                                    const BasicTensor<T>&);                   \
  template BasicTensor<T> batchnorm(const BasicTensor<T>&, std::span<const T>,                \
                                    std::span<const T>, std::span<T>, std::span<T>, Mode,     \
                                    double, double, BatchNormCache<T>*);                      \
  template BatchNormGrads<T> batchnorm_backward(const BatchNormCache<T>&, std::span<const T>, \
                                                const BasicTensor<T>&);                       \
  template BasicTensor<T> dropout(const BasicTensor<T>&, double, Mode, std::uint64_t,         \
                                  std::vector<T>*);                                           \
  template BasicTensor<T> dropout_backward(std::span<const T>, const BasicTensor<T>&);        \
  template BasicTensor<T> max_pool2d(const BasicTensor<T>&, int, int, int,                    \
                                     std::vector<std::size_t>*);                              \
  template BasicTensor<T> max_pool2d_backward(std::span<const std::size_t>,                   \
                                              const BasicTensor<T>&, const Shape&);

WASPSEG_INSTANTIATE_OPS(float)
WASPSEG_INSTANTIATE_OPS(double)

#undef WASPSEG_INSTANTIATE_OPS

}  // namespace waspseg
