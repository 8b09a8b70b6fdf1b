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

#include "waspseg/conv.hpp"

#include <cmath>
#include <string>

#include "waspseg/error.hpp"
#include "waspseg/parallel.hpp"

namespace waspseg {
namespace {

void check_geometry(const ConvGeometry& g, std::string_view where) {
  if (g.stride.h < 1 || g.stride.w < 1) {
    throw ShapeError(std::string(where) + ": stride must be >= 1");
  }
  if (g.dilation.h < 1 || g.dilation.w < 1) {
    throw ShapeError(std::string(where) + ": dilation rate must be >= 1");
  }
  if (g.padding.h < 0 || g.padding.w < 0) {
    throw ShapeError(std::string(where) + ": padding must be >= 0");
  }
}

struct Plan {
  int in_ch, in_h, in_w;
  int out_ch, kh, kw;
  int out_h, out_w;
  std::size_t rows;    // in_ch * kh * kw
  std::size_t pixels;  // out_h * out_w
};

template <class T>
Plan make_plan(const BasicTensor<T>& x, const BasicTensor<T>& kernel, const ConvGeometry& g) {
  check_geometry(g, "conv2d");
  if (kernel.empty()) throw ShapeError("conv2d: empty kernel " + kernel.shape().str());
  if (x.c() != kernel.c()) {
    throw ShapeError("conv2d: input has " + std::to_string(x.c()) +
                     " channels but kernel expects " + std::to_string(kernel.c()));
  }
  Plan p{};
  p.in_ch = x.c();
  p.in_h = x.h();
  p.in_w = x.w();
  p.out_ch = kernel.n();
  p.kh = kernel.h();
  p.kw = kernel.w();
  p.out_h = conv_output_extent(x.h(), p.kh, g.stride.h, g.dilation.h, g.padding.h);
  p.out_w = conv_output_extent(x.w(), p.kw, g.stride.w, g.dilation.w, g.padding.w);
  p.rows = static_cast<std::size_t>(p.in_ch) * p.kh * p.kw;
  p.pixels = static_cast<std::size_t>(p.out_h) * p.out_w;
  return p;
}

// Unfolds sample n into a (rows x pixels) matrix of double, zero where a tap
// falls into padding. Row order is (channel, ky, kx), matching the kernel's
// memory layout.
template <class T>
void im2col(const BasicTensor<T>& x, int n, const Plan& p, const ConvGeometry& g,
            std::vector<double>& col) {
  col.assign(p.rows * p.pixels, 0.0);
  std::size_t row = 0;
  for (int c = 0; c < p.in_ch; ++c) {
    const auto src = x.plane(n, c);
    for (int ky = 0; ky < p.kh; ++ky) {
      for (int kx = 0; kx < p.kw; ++kx, ++row) {
        double* dst = col.data() + row * p.pixels;
        for (int oy = 0; oy < p.out_h; ++oy) {
          const int iy = oy * g.stride.h - g.padding.h + ky * g.dilation.h;
          if (iy < 0 || iy >= p.in_h) continue;
          const T* line = src.data() + static_cast<std::size_t>(iy) * p.in_w;
          double* out = dst + static_cast<std::size_t>(oy) * p.out_w;
          for (int ox = 0; ox < p.out_w; ++ox) {
            const int ix = ox * g.stride.w - g.padding.w + kx * g.dilation.w;
            if (ix >= 0 && ix < p.in_w) out[ox] = static_cast<double>(line[ix]);
          }
        }
      }
    }
  }
}

template <class T>
void col2im_add(const std::vector<double>& col, int n, const Plan& p, const ConvGeometry& g,
                std::vector<double>& grad_x, const Shape& xs) {
  std::size_t row = 0;
  for (int c = 0; c < p.in_ch; ++c) {
    double* plane = grad_x.data() + (static_cast<std::size_t>(n) * xs.c + c) * xs.plane();
    for (int ky = 0; ky < p.kh; ++ky) {
      for (int kx = 0; kx < p.kw; ++kx, ++row) {
        const double* src = col.data() + row * p.pixels;
        for (int oy = 0; oy < p.out_h; ++oy) {
          const int iy = oy * g.stride.h - g.padding.h + ky * g.dilation.h;
          if (iy < 0 || iy >= p.in_h) continue;
          double* line = plane + static_cast<std::size_t>(iy) * p.in_w;
          const double* in = src + static_cast<std::size_t>(oy) * p.out_w;
          for (int ox = 0; ox < p.out_w; ++ox) {
            const int ix = ox * g.stride.w - g.padding.w + kx * g.dilation.w;
            if (ix >= 0 && ix < p.in_w) line[ix] += in[ox];
          }
        }
      }
    }
  }
}

}  // namespace

int conv_output_extent(int in, int kernel, int stride, int rate, int pad) {
  if (kernel < 1 || stride < 1 || rate < 1) {
    throw ShapeError("conv: kernel, stride and rate must be >= 1");
  }
  const long span = static_cast<long>(in) + 2L * pad - static_cast<long>(kernel - 1) * rate - 1;
  if (span < 0) {
    throw ShapeError("conv: degenerate output size (input " + std::to_string(in) +
                     ", kernel " + std::to_string(kernel) + ", rate " + std::to_string(rate) +
                     ", pad " + std::to_string(pad) + ")");
  }
  return static_cast<int>(span / stride) + 1;
}

std::vector<float> atrous_conv1d(std::span<const float> x, std::span<const float> w, int rate,
                                 int padding) {
  if (x.empty()) throw ShapeError("atrous_conv1d: empty input");
  if (w.empty()) throw ShapeError("atrous_conv1d: empty kernel");
  if (rate < 1) throw ShapeError("atrous_conv1d: rate must be >= 1");
  if (padding < 0) throw ShapeError("atrous_conv1d: padding must be >= 0");
  for (float v : x) {
    if (!std::isfinite(v)) throw NumericalError("atrous_conv1d: non-finite input");
  }
  for (float v : w) {
    if (!std::isfinite(v)) throw NumericalError("atrous_conv1d: non-finite kernel");
  }
  const int n = static_cast<int>(x.size());
  const int taps = static_cast<int>(w.size());
  const int out_len = conv_output_extent(n, taps, 1, rate, padding);
  std::vector<float> y(static_cast<std::size_t>(out_len));
  for (int i = 0; i < out_len; ++i) {
    double acc = 0.0;
    for (int k = 0; k < taps; ++k) {
      const int src = i - padding + rate * k;
      if (src >= 0 && src < n) acc += static_cast<double>(x[src]) * static_cast<double>(w[k]);
    }
    y[static_cast<std::size_t>(i)] = static_cast<float>(acc);
  }
  return y;
}

template <class T>
BasicTensor<T> conv2d(const BasicTensor<T>& x, const BasicTensor<T>& kernel,
                      std::span<const T> bias, const ConvGeometry& geometry) {
  const Plan p = make_plan(x, kernel, geometry);
  if (!bias.empty() && static_cast<int>(bias.size()) != p.out_ch) {
    throw ShapeError("conv2d: bias has " + std::to_string(bias.size()) + " entries for " +
                     std::to_string(p.out_ch) + " output channels");
  }
  std::vector<double> weights(kernel.size());
  for (std::size_t i = 0; i < kernel.size(); ++i) weights[i] = static_cast<double>(kernel[i]);

  BasicTensor<T> y(Shape{x.n(), p.out_ch, p.out_h, p.out_w});
  std::vector<double> col;
  for (int n = 0; n < x.n(); ++n) {
    im2col(x, n, p, geometry, col);
    parallel_for(0, static_cast<std::size_t>(p.out_ch), [&](std::size_t oc) {
      std::vector<double> acc(p.pixels, 0.0);
      const double* wrow = weights.data() + oc * p.rows;
      for (std::size_t r = 0; r < p.rows; ++r) {
        const double wv = wrow[r];
        const double* src = col.data() + r * p.pixels;
        for (std::size_t q = 0; q < p.pixels; ++q) acc[q] += wv * src[q];
      }
      const double b = bias.empty() ? 0.0 : static_cast<double>(bias[oc]);
      auto out = y.plane(n, static_cast<int>(oc));
      for (std::size_t q = 0; q < p.pixels; ++q) out[q] = static_cast<T>(acc[q] + b);
    });
  }
  return y;
}

template <class T>
ConvGrads<T> conv2d_backward(const BasicTensor<T>& x, const BasicTensor<T>& kernel,
                             bool has_bias, const ConvGeometry& geometry,
                             const BasicTensor<T>& grad_out) {
  const Plan p = make_plan(x, kernel, geometry);
  require_same_shape(grad_out.shape(), Shape{x.n(), p.out_ch, p.out_h, p.out_w},
                     "conv2d_backward: grad_out");
  std::vector<double> weights(kernel.size());
  for (std::size_t i = 0; i < kernel.size(); ++i) weights[i] = static_cast<double>(kernel[i]);

  std::vector<double> grad_w(kernel.size(), 0.0);
  std::vector<double> grad_b(has_bias ? p.out_ch : 0, 0.0);
  std::vector<double> grad_x(x.size(), 0.0);
  std::vector<double> col;
  std::vector<double> gcol(p.rows * p.pixels);
  std::vector<double> g(static_cast<std::size_t>(p.out_ch) * p.pixels);

  for (int n = 0; n < x.n(); ++n) {
    im2col(x, n, p, geometry, col);
    for (int oc = 0; oc < p.out_ch; ++oc) {
      const auto src = grad_out.plane(n, oc);
      for (std::size_t q = 0; q < p.pixels; ++q) {
        g[static_cast<std::size_t>(oc) * p.pixels + q] = static_cast<double>(src[q]);
      }
    }
    parallel_for(0, static_cast<std::size_t>(p.out_ch), [&](std::size_t oc) {
      const double* go = g.data() + oc * p.pixels;
      if (has_bias) {
        double s = 0.0;
        for (std::size_t q = 0; q < p.pixels; ++q) s += go[q];
        grad_b[oc] += s;
      }
      double* gw = grad_w.data() + oc * p.rows;
      for (std::size_t r = 0; r < p.rows; ++r) {
        const double* c = col.data() + r * p.pixels;
        double s = 0.0;
        for (std::size_t q = 0; q < p.pixels; ++q) s += go[q] * c[q];
        gw[r] += s;
      }
    });
    parallel_for(0, p.rows, [&](std::size_t r) {
      double* acc = gcol.data() + r * p.pixels;
      for (std::size_t q = 0; q < p.pixels; ++q) acc[q] = 0.0;
      for (int oc = 0; oc < p.out_ch; ++oc) {
        const double wv = weights[static_cast<std::size_t>(oc) * p.rows + r];
        const double* go = g.data() + static_cast<std::size_t>(oc) * p.pixels;
        for (std::size_t q = 0; q < p.pixels; ++q) acc[q] += wv * go[q];
      }
    });
    col2im_add<T>(gcol, n, p, geometry, grad_x, x.shape());
  }

  ConvGrads<T> out;
  out.input = BasicTensor<T>(x.shape());
  for (std::size_t i = 0; i < grad_x.size(); ++i) out.input[i] = static_cast<T>(grad_x[i]);
  out.kernel = BasicTensor<T>(kernel.shape());
  for (std::size_t i = 0; i < grad_w.size(); ++i) out.kernel[i] = static_cast<T>(grad_w[i]);
  out.bias.resize(grad_b.size());
  for (std::size_t i = 0; i < grad_b.size(); ++i) out.bias[i] = static_cast<T>(grad_b[i]);
  return out;
}

template <class T>
BasicTensor<T> zero_stuff(const BasicTensor<T>& kernel, Pair2 rate) {
  if (rate.h < 1 || rate.w < 1) throw ShapeError("zero_stuff: rate must be >= 1");
  const int kh = effective_kernel(kernel.h(), rate.h);
  const int kw = effective_kernel(kernel.w(), rate.w);
  BasicTensor<T> out(Shape{kernel.n(), kernel.c(), kh, kw});
  for (int o = 0; o < kernel.n(); ++o) {
    for (int c = 0; c < kernel.c(); ++c) {
      for (int y = 0; y < kernel.h(); ++y) {
        for (int x = 0; x < kernel.w(); ++x) {
          out.at(o, c, y * rate.h, x * rate.w) = kernel.at(o, c, y, x);
        }
      }
    }
  }
  return out;
}

template BasicTensor<float> conv2d(const BasicTensor<float>&, const BasicTensor<float>&,
                                   std::span<const float>, const ConvGeometry&);
template BasicTensor<double> conv2d(const BasicTensor<double>&, const BasicTensor<double>&,
                                    std::span<const double>, const ConvGeometry&);
template ConvGrads<float> conv2d_backward(const BasicTensor<float>&, const BasicTensor<float>&,
                                          bool, const ConvGeometry&,
                                          const BasicTensor<float>&);
template ConvGrads<double> conv2d_backward(const BasicTensor<double>&,
                                           const BasicTensor<double>&, bool,
                                           const ConvGeometry&, const BasicTensor<double>&);
template BasicTensor<float> zero_stuff(const BasicTensor<float>&, Pair2);
template BasicTensor<double> zero_stuff(const BasicTensor<double>&, Pair2);

}  // namespace waspseg
