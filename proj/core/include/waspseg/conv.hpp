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

#pragma once

#include <optional>
#include <span>
#include <vector>

#include "waspseg/tensor.hpp"

namespace waspseg {

struct Pair2 {
  int h = 1;
  int w = 1;

  static constexpr Pair2 square(int v) noexcept { return {v, v}; }
  friend bool operator==(const Pair2&, const Pair2&) = default;
};

// Stride, dilation rate and zero padding of a 2-D convolution.
struct ConvGeometry {
  Pair2 stride{1, 1};
  Pair2 dilation{1, 1};
  Pair2 padding{0, 0};

  // "Same" geometry for an odd square kernel: pad = rate * (k - 1) / 2.
  static ConvGeometry same(int kernel, int rate) noexcept {
    const int pad = rate * (kernel - 1) / 2;
    return {{1, 1}, {rate, rate}, {pad, pad}};
  }
};

// Weights and geometry of one convolution. kernel is (out_ch, in_ch, kh, kw);
// bias, when present, has out_ch entries.
template <class T>
struct ConvSpec {
  BasicTensor<T> kernel;
  std::optional<std::vector<T>> bias;
  ConvGeometry geometry;

  int out_channels() const noexcept { return kernel.n(); }
  int in_channels() const noexcept { return kernel.c(); }
};

// Effective extent of a dilated kernel: k + (k - 1)(r - 1).
constexpr int effective_kernel(int kernel, int rate) noexcept {
  return kernel + (kernel - 1) * (rate - 1);
}

// floor((in + 2 pad - (k - 1) r - 1) / stride) + 1. Throws ShapeError when
// the result would be < 1.
int conv_output_extent(int in, int kernel, int stride, int rate, int pad);

// One-dimensional atrous convolution with centered taps:
//
//   y[i] = sum_{k=0}^{K-1} xp[i + r k] w[k],   xp = x zero-padded by `padding`
//
// Output length is n + 2 padding - (K - 1) r. With padding = r (K - 1) / 2 the
// taps are centered on i. The left-anchored form
//   y'[j] = sum_{k=1}^{K} x[j + r k] w[k]
// is recovered as y'[j] = y[j + r + padding]. Accumulates in double.
std::vector<float> atrous_conv1d(std::span<const float> x, std::span<const float> w,
                                 int rate, int padding);

template <class T>
BasicTensor<T> conv2d(const BasicTensor<T>& x, const BasicTensor<T>& kernel,
                      std::span<const T> bias, const ConvGeometry& geometry);

template <class T>
BasicTensor<T> conv2d(const BasicTensor<T>& x, const ConvSpec<T>& spec) {
  return conv2d(x, spec.kernel,
                spec.bias ? std::span<const T>(*spec.bias) : std::span<const T>(),
                spec.geometry);
}

template <class T>
struct ConvGrads {
  BasicTensor<T> input;
  BasicTensor<T> kernel;
  std::vector<T> bias;  // empty when the convolution has no bias
};

template <class T>
ConvGrads<T> conv2d_backward(const BasicTensor<T>& x, const BasicTensor<T>& kernel,
                             bool has_bias, const ConvGeometry& geometry,
                             const BasicTensor<T>& grad_out);

template <class T>
ConvGrads<T> conv2d_backward(const BasicTensor<T>& x, const ConvSpec<T>& spec,
                             const BasicTensor<T>& grad_out) {
  return conv2d_backward(x, spec.kernel, spec.bias.has_value(), spec.geometry, grad_out);
}

// Inserts (r - 1) zeros between neighbouring taps, giving a kernel of extent
// effective_kernel(k, r) that convolves with rate 1 to the same result.
template <class T>
BasicTensor<T> zero_stuff(const BasicTensor<T>& kernel, Pair2 rate);

}  // namespace waspseg
