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

#include <cstdint>
#include <span>
#include <vector>

#include "waspseg/tensor.hpp"

namespace waspseg {

enum class Mode { Train, Eval };

// Bilinear resampling with the align-corners-false convention: output pixel
// centres map to src = (dst + 0.5) * in / out - 0.5, clamped at the borders.
template <class T>
BasicTensor<T> bilinear_resize(const BasicTensor<T>& x, int out_h, int out_w);

template <class T>
BasicTensor<T> bilinear_resize_backward(const BasicTensor<T>& grad_out, const Shape& input_shape);

template <class T>
BasicTensor<T> global_avg_pool(const BasicTensor<T>& x);

template <class T>
BasicTensor<T> global_avg_pool_backward(const BasicTensor<T>& grad_out, const Shape& input_shape);

template <class T>
BasicTensor<T> relu(const BasicTensor<T>& x);

template <class T>
BasicTensor<T> relu_backward(const BasicTensor<T>& x, const BasicTensor<T>& grad_out);

template <class T>
BasicTensor<T> sigmoid(const BasicTensor<T>& x);

// Softmax over the channel axis independently at every (n, h, w).
template <class T>
BasicTensor<T> softmax_channels(const BasicTensor<T>& x);

template <class T>
BasicTensor<T> softmax_channels_backward(const BasicTensor<T>& y, const BasicTensor<T>& grad_out);

template <class T>
struct BatchNormCache {
  BasicTensor<T> normalized;  // x_hat
  std::vector<double> inv_std;
  Mode mode = Mode::Eval;
};

template <class T>
struct BatchNormGrads {
  BasicTensor<T> input;
  std::vector<T> gamma;
  std::vector<T> beta;
};

// Per-channel batch normalisation. In Train mode batch statistics are used
// and the running statistics are updated with `momentum`; in Eval mode the
// running statistics are used as is.
template <class T>
BasicTensor<T> batchnorm(const BasicTensor<T>& x, std::span<const T> gamma,
                         std::span<const T> beta, std::span<T> running_mean,
                         std::span<T> running_var, Mode mode, double momentum,
                         double eps, BatchNormCache<T>* cache = nullptr);

template <class T>
BatchNormGrads<T> batchnorm_backward(const BatchNormCache<T>& cache, std::span<const T> gamma,
                                     const BasicTensor<T>& grad_out);

// Inverted dropout. Eval mode is the identity; Train mode zeroes each element
// with probability p and scales survivors by 1 / (1 - p). The mask (already
// scaled) is returned through `mask` when requested.
template <class T>
BasicTensor<T> dropout(const BasicTensor<T>& x, double p, Mode mode, std::uint64_t seed,
                       std::vector<T>* mask = nullptr);

template <class T>
BasicTensor<T> dropout_backward(std::span<const T> mask, const BasicTensor<T>& grad_out);

// Max pooling with -inf padding. argmax receives the flat input index of each
// selected element.
template <class T>
BasicTensor<T> max_pool2d(const BasicTensor<T>& x, int kernel, int stride, int pad,
                          std::vector<std::size_t>* argmax = nullptr);

template <class T>
BasicTensor<T> max_pool2d_backward(std::span<const std::size_t> argmax,
                                   const BasicTensor<T>& grad_out, const Shape& input_shape);

}  // namespace waspseg
