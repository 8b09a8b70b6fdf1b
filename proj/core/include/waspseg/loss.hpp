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

#include "waspseg/image.hpp"
#include "waspseg/tensor.hpp"

namespace waspseg {

template <class T>
struct LossResult {
  double loss = 0.0;          // mean over scored pixels
  BasicTensor<T> grad;        // d loss / d logits
  std::size_t scored = 0;
};

// Softmax cross-entropy over channels. labels holds n * h * w class ids in
// (n, y, x) order; ignore_label pixels add nothing to loss or gradient.
// Throws DataError for out-of-range labels or when every pixel is ignored.
template <class T>
LossResult<T> cross_entropy(const BasicTensor<T>& logits, std::span<const std::uint8_t> labels,
                            std::uint8_t ignore_label = kIgnoreLabel);

}  // namespace waspseg
