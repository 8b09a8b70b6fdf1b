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
#include <string>
#include <vector>

#include "waspseg/tensor.hpp"

namespace waspseg {

inline constexpr std::uint8_t kIgnoreLabel = 255;

// 8-bit image, channels interleaved (row-major, channel fastest).
struct Image {
  int width = 0;
  int height = 0;
  int channels = 3;
  std::vector<std::uint8_t> pixels;

  Image() = default;
  Image(int w, int h, int c, std::uint8_t fill = 0);

  std::uint8_t& at(int y, int x, int c) { return pixels[(static_cast<std::size_t>(y) * width + x) * channels + c]; }
  std::uint8_t at(int y, int x, int c) const {
    return pixels[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
  friend bool operator==(const Image&, const Image&) = default;
};

// Per-pixel class ids; kIgnoreLabel marks unscored pixels.
struct LabelMap {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> labels;

  LabelMap() = default;
  LabelMap(int w, int h, std::uint8_t fill = 0);

  std::size_t size() const noexcept { return labels.size(); }
  std::uint8_t& at(int y, int x) { return labels[static_cast<std::size_t>(y) * width + x]; }
  std::uint8_t at(int y, int x) const { return labels[static_cast<std::size_t>(y) * width + x]; }
  friend bool operator==(const LabelMap&, const LabelMap&) = default;
};

// Network input for a batch of equally sized RGB images: (n, 3, h, w) with
// v / 127.5 - 1 scaling.
Tensor images_to_tensor(const std::vector<const Image*>& images);
Tensor image_to_tensor(const Image& image);

// Per-pixel argmax over channels of sample n.
template <class T>
LabelMap argmax_labels(const BasicTensor<T>& scores, int n = 0);

}  // namespace waspseg
