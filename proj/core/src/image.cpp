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

#include "waspseg/image.hpp"

#include <string>

#include "waspseg/error.hpp"

namespace waspseg {

Image::Image(int w, int h, int c, std::uint8_t fill) : width(w), height(h), channels(c) {
  if (w < 0 || h < 0 || (c != 1 && c != 3)) {
    throw ShapeError("image: invalid geometry " + std::to_string(w) + "x" + std::to_string(h) + "x" +
                     std::to_string(c));
  }
  pixels.assign(static_cast<std::size_t>(w) * h * c, fill);
}

LabelMap::LabelMap(int w, int h, std::uint8_t fill) : width(w), height(h) {
  if (w < 0 || h < 0) throw ShapeError("label map: negative extent");
  labels.assign(static_cast<std::size_t>(w) * h, fill);
}

Tensor images_to_tensor(const std::vector<const Image*>& images) {
  if (images.empty()) throw ShapeError("images_to_tensor: empty batch");
  const int w = images[0]->width;
  const int h = images[0]->height;
  Tensor t(Shape{static_cast<int>(images.size()), 3, h, w});
  for (std::size_t n = 0; n < images.size(); ++n) {
    const Image& im = *images[n];
    if (im.width != w || im.height != h || im.channels != 3) {
      throw ShapeError("images_to_tensor: image " + std::to_string(n) + " is " + std::to_string(im.width) + "x" +
                       std::to_string(im.height) + "x" + std::to_string(im.channels) + ", expected " +
                       std::to_string(w) + "x" + std::to_string(h) + "x3");
    }
    for (int c = 0; c < 3; ++c) {
      auto plane = t.plane(static_cast<int>(n), c);
      for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
          plane[static_cast<std::size_t>(y) * w + x] = static_cast<float>(im.at(y, x, c) / 127.5 - 1.0);
        }
      }
    }
  }
  return t;
}

Tensor image_to_tensor(const Image& image) { return images_to_tensor({&image}); }

template <class T>
LabelMap argmax_labels(const BasicTensor<T>& scores, int n) {
  if (scores.c() < 1 || scores.c() > 255) throw ShapeError("argmax_labels: need 1..255 channels");
  LabelMap out(scores.w(), scores.h());
  const std::size_t plane = scores.shape().plane();
  for (std::size_t q = 0; q < plane; ++q) {
    int best = 0;
    T best_v = scores.plane(n, 0)[q];
    for (int c = 1; c < scores.c(); ++c) {
      const T v = scores.plane(n, c)[q];
      if (v > best_v) {
        best_v = v;
        best = c;
      }
    }
    out.labels[q] = static_cast<std::uint8_t>(best);
  }
  return out;
}

template LabelMap argmax_labels(const BasicTensor<float>&, int);
template LabelMap argmax_labels(const BasicTensor<double>&, int);

}  // namespace waspseg
