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

#include "waspseg/loss.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "waspseg/error.hpp"

namespace waspseg {

template <class T>
LossResult<T> cross_entropy(const BasicTensor<T>& logits, std::span<const std::uint8_t> labels,
                            std::uint8_t ignore_label) {
  const std::size_t plane = logits.shape().plane();
  if (labels.size() != static_cast<std::size_t>(logits.n()) * plane) {
    throw ShapeError("cross_entropy: " + std::to_string(labels.size()) + " labels for logits " +
                     logits.shape().str());
  }
  const int C = logits.c();
  LossResult<T> r;
  r.grad = BasicTensor<T>(logits.shape());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == ignore_label) continue;
    if (labels[i] >= C) {
      throw DataError("cross_entropy: label " + std::to_string(labels[i]) + " at pixel " + std::to_string(i) +
                      " for " + std::to_string(C) + " classes");
    }
    ++r.scored;
  }
  if (r.scored == 0) throw DataError("cross_entropy: every pixel carries the ignore label");
  const double inv = 1.0 / static_cast<double>(r.scored);
  std::vector<double> p(static_cast<std::size_t>(C));
  double total = 0.0;
  for (int n = 0; n < logits.n(); ++n) {
    for (std::size_t q = 0; q < plane; ++q) {
      const std::uint8_t label = labels[static_cast<std::size_t>(n) * plane + q];
      if (label == ignore_label) continue;
      double mx = -std::numeric_limits<double>::infinity();
      for (int c = 0; c < C; ++c) mx = std::max(mx, static_cast<double>(logits.plane(n, c)[q]));
      double sum = 0.0;
      for (int c = 0; c < C; ++c) {
        p[c] = std::exp(static_cast<double>(logits.plane(n, c)[q]) - mx);
        sum += p[c];
      }
      total += std::log(sum) + mx - static_cast<double>(logits.plane(n, label)[q]);
      for (int c = 0; c < C; ++c) {
        const double g = p[c] / sum - (c == label ? 1.0 : 0.0);
        r.grad.plane(n, c)[q] = static_cast<T>(g * inv);
      }
    }
  }
  r.loss = total * inv;
  if (!std::isfinite(r.loss)) throw NumericalError("cross_entropy: non-finite loss");
  return r;
}

template LossResult<float> cross_entropy(const BasicTensor<float>&, std::span<const std::uint8_t>, std::uint8_t);
template LossResult<double> cross_entropy(const BasicTensor<double>&, std::span<const std::uint8_t>, std::uint8_t);

}  // namespace waspseg
