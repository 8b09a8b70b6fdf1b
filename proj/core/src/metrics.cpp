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

#include "waspseg/metrics.hpp"

#include <string>

#include "waspseg/error.hpp"

namespace waspseg {

ConfusionMatrix::ConfusionMatrix(int num_classes, std::uint8_t ignore_label)
    : classes_(num_classes), ignore_(ignore_label) {
  if (num_classes < 1 || num_classes > 255) {
    throw ConfigError("confusion matrix: class count must lie in [1, 255], got " + std::to_string(num_classes));
  }
  counts_.assign(static_cast<std::size_t>(num_classes) * num_classes, 0);
}

void ConfusionMatrix::accumulate(const LabelMap& prediction, const LabelMap& truth) {
  if (prediction.width != truth.width || prediction.height != truth.height) {
    throw ShapeError("confusion: prediction is " + std::to_string(prediction.width) + "x" +
                     std::to_string(prediction.height) + " but truth is " + std::to_string(truth.width) + "x" +
                     std::to_string(truth.height));
  }
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const int t = truth.labels[i];
    if (t == ignore_) continue;
    const int p = prediction.labels[i];
    if (t >= classes_ || p >= classes_) {
      throw DataError("confusion: label " + std::to_string(t >= classes_ ? t : p) + " at pixel " + std::to_string(i) +
                      " outside [0, " + std::to_string(classes_) + ")");
    }
    ++counts_[static_cast<std::size_t>(t) * classes_ + p];
  }
}

void ConfusionMatrix::merge(const ConfusionMatrix& other) {
  if (other.classes_ != classes_) throw ShapeError("confusion: merging different class counts");
  for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += other.counts_[i];
}

std::uint64_t ConfusionMatrix::total() const noexcept {
  std::uint64_t s = 0;
  for (auto v : counts_) s += v;
  return s;
}

std::uint64_t ConfusionMatrix::fp(int c) const {
  std::uint64_t s = 0;
  for (int t = 0; t < classes_; ++t) s += count(t, c);
  return s - tp(c);
}

std::uint64_t ConfusionMatrix::fn(int c) const {
  std::uint64_t s = 0;
  for (int p = 0; p < classes_; ++p) s += count(c, p);
  return s - tp(c);
}

MiouReport ConfusionMatrix::miou() const {
  if (total() == 0) throw DataError("mIOU of an empty confusion matrix");
  MiouReport r;
  r.per_class.resize(static_cast<std::size_t>(classes_));
  double sum = 0.0;
  for (int c = 0; c < classes_; ++c) {
    const std::uint64_t uni = tp(c) + fp(c) + fn(c);
    if (uni == 0) continue;
    const double iou = static_cast<double>(tp(c)) / static_cast<double>(uni);
    r.per_class[static_cast<std::size_t>(c)] = iou;
    sum += iou;
    ++r.classes_scored;
  }
  r.miou = sum / r.classes_scored;
  return r;
}

}  // namespace waspseg
