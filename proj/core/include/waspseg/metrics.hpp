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
#include <optional>
#include <vector>

#include "waspseg/image.hpp"

namespace waspseg {

struct MiouReport {
  double miou = 0.0;
  // IoU per class; empty for classes absent from both truth and prediction,
  // which are left out of the mean.
  std::vector<std::optional<double>> per_class;
  int classes_scored = 0;
};

// Rows are ground truth, columns predictions. Pixels whose truth is the
// ignore label are not counted.
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(int num_classes, std::uint8_t ignore_label = kIgnoreLabel);

  void accumulate(const LabelMap& prediction, const LabelMap& truth);
  void merge(const ConfusionMatrix& other);

  int num_classes() const noexcept { return classes_; }
  std::uint64_t count(int truth, int prediction) const {
    return counts_[static_cast<std::size_t>(truth) * classes_ + prediction];
  }
  std::uint64_t total() const noexcept;
  std::uint64_t tp(int c) const { return count(c, c); }
  std::uint64_t fp(int c) const;  // column sum minus diagonal
  std::uint64_t fn(int c) const;  // row sum minus diagonal

  // IoU_c = TP / (TP + FP + FN). Throws DataError when nothing was counted.
  MiouReport miou() const;

 private:
  int classes_;
  std::uint8_t ignore_;
  std::vector<std::uint64_t> counts_;
};

}  // namespace waspseg
