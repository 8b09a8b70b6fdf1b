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

// Instance generators and oracles shared by the unit and acceptance tests.

#pragma once

#include <cstdint>
#include <set>
#include <utility>
#include <vector>

#include "waspseg/crf.hpp"
#include "waspseg/image.hpp"
#include "waspseg/rng.hpp"

namespace waspseg::testing {

inline LabelMap random_labels(int w, int h, int classes, double ignore_rate, Rng& rng) {
  LabelMap m(w, h);
  for (auto& l : m.labels) {
    l = rng.bernoulli(ignore_rate) ? kIgnoreLabel : static_cast<std::uint8_t>(rng.uniform_int(0, classes - 1));
  }
  return m;
}

// IoU from pixel index sets: P_c = {i : pred = c}, G_c = {i : truth = c},
// both restricted to scored pixels. Classes with an empty union are left out
// of the mean.
struct SetOracle {
  std::vector<std::uint64_t> tp, fp, fn;
  double miou = 0.0;
};

inline SetOracle set_oracle(const std::vector<LabelMap>& preds, const std::vector<LabelMap>& truths, int classes) {
  SetOracle o;
  o.tp.assign(classes, 0);
  o.fp.assign(classes, 0);
  o.fn.assign(classes, 0);
  double sum = 0.0;
  int scored = 0;
  for (int c = 0; c < classes; ++c) {
    std::set<std::pair<std::size_t, std::size_t>> p, g;
    for (std::size_t k = 0; k < preds.size(); ++k) {
      for (std::size_t i = 0; i < truths[k].size(); ++i) {
        if (truths[k].labels[i] == kIgnoreLabel) continue;
        if (preds[k].labels[i] == c) p.insert({k, i});
        if (truths[k].labels[i] == c) g.insert({k, i});
      }
    }
    std::uint64_t inter = 0;
    for (const auto& e : p) inter += g.count(e);
    const std::uint64_t uni = p.size() + g.size() - inter;
    o.tp[c] = inter;
    o.fp[c] = p.size() - inter;
    o.fn[c] = g.size() - inter;
    if (uni > 0) {
      sum += static_cast<double>(inter) / static_cast<double>(uni);
      ++scored;
    }
  }
  o.miou = scored > 0 ? sum / scored : 0.0;
  return o;
}

// 8x8 image, left half class 0 in red, right half class 1 in blue, slight
// colour noise. The unary gives the true class a probability in [0.6, 0.8],
// except on a random `flip` fraction of the pixels where the classes are
// swapped.
inline CrfSample two_region_instance(std::uint64_t seed, double flip = 0.15) {
  Rng rng(seed);
  const int n = 8;
  CrfSample s;
  s.unary.image = Image(n, n, 3);
  s.unary.probabilities = Tensor64(Shape{1, 2, n, n});
  s.truth = LabelMap(n, n);
  for (int y = 0; y < n; ++y) {
    for (int x = 0; x < n; ++x) {
      const int label = x < n / 2 ? 0 : 1;
      s.truth.at(y, x) = static_cast<std::uint8_t>(label);
      const int base[2][3] = {{200, 40, 40}, {40, 40, 200}};
      for (int c = 0; c < 3; ++c) {
        s.unary.image.at(y, x, c) = static_cast<std::uint8_t>(base[label][c] + rng.uniform_int(-3, 3));
      }
      const double confidence = rng.uniform(0.6, 0.8);
      const double p_true = rng.bernoulli(flip) ? 1.0 - confidence : confidence;
      s.unary.probabilities.at(0, label, y, x) = p_true;
      s.unary.probabilities.at(0, 1 - label, y, x) = 1.0 - p_true;
    }
  }
  return s;
}

}  // namespace waspseg::testing
