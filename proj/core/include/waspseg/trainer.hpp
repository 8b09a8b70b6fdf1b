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
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "waspseg/dataset.hpp"
#include "waspseg/graph.hpp"
#include "waspseg/metrics.hpp"
#include "waspseg/schedule.hpp"

namespace waspseg {

struct TrainConfig {
  int steps = 500;
  int batch_size = 8;
  double base_lr = 0.007;
  double power = 0.9;
  double momentum = 0.9;
  // Applied to convolution kernels only, not to biases or batch-norm affine
  // parameters.
  double weight_decay = 5e-4;
  bool augment = true;
  AugmentConfig augment_config;
  // Square training crop; 0 uses the first image's height.
  int crop = 0;
  int num_classes = 4;
  // Validation mIOU is computed every eval_every steps (0: only at the end).
  int eval_every = 0;
  std::uint64_t seed = 1;

  void validate() const;
};

struct TraceRow {
  int step = 0;  // 1-based
  double lr = 0.0;
  double loss = 0.0;
  std::optional<double> miou;
};

struct TrainResult {
  std::vector<TraceRow> trace;
  std::optional<double> final_miou;
};

// SGD with momentum (v <- m v + lr (g + wd w); w <- w - v), poly learning
// rate, mini-batches drawn from a seeded per-epoch shuffle. Identical inputs
// and seed give identical weights. A non-finite loss or activation aborts
// with NumericalError naming the step.
TrainResult train(const ModuleGraph& graph, Weights<float>& weights, const Dataset& train_set,
                  const Dataset* val_set, const TrainConfig& config,
                  const std::function<void(const TraceRow&)>& on_step = {});

// Forward pass in eval mode, one image at a time.
Tensor predict_logits(const ModuleGraph& graph, Weights<float>& weights, const Image& image);
LabelMap predict_labels(const ModuleGraph& graph, Weights<float>& weights, const Image& image);

ConfusionMatrix evaluate(const ModuleGraph& graph, Weights<float>& weights, const Dataset& samples, int num_classes);

// FNV-1a over the little-endian bytes of every parameter and buffer, as 16
// hex digits.
std::string weights_checksum(const Weights<float>& weights);

}  // namespace waspseg
