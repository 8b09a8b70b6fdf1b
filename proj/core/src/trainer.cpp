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

#include "waspseg/trainer.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>

#include "waspseg/error.hpp"
#include "waspseg/loss.hpp"
#include "waspseg/ops.hpp"

namespace waspseg {

void TrainConfig::validate() const {
  if (steps < 0) throw ConfigError("train: steps must be >= 0");
  if (batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
  if (!(base_lr >= 0.0)) throw ConfigError("train: base_lr must be >= 0");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("train: momentum must lie in [0, 1)");
  if (!(weight_decay >= 0.0)) throw ConfigError("train: weight_decay must be >= 0");
  if (crop < 0) throw ConfigError("train: crop must be >= 0");
  if (num_classes < 1) throw ConfigError("train: num_classes must be >= 1");
  if (eval_every < 0) throw ConfigError("train: eval_every must be >= 0");
  augment_config.validate();
}

Tensor predict_logits(const ModuleGraph& graph, Weights<float>& weights, const Image& image) {
  return run(graph, weights, image_to_tensor(image), ForwardOptions{Mode::Eval, 0, true});
}

LabelMap predict_labels(const ModuleGraph& graph, Weights<float>& weights, const Image& image) {
  return argmax_labels(predict_logits(graph, weights, image));
}

ConfusionMatrix evaluate(const ModuleGraph& graph, Weights<float>& weights, const Dataset& samples, int num_classes) {
  ConfusionMatrix conf(num_classes);
  for (const auto& s : samples) conf.accumulate(predict_labels(graph, weights, s.image), s.labels);
  return conf;
}

TrainResult train(const ModuleGraph& graph, Weights<float>& weights, const Dataset& train_set,
                  const Dataset* val_set, const TrainConfig& config,
                  const std::function<void(const TraceRow&)>& on_step) {
  config.validate();
  check_weights(graph, weights);
  if (train_set.empty()) throw DataError("train: empty training set");
  const int crop = config.crop > 0 ? config.crop : train_set.front().image.height;
  const PolySchedule schedule{config.base_lr, std::max(1, config.steps), config.power};

  std::vector<bool> decay(graph.params().size());
  for (std::size_t i = 0; i < decay.size(); ++i) decay[i] = graph.params()[i].init == ParamInit::HeNormal;
  std::vector<std::vector<float>> velocity(weights.params.size());
  for (std::size_t i = 0; i < velocity.size(); ++i) velocity[i].assign(weights.params[i].size(), 0.0f);

  Rng order_rng(derive_seed(config.seed, 0x0dde4ull));
  std::vector<std::size_t> order(train_set.size());
  std::size_t cursor = order.size();

  TrainResult result;
  for (int step = 0; step < config.steps; ++step) {
    std::vector<Image> images;
    std::vector<std::uint8_t> labels;
    images.reserve(static_cast<std::size_t>(config.batch_size));
    for (int b = 0; b < config.batch_size; ++b) {
      if (cursor == order.size()) {
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        for (std::size_t i = order.size(); i > 1; --i) {
          std::swap(order[i - 1], order[static_cast<std::size_t>(order_rng.uniform_int(0, static_cast<int>(i - 1)))]);
        }
        cursor = 0;
      }
      const Sample& s = train_set[order[cursor++]];
      Image im = s.image;
      LabelMap lab = s.labels;
      Rng aug(derive_seed(config.seed, (static_cast<std::uint64_t>(step) << 16) + static_cast<std::uint64_t>(b)));
      if (config.augment) random_scale(im, lab, config.augment_config, aug);
      if (config.augment || im.height != crop || im.width != crop) random_crop(im, lab, crop, aug);
      labels.insert(labels.end(), lab.labels.begin(), lab.labels.end());
      images.push_back(std::move(im));
    }
    std::vector<const Image*> ptrs;
    for (const auto& im : images) ptrs.push_back(&im);
    const Tensor input = images_to_tensor(ptrs);

    const double lr = schedule.lr(step);
    TraceRow row;
    row.step = step + 1;
    row.lr = lr;
    try {
      const ForwardOptions fwd{Mode::Train, derive_seed(config.seed, 0xd40f0000ull + static_cast<std::uint64_t>(step)), true};
      const auto tape = forward(graph, weights, std::span<const Tensor>(&input, 1), fwd);
      auto loss = cross_entropy(tape.value(graph.output()), labels);
      row.loss = loss.loss;
      weights.zero_grad();
      backward(graph, weights, tape, loss.grad);
    } catch (const NumericalError& e) {
      throw NumericalError("train: divergence at step " + std::to_string(step + 1) + ": " + e.what());
    }
    for (std::size_t i = 0; i < weights.params.size(); ++i) {
      auto w = weights.params[i].data();
      const auto g = std::as_const(weights.params[i]).grad();
      auto& v = velocity[i];
      const double wd = decay[i] ? config.weight_decay : 0.0;
      for (std::size_t k = 0; k < w.size(); ++k) {
        v[k] = static_cast<float>(config.momentum * v[k] + lr * (g[k] + wd * w[k]));
        w[k] -= v[k];
      }
    }
    for (const auto& p : weights.params) {
      if (!p.all_finite()) {
        throw NumericalError("train: divergence at step " + std::to_string(step + 1) + ": non-finite parameters");
      }
    }
    const bool last = step + 1 == config.steps;
    if (val_set != nullptr && !val_set->empty() &&
        (last || (config.eval_every > 0 && (step + 1) % config.eval_every == 0))) {
      row.miou = evaluate(graph, weights, *val_set, config.num_classes).miou().miou;
      if (last) result.final_miou = row.miou;
    }
    result.trace.push_back(row);
    if (on_step) on_step(row);
  }
  return result;
}

std::string weights_checksum(const Weights<float>& weights) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  auto mix = [&](const Tensor& t) {
    for (float v : t.data()) {
      std::uint32_t bits;
      std::memcpy(&bits, &v, sizeof bits);
      for (int i = 0; i < 4; ++i) {
        h ^= (bits >> (8 * i)) & 0xffu;
        h *= 0x100000001b3ull;
      }
    }
  };
  for (const auto& p : weights.params) mix(p);
  for (const auto& b : weights.buffers) mix(b);
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace waspseg
