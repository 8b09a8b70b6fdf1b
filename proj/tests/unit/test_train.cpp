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

#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <vector>

#include "test_util.hpp"
#include "waspseg/builders.hpp"
#include "waspseg/dataset.hpp"
#include "waspseg/error.hpp"
#include "waspseg/gradcheck.hpp"
#include "waspseg/loss.hpp"
#include "waspseg/schedule.hpp"
#include "waspseg/trainer.hpp"

namespace waspseg {
namespace {

using testing::random_tensor;

TEST(PolySchedule, EndpointsAndMidpoint) {
  const PolySchedule s{0.01, 1000, 0.9};
  EXPECT_EQ(s.lr(0), 0.01);
  EXPECT_EQ(s.lr(1000), 0.0);
  EXPECT_NEAR(s.lr(500), 0.01 * std::pow(0.5, 0.9), 1e-12);
}

TEST(PolySchedule, StrictlyDecreasingOnDenseGrid) {
  const PolySchedule s{0.007, 1000, 0.9};
  for (int i = 1; i <= 1000; ++i) EXPECT_LT(s.lr(i), s.lr(i - 1)) << i;
}

TEST(PolySchedule, MatchesClosedForm) {
  const PolySchedule s{0.05, 37, 0.9};
  for (int i = 0; i <= 37; ++i) EXPECT_NEAR(s.lr(i), 0.05 * std::pow(1.0 - i / 37.0, 0.9), 1e-12);
}

TEST(PolySchedule, Errors) {
  const PolySchedule s{0.01, 10, 0.9};
  EXPECT_THROW(s.lr(-1), ConfigError);
  EXPECT_THROW(s.lr(11), ConfigError);
  EXPECT_THROW((PolySchedule{0.01, 0, 0.9}.validate()), ConfigError);
  EXPECT_THROW((PolySchedule{-1.0, 10, 0.9}.validate()), ConfigError);
}

TEST(CrossEntropy, UniformLogitsGiveLogC) {
  const Tensor64 logits(Shape{1, 4, 2, 3});
  const std::vector<std::uint8_t> labels{0, 1, 2, 3, 0, 1};
  const auto r = cross_entropy(logits, labels);
  EXPECT_NEAR(r.loss, std::log(4.0), 1e-15);
  EXPECT_EQ(r.scored, 6u);
}

TEST(CrossEntropy, IgnoredPixelsContributeNothing) {
  const Tensor64 logits = random_tensor<double>(Shape{1, 3, 1, 4}, 5);
  const std::vector<std::uint8_t> labels{1, kIgnoreLabel, 2, kIgnoreLabel};
  const auto r = cross_entropy(logits, labels);
  EXPECT_EQ(r.scored, 2u);
  for (int c = 0; c < 3; ++c) {
    EXPECT_EQ(r.grad.at(0, c, 0, 1), 0.0);
    EXPECT_EQ(r.grad.at(0, c, 0, 3), 0.0);
  }
  const std::vector<std::uint8_t> kept{1, 2};
  Tensor64 sub(Shape{1, 3, 1, 2});
  for (int c = 0; c < 3; ++c) {
    sub.at(0, c, 0, 0) = logits.at(0, c, 0, 0);
    sub.at(0, c, 0, 1) = logits.at(0, c, 0, 2);
  }
  EXPECT_NEAR(r.loss, cross_entropy(sub, kept).loss, 1e-15);
}

TEST(CrossEntropy, GradientMatchesFiniteDifferences) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    Rng rng(seed);
    const Shape shape{2, 4, 3, 3};
    std::vector<std::uint8_t> labels(static_cast<std::size_t>(shape.n) * shape.plane());
    for (auto& l : labels) l = rng.bernoulli(0.2) ? kIgnoreLabel : static_cast<std::uint8_t>(rng.uniform_int(0, 3));
    labels[0] = 1;
    ScalarFunction f;
    f.value = [&](std::span<const Tensor64> x) { return cross_entropy(x[0], labels).loss; };
    f.gradient = [&](std::span<const Tensor64> x) { return std::vector<Tensor64>{cross_entropy(x[0], labels).grad}; };
    const std::vector<Tensor64> in{random_tensor<double>(shape, seed * 11, -2, 2)};
    const auto report = grad_check(f, in);
    EXPECT_TRUE(report.passed) << "seed " << seed << " worst " << report.worst << " err " << report.max_relative_error;
  }
}

TEST(CrossEntropy, Errors) {
  const Tensor64 logits(Shape{1, 2, 1, 2});
  EXPECT_THROW(cross_entropy(logits, std::vector<std::uint8_t>{0}), ShapeError);
  EXPECT_THROW(cross_entropy(logits, std::vector<std::uint8_t>{0, 2}), DataError);
  EXPECT_THROW(cross_entropy(logits, std::vector<std::uint8_t>{kIgnoreLabel, kIgnoreLabel}), DataError);
}

Sample small_sample(int w, int h) {
  Sample s;
  s.image = Image(w, h, 3);
  s.labels = LabelMap(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      s.image.at(y, x, 0) = static_cast<std::uint8_t>(x * 10);
      s.image.at(y, x, 1) = static_cast<std::uint8_t>(y * 10);
      s.labels.at(y, x) = static_cast<std::uint8_t>((x + y) % 3);
    }
  }
  return s;
}

TEST(Augment, RescaleChangesExtentsAndKeepsLabelSet) {
  Sample s = small_sample(20, 10);
  rescale(s.image, s.labels, 1.5);
  EXPECT_EQ(s.image.width, 30);
  EXPECT_EQ(s.image.height, 15);
  EXPECT_EQ(s.labels.width, 30);
  EXPECT_EQ(s.labels.height, 15);
  for (auto l : s.labels.labels) EXPECT_LT(l, 3);
  Sample t = small_sample(20, 10);
  rescale(t.image, t.labels, 1.0);
  EXPECT_EQ(t.image, small_sample(20, 10).image);
  EXPECT_EQ(t.labels, small_sample(20, 10).labels);
  Sample u = small_sample(2, 2);
  EXPECT_THROW(rescale(u.image, u.labels, 0.1), ShapeError);
}

TEST(Augment, RandomScaleStaysInRange) {
  Rng rng(4);
  const AugmentConfig cfg;
  for (int k = 0; k < 50; ++k) {
    Sample s = small_sample(40, 40);
    const double scale = random_scale(s.image, s.labels, cfg, rng);
    EXPECT_GE(scale, 0.5);
    EXPECT_LE(scale, 1.5);
    EXPECT_EQ(s.image.width, static_cast<int>(std::lround(40 * scale)));
  }
  EXPECT_THROW((AugmentConfig{1.5, 0.5}.validate()), ConfigError);
  EXPECT_THROW((AugmentConfig{0.0, 1.0}.validate()), ConfigError);
}

TEST(Augment, CropPadsWithIgnoreLabel) {
  Rng rng(6);
  Sample s = small_sample(5, 5);
  random_crop(s.image, s.labels, 8, rng);
  EXPECT_EQ(s.image.width, 8);
  EXPECT_EQ(s.labels.height, 8);
  int ignored = 0;
  for (int y = 0; y < 8; ++y) {
    for (int x = 0; x < 8; ++x) {
      if (s.labels.at(y, x) == kIgnoreLabel) {
        ++ignored;
        for (int c = 0; c < 3; ++c) EXPECT_EQ(s.image.at(y, x, c), 0);
      }
    }
  }
  EXPECT_EQ(ignored, 64 - 25);
}

TEST(Augment, CropOfLargerImageIsAWindow) {
  Rng rng(7);
  const Sample orig = small_sample(12, 9);
  Sample s = orig;
  random_crop(s.image, s.labels, 6, rng);
  // Find the offset from the encoded coordinates.
  const int ox = s.image.at(0, 0, 0) / 10;
  const int oy = s.image.at(0, 0, 1) / 10;
  for (int y = 0; y < 6; ++y) {
    for (int x = 0; x < 6; ++x) EXPECT_EQ(s.labels.at(y, x), orig.labels.at(y + oy, x + ox));
  }
}

TEST(Synthetic, RegenerationIsByteIdentical) {
  SyntheticConfig cfg;
  cfg.n_images = 1;
  cfg.seed = 42;
  const auto a = make_synthetic_dataset(cfg);
  const auto b = make_synthetic_dataset(cfg);
  ASSERT_EQ(a.size(), 1u);
  EXPECT_EQ(a[0].image, b[0].image);
  EXPECT_EQ(a[0].labels, b[0].labels);
  EXPECT_EQ(a[0].name, "00000");
  cfg.seed = 43;
  EXPECT_NE(make_synthetic_dataset(cfg)[0].image, a[0].image);
}

TEST(Synthetic, SampleDependsOnlyOnSeedAndIndex) {
  SyntheticConfig cfg;
  cfg.n_images = 5;
  const auto all = make_synthetic_dataset(cfg);
  const Sample third = make_synthetic_sample(cfg, 3);
  EXPECT_EQ(all[3].image, third.image);
  EXPECT_EQ(all[3].labels, third.labels);
}

TEST(Synthetic, LabelsBelowClassCount) {
  for (int classes : {2, 4, 7}) {
    SyntheticConfig cfg;
    cfg.n_images = 10;
    cfg.num_classes = classes;
    cfg.size = 32;
    for (const auto& s : make_synthetic_dataset(cfg)) {
      EXPECT_EQ(s.image.width, 32);
      for (auto l : s.labels.labels) EXPECT_LT(l, classes);
    }
  }
}

TEST(Synthetic, ClassFrequenciesWithinDocumentedBounds) {
  for (std::uint64_t seed : {1ull, 9ull, 2024ull}) {
    SyntheticConfig cfg;
    cfg.n_images = 100;
    cfg.seed = seed;
    std::map<int, double> pixels;
    std::map<int, int> images;
    double total = 0;
    for (const auto& s : make_synthetic_dataset(cfg)) {
      std::map<int, bool> present;
      for (auto l : s.labels.labels) {
        pixels[l] += 1;
        present[l] = true;
        total += 1;
      }
      for (const auto& [c, _] : present) images[c] += 1;
    }
    EXPECT_GE(pixels[0] / total, 0.75);
    EXPECT_LE(pixels[0] / total, 0.90);
    for (int c = 1; c < 4; ++c) {
      EXPECT_GE(pixels[c] / total, 0.02) << "class " << c << " seed " << seed;
      EXPECT_LE(pixels[c] / total, 0.12) << "class " << c << " seed " << seed;
      EXPECT_GE(images[c], 30) << "class " << c << " seed " << seed;
    }
  }
}

TEST(Synthetic, InvalidDimensions) {
  EXPECT_THROW((SyntheticConfig{10, 16, 4, 1}.validate()), ConfigError);
  EXPECT_THROW((SyntheticConfig{10, 64, 1, 1}.validate()), ConfigError);
  EXPECT_THROW((SyntheticConfig{0, 64, 4, 1}.validate()), ConfigError);
}

// A network small enough to train in a unit test.
NetworkConfig tiny_network(HeadKind kind = HeadKind::Wasp) {
  NetworkConfig n;
  n.backbone = BackboneDescriptor{BackboneDescriptor::Family::ToyResNet, 1, 4};
  n.head.kind = kind;
  n.head.width = 4;
  n.head.out_channels = 4;
  n.head.rates = {1, 2, 3, 4};
  n.head.res2net_rates = {1, 2, 3};
  n.head.gap_channels = 4;
  n.head.se_reduction = 2;
  n.decoder.width = 4;
  n.decoder.num_classes = 3;
  n.decoder.dropout = 0.0;
  return n;
}

Dataset tiny_dataset(int n, std::uint64_t seed) {
  SyntheticConfig cfg{n, 32, 3, seed};
  return make_synthetic_dataset(cfg);
}

TEST(Trainer, ZeroLearningRateLeavesParametersUnchanged) {
  const ModuleGraph g = build_network(tiny_network());
  Weights<float> w = init_weights(g, 3);
  const Weights<float> before = w;
  TrainConfig cfg;
  cfg.steps = 3;
  cfg.batch_size = 2;
  cfg.base_lr = 0.0;
  cfg.num_classes = 3;
  const auto r = train(g, w, tiny_dataset(4, 1), nullptr, cfg);
  ASSERT_EQ(r.trace.size(), 3u);
  for (std::size_t i = 0; i < w.params.size(); ++i) EXPECT_EQ(w.params[i].vector(), before.params[i].vector());
  EXPECT_EQ(r.trace[0].lr, 0.0);
}

TEST(Trainer, TraceFollowsPolySchedule) {
  const ModuleGraph g = build_network(tiny_network());
  Weights<float> w = init_weights(g, 3);
  TrainConfig cfg;
  cfg.steps = 4;
  cfg.batch_size = 1;
  cfg.base_lr = 0.01;
  cfg.num_classes = 3;
  const auto r = train(g, w, tiny_dataset(2, 1), nullptr, cfg);
  const PolySchedule s{0.01, 4, 0.9};
  for (int i = 0; i < 4; ++i) {
    EXPECT_EQ(r.trace[i].step, i + 1);
    EXPECT_EQ(r.trace[i].lr, s.lr(i));
  }
}

TEST(Trainer, OverfitsTwoImages) {
  const ModuleGraph g = build_network(tiny_network());
  Weights<float> w = init_weights(g, 5);
  TrainConfig cfg;
  cfg.steps = 300;
  cfg.batch_size = 2;
  cfg.base_lr = 0.05;
  cfg.augment = false;
  cfg.weight_decay = 0.0;
  cfg.num_classes = 3;
  const Dataset data = tiny_dataset(2, 7);
  const auto r = train(g, w, data, &data, cfg);
  double tail = 0.0;
  for (int i = 290; i < 300; ++i) tail += r.trace[i].loss / 10.0;
  EXPECT_LT(tail, 0.05);
  ASSERT_TRUE(r.final_miou.has_value());
  EXPECT_GT(*r.final_miou, 0.9);
}

TEST(Trainer, IdenticalSeedsGiveIdenticalWeights) {
  const ModuleGraph g = build_network(tiny_network(HeadKind::Aspp));
  TrainConfig cfg;
  cfg.steps = 5;
  cfg.batch_size = 2;
  cfg.num_classes = 3;
  cfg.seed = 11;
  const Dataset data = tiny_dataset(3, 2);
  Weights<float> a = init_weights(g, 1), b = init_weights(g, 1);
  const auto ra = train(g, a, data, &data, cfg);
  const auto rb = train(g, b, data, &data, cfg);
  EXPECT_EQ(weights_checksum(a), weights_checksum(b));
  for (std::size_t i = 0; i < ra.trace.size(); ++i) EXPECT_EQ(ra.trace[i].loss, rb.trace[i].loss);
  cfg.seed = 12;
  Weights<float> c = init_weights(g, 1);
  train(g, c, data, &data, cfg);
  EXPECT_NE(weights_checksum(a), weights_checksum(c));
}

TEST(Trainer, DivergenceNamesTheStep) {
  const ModuleGraph g = build_network(tiny_network());
  Weights<float> w = init_weights(g, 1);
  TrainConfig cfg;
  cfg.steps = 50;
  cfg.batch_size = 1;
  cfg.base_lr = 1e30;
  cfg.num_classes = 3;
  try {
    train(g, w, tiny_dataset(2, 1), nullptr, cfg);
    FAIL() << "expected divergence";
  } catch (const NumericalError& e) {
    EXPECT_NE(std::string(e.what()).find("step "), std::string::npos) << e.what();
  }
}

TEST(Trainer, ConfigErrors) {
  const ModuleGraph g = build_network(tiny_network());
  Weights<float> w = init_weights(g, 1);
  TrainConfig cfg;
  cfg.batch_size = 0;
  EXPECT_THROW(train(g, w, tiny_dataset(1, 1), nullptr, cfg), ConfigError);
  cfg = TrainConfig{};
  cfg.momentum = 1.0;
  EXPECT_THROW(train(g, w, tiny_dataset(1, 1), nullptr, cfg), ConfigError);
  EXPECT_THROW(train(g, w, Dataset{}, nullptr, TrainConfig{}), DataError);
}

TEST(Trainer, EvaluateAndChecksum) {
  const ModuleGraph g = build_network(tiny_network());
  Weights<float> w = init_weights(g, 1);
  const Dataset data = tiny_dataset(2, 3);
  const auto conf = evaluate(g, w, data, 3);
  EXPECT_EQ(conf.total(), 2u * 32u * 32u);
  const std::string sum = weights_checksum(w);
  EXPECT_EQ(sum.size(), 16u);
  w.params[0][0] = std::nextafter(w.params[0][0], 1.0f);
  EXPECT_NE(weights_checksum(w), sum);
}

}  // namespace
}  // namespace waspseg
