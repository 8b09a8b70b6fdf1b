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

#include <benchmark/benchmark.h>

#include <vector>

#include "waspseg/builders.hpp"
#include "waspseg/conv.hpp"
#include "waspseg/crf.hpp"
#include "waspseg/dataset.hpp"
#include "waspseg/graph.hpp"
#include "waspseg/rng.hpp"
#include "waspseg/trainer.hpp"

namespace {

using namespace waspseg;

Tensor random_tensor(Shape shape, std::uint64_t seed) {
  Tensor t(shape);
  Rng rng(seed);
  for (float& v : t.data()) v = static_cast<float>(rng.uniform(-1.0, 1.0));
  return t;
}

// 3x3 convolution, 32 -> 32 channels on a 32x32 map, at increasing rates.
void BM_AtrousConv(benchmark::State& state) {
  const int rate = static_cast<int>(state.range(0));
  const Tensor x = random_tensor(Shape{1, 32, 32, 32}, 1);
  const Tensor w = random_tensor(Shape{32, 32, 3, 3}, 2);
  const std::vector<float> b(32, 0.0f);
  for (auto _ : state) benchmark::DoNotOptimize(conv2d(x, w, std::span<const float>(b), ConvGeometry::same(3, rate)));
  state.SetItemsProcessed(state.iterations() * 32 * 32 * 32 * 32 * 9);
}
BENCHMARK(BM_AtrousConv)->Arg(1)->Arg(2)->Arg(6)->Arg(12)->Arg(24)->Unit(benchmark::kMicrosecond);

void BM_AtrousConvBackward(benchmark::State& state) {
  const int rate = static_cast<int>(state.range(0));
  const Tensor x = random_tensor(Shape{1, 32, 32, 32}, 1);
  const Tensor w = random_tensor(Shape{32, 32, 3, 3}, 2);
  const Tensor g = random_tensor(Shape{1, 32, 32, 32}, 3);
  for (auto _ : state) benchmark::DoNotOptimize(conv2d_backward(x, w, true, ConvGeometry::same(3, rate), g));
}
BENCHMARK(BM_AtrousConvBackward)->Arg(1)->Arg(6)->Unit(benchmark::kMicrosecond);

// Exact mean-field refinement; cost grows with the square of the pixel count.
void BM_MeanField(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  UnaryField u;
  u.probabilities = Tensor64(Shape{1, 4, n, n}, 0.25);
  u.image = Image(n, n, 3);
  Rng rng(4);
  for (auto& v : u.image.pixels) v = static_cast<std::uint8_t>(rng.uniform_int(0, 255));
  CrfParams p;
  p.iterations = 1;
  for (auto _ : state) benchmark::DoNotOptimize(mean_field_refine(u, p));
  state.SetComplexityN(static_cast<std::int64_t>(n) * n);
}
BENCHMARK(BM_MeanField)->Arg(8)->Arg(16)->Arg(32)->Unit(benchmark::kMillisecond)->Complexity(benchmark::oNSquared);

// Forward and backward of each toy-scale head on a 32-channel 8x8 map.
void BM_HeadForwardBackward(benchmark::State& state) {
  HeadConfig c;
  c.kind = static_cast<HeadKind>(state.range(0));
  c.in_channels = 32;
  c.out_channels = 32;
  c.width = 32;
  c.rates = {1, 2, 3, 4};
  c.res2net_rates = {1, 2, 3};
  c.gap_channels = 32;
  c.se_reduction = 4;
  const ModuleGraph g = build_head(c);
  Weights<float> w = init_weights(g, 1);
  const Tensor x = random_tensor(Shape{8, 32, 8, 8}, 5);
  const Tensor grad = random_tensor(Shape{8, 32, 8, 8}, 6);
  for (auto _ : state) {
    const auto tape = forward(g, w, std::span<const Tensor>(&x, 1), ForwardOptions{Mode::Train, 1, true});
    w.zero_grad();
    backward(g, w, tape, grad);
  }
  state.SetLabel(std::string(to_string(c.kind)));
}
BENCHMARK(BM_HeadForwardBackward)
    ->Arg(static_cast<int>(HeadKind::Aspp))
    ->Arg(static_cast<int>(HeadKind::Cascade))
    ->Arg(static_cast<int>(HeadKind::Res2NetSeg))
    ->Arg(static_cast<int>(HeadKind::Wasp))
    ->Unit(benchmark::kMicrosecond);

// One SGD step of the toy network (batch 8, 64x64).
void BM_TrainStep(benchmark::State& state) {
  NetworkConfig n;
  n.backbone = BackboneDescriptor{BackboneDescriptor::Family::ToyResNet, 1, 16};
  n.head.width = 32;
  n.head.out_channels = 32;
  n.head.rates = {1, 2, 3, 4};
  n.head.gap_channels = 32;
  n.decoder.width = 32;
  n.decoder.num_classes = 4;
  const ModuleGraph g = build_network(n);
  const Dataset data = make_synthetic_dataset(SyntheticConfig{8, 64, 4, 1});
  TrainConfig cfg;
  cfg.steps = 1;
  cfg.base_lr = 0.01;
  for (auto _ : state) {
    state.PauseTiming();
    Weights<float> w = init_weights(g, 1);
    state.ResumeTiming();
    benchmark::DoNotOptimize(train(g, w, data, nullptr, cfg));
  }
}
BENCHMARK(BM_TrainStep)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
