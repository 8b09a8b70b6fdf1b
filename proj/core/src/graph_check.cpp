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

#include "waspseg/graph_check.hpp"

#include <utility>

#include "waspseg/rng.hpp"

namespace waspseg {

GradCheckReport grad_check_graph(const ModuleGraph& graph, const Weights<float>& weights,
                                 std::span<const Tensor> inputs, const GraphCheckOptions& options) {
  const Weights<double> base = weights.cast<double>();
  const std::size_t n_inputs = inputs.size();

  std::vector<Tensor64> probe;
  for (const auto& x : inputs) probe.push_back(x.cast<double>());
  if (options.include_params) {
    for (const auto& p : base.params) probe.push_back(p);
  }

  // Output shape from one evaluation of the unperturbed graph.
  Weights<double> w0 = base;
  const ForwardOptions fwd{options.mode, options.check.seed, true};
  const auto tape0 = forward(graph, w0, std::span<const Tensor64>(probe.data(), n_inputs), fwd);
  Tensor64 projection(tape0.value(graph.output()).shape());
  Rng rng(options.projection_seed);
  for (double& v : projection.data()) v = rng.uniform(-1.0, 1.0);

  auto weights_from = [&](std::span<const Tensor64> xs) {
    Weights<double> w;
    w.buffers = base.buffers;
    if (options.include_params) {
      w.params.assign(xs.begin() + static_cast<std::ptrdiff_t>(n_inputs), xs.end());
    } else {
      w.params = base.params;
    }
    return w;
  };
  auto run_tape = [&](std::span<const Tensor64> xs, Weights<double>& w) {
    return forward(graph, w, xs.first(n_inputs), fwd);
  };

  ScalarFunction f;
  f.value = [&](std::span<const Tensor64> xs) {
    Weights<double> w = weights_from(xs);
    const auto tape = run_tape(xs, w);
    const auto& out = tape.value(graph.output());
    double acc = 0.0;
    for (std::size_t i = 0; i < out.size(); ++i) acc += out[i] * projection[i];
    return acc;
  };
  f.gradient = [&](std::span<const Tensor64> xs) {
    Weights<double> w = weights_from(xs);
    const auto tape = run_tape(xs, w);
    w.zero_grad();
    auto grads = backward(graph, w, tape, projection);
    if (options.include_params) {
      for (auto& p : w.params) grads.emplace_back(p.shape(), std::vector<double>(p.grad().begin(), p.grad().end()));
    }
    return grads;
  };
  f.region = [&](std::span<const Tensor64> xs) {
    Weights<double> w = weights_from(xs);
    return run_tape(xs, w).region_signature(graph);
  };
  return grad_check(f, probe, options.check);
}

}  // namespace waspseg
