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

#include <span>

#include "waspseg/gradcheck.hpp"
#include "waspseg/graph.hpp"

namespace waspseg {

struct GraphCheckOptions {
  GradCheckOptions check;
  Mode mode = Mode::Eval;
  std::uint64_t projection_seed = 1;
  bool include_params = true;
};

// End-to-end finite-difference check of forward/backward on a graph, run in
// a double-precision shadow of the given weights. The scalar objective is
// <output, R> for a fixed random R, so every output element contributes.
// Checked tensors are the graph inputs followed, optionally, by every
// parameter.
GradCheckReport grad_check_graph(const ModuleGraph& graph, const Weights<float>& weights,
                                 std::span<const Tensor> inputs, const GraphCheckOptions& options = {});

}  // namespace waspseg
