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
#include <vector>

#include "waspseg/graph.hpp"

namespace waspseg {

// Receptive field of one node in input pixels, the input-pixel distance
// between adjacent outputs (jump), and whether any global operation
// (average pooling, squeeze-and-excitation) feeds it. `receptive_field`
// excludes global contributions so that finite fields stay comparable.
struct RFState {
  std::int64_t receptive_field = 1;
  std::int64_t jump = 1;
  bool global = false;
};

// Per-node fields via rf_out = rf_in + (k_eff - 1) * jump with
// k_eff = k + (k - 1)(r - 1); fusion nodes take the max over inputs.
// Throws ConfigError for layers whose field is not a simple window
// (bilinear upsampling of a non-global map).
std::vector<RFState> receptive_fields(const ModuleGraph& graph);

RFState receptive_field(const ModuleGraph& graph);

}  // namespace waspseg
