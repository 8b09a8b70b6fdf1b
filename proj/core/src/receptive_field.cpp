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

#include "waspseg/receptive_field.hpp"

#include <algorithm>
#include <string>

#include "waspseg/conv.hpp"
#include "waspseg/error.hpp"

namespace waspseg {

std::vector<RFState> receptive_fields(const ModuleGraph& graph) {
  std::vector<RFState> rf(graph.size());
  auto unsupported = [](const LayerSpec& l, const std::string& why) {
    throw ConfigError("receptive field: layer '" + l.name + "' (" + std::string(to_string(l.kind)) + ") " + why);
  };
  for (std::size_t id = 0; id < graph.size(); ++id) {
    const LayerSpec& l = graph.layers()[id];
    if (l.kind == LayerKind::Input) continue;
    RFState s = rf[static_cast<std::size_t>(l.inputs[0])];
    switch (l.kind) {
      case LayerKind::Conv:
      case LayerKind::AtrousConv: {
        const auto& a = std::get<ConvAttrs>(l.attrs);
        s.receptive_field += static_cast<std::int64_t>(effective_kernel(a.kernel, a.rate) - 1) * s.jump;
        s.jump *= a.stride;
        break;
      }
      case LayerKind::MaxPool: {
        const auto& a = std::get<PoolAttrs>(l.attrs);
        s.receptive_field += static_cast<std::int64_t>(a.kernel - 1) * s.jump;
        s.jump *= a.stride;
        break;
      }
      case LayerKind::GlobalAvgPool:
      case LayerKind::SeGate:
        s.global = true;
        break;
      case LayerKind::Bilinear: {
        const auto& a = std::get<BilinearAttrs>(l.attrs);
        if (!s.global || a.scale > 0) unsupported(l, "resamples a spatially varying map");
        // A broadcast global value: positions follow the reference input.
        const RFState& ref = rf[static_cast<std::size_t>(l.inputs[1])];
        s.receptive_field = ref.receptive_field;
        s.jump = ref.jump;
        s.global = true;
        break;
      }
      case LayerKind::Concat:
      case LayerKind::Sum: {
        for (std::size_t i = 1; i < l.inputs.size(); ++i) {
          const RFState& o = rf[static_cast<std::size_t>(l.inputs[i])];
          if (o.jump != s.jump) unsupported(l, "fuses inputs with different strides");
          s.receptive_field = std::max(s.receptive_field, o.receptive_field);
          s.global = s.global || o.global;
        }
        break;
      }
      default:
        break;
    }
    rf[id] = s;
  }
  return rf;
}

RFState receptive_field(const ModuleGraph& graph) {
  return receptive_fields(graph)[static_cast<std::size_t>(graph.output())];
}

}  // namespace waspseg
