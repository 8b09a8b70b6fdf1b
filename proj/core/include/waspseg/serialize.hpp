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
#include <filesystem>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "waspseg/graph.hpp"
#include "waspseg/tensor.hpp"

namespace waspseg {

// Graph topology as JSON text: layers in id order with kind, name, inputs and
// attributes, plus graph inputs, output and metadata. graph_from_json rebuilds
// the graph through ModuleGraph::add, so all construction checks re-run.
std::string graph_to_json(const ModuleGraph& graph);
ModuleGraph graph_from_json(std::string_view text);

// Binary tensor container, little-endian throughout:
//
//   "WSPC"  u32 version (1)
//   u64 metadata length, metadata bytes (UTF-8 text)
//   u32 tensor count, then per tensor:
//     u32 name length, name bytes, i32 n c h w, n*c*h*w float32 values
//
// Round trips are bit-identical.
struct Container {
  std::string metadata;
  std::vector<std::pair<std::string, Tensor>> tensors;

  const Tensor& get(std::string_view name) const;
};

inline constexpr std::uint32_t kContainerVersion = 1;

void write_container(std::ostream& out, const Container& container);
Container read_container(std::istream& in, const std::string& source = "<stream>");
void save_container(const std::filesystem::path& path, const Container& container);
Container load_container(const std::filesystem::path& path);

// Weights plus the topology that owns them. Tensors are stored under their
// parameter and buffer names; metadata is graph_to_json(graph).
Container weights_container(const ModuleGraph& graph, const Weights<float>& weights);
std::pair<ModuleGraph, Weights<float>> weights_from_container(const Container& container);

}  // namespace waspseg
