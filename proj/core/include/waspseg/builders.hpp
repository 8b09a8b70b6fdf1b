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

#include <string>
#include <string_view>
#include <vector>

#include "waspseg/graph.hpp"

namespace waspseg {

enum class HeadKind { Aspp, Cascade, Res2NetSeg, Wasp };
enum class Fusion { Sum, Concat };

std::string_view to_string(HeadKind kind) noexcept;
std::string_view to_string(Fusion fusion) noexcept;
HeadKind parse_head_kind(std::string_view text);
Fusion parse_fusion(std::string_view text);

// Parallel branches, one per rate: 3x3 atrous (rate r) -> ReLU -> 1x1 -> ReLU
// -> 1x1 to out_channels. Branch outputs are summed, or concatenated and
// projected by a 1x1 conv.
struct AsppOptions {
  int in_channels = 2048;
  int branch_channels = 240;
  int out_channels = 256;
  std::vector<int> rates = {6, 12, 18, 24};
  Fusion fusion = Fusion::Sum;
};

// 3x3 atrous stages in sequence (strictly increasing rates), ReLU after each,
// then a 1x1 projection.
struct CascadeOptions {
  int in_channels = 2048;
  int width = 256;
  int out_channels = 256;
  std::vector<int> rates = {6, 12, 18, 24};
};

// Input split into `scales` equal channel groups. Group 1 passes through;
// group s >= 2 is convolved (3x3, rates[s-2]) after adding group s-1's
// output. A global-average-pool branch is broadcast back, everything is
// concatenated, gated by squeeze-and-excitation and projected by a 1x1 conv.
struct Res2NetSegOptions {
  int in_channels = 2048;
  int scales = 4;
  std::vector<int> rates = {2, 4, 6};
  int gap_channels = 256;
  int se_reduction = 16;
  int out_channels = 256;
};

// Waterfall: branch 1's 3x3 atrous conv reads the input, branch i's reads
// branch i-1's atrous output. Each atrous output feeds a tap (1x1 -> ReLU ->
// 1x1 to out_channels -> ReLU). Taps and the optional global-average-pool
// branch are concatenated and fused by a 1x1 conv.
struct WaspOptions {
  int in_channels = 2048;
  int width = 176;
  int out_channels = 256;
  std::vector<int> rates = {6, 12, 18, 24};
  bool gap_branch = true;
};

ModuleGraph build_aspp(const AsppOptions& options);
ModuleGraph build_cascade(const CascadeOptions& options);
ModuleGraph build_res2net_seg(const Res2NetSegOptions& options);
ModuleGraph build_wasp(const WaspOptions& options);

// Everything needed to build any of the four heads; fields that do not apply
// to a kind are ignored. width == 0 selects the kind's default width.
struct HeadConfig {
  HeadKind kind = HeadKind::Wasp;
  int in_channels = 2048;
  int out_channels = 256;
  int width = 0;
  std::vector<int> rates = {6, 12, 18, 24};
  Fusion fusion = Fusion::Sum;
  bool gap_branch = true;
  int scales = 4;
  std::vector<int> res2net_rates = {2, 4, 6};
  int gap_channels = 256;
  int se_reduction = 16;
};

int default_head_width(HeadKind kind) noexcept;
ModuleGraph build_head(const HeadConfig& config);

// Two inputs, "score" (stride 8) and "lowlevel" (stride 4). Score maps are
// upsampled x2 and concatenated with the low-level features, then
// 3x3 conv -> ReLU -> dropout -> 3x3 conv -> ReLU -> dropout -> 1x1 to
// classes, and a final x4 bilinear upsample.
struct DecoderOptions {
  int score_channels = 256;
  int lowlevel_channels = 256;
  int width = 256;
  int num_classes = 21;
  double dropout = 0.5;
};

ModuleGraph build_decoder(const DecoderOptions& options);

// "resnet101-counting" or "toy-resnet(depth, width)".
struct BackboneDescriptor {
  enum class Family { ResNet101Counting, ToyResNet };
  Family family = Family::ToyResNet;
  int depth = 2;
  int width = 16;

  static BackboneDescriptor parse(std::string_view text);
  std::string str() const;
};

// Output stride 8; the layer named "lowlevel" is the stride-4 tap.
struct Backbone {
  ModuleGraph graph;
  int out_channels = 0;
  int lowlevel_channels = 0;
};

Backbone build_backbone(const BackboneDescriptor& descriptor);

struct NetworkConfig {
  BackboneDescriptor backbone;
  HeadConfig head;
  DecoderOptions decoder;  // score/lowlevel channels are filled in
};

// image (3 channels) -> backbone -> head -> decoder -> per-class logits at
// input resolution. Layer names are prefixed "backbone.", "head." and
// "decoder.".
ModuleGraph build_network(const NetworkConfig& config);

}  // namespace waspseg
