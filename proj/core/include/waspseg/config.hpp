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
#include <string>
#include <string_view>
#include <vector>

#include "waspseg/builders.hpp"
#include "waspseg/crf.hpp"
#include "waspseg/dataset.hpp"
#include "waspseg/trainer.hpp"

namespace waspseg {

// Everything a command needs, read from a line-oriented file:
//
//   # comment
//   key = value
//
// Lists are comma separated; sweep.rates separates rate sets with ';'.
// Unknown keys, repeated keys and malformed values are ConfigErrors that
// carry the line number. Keys not present keep their defaults, which are
// the toy-scale settings.
struct RunConfig {
  std::uint64_t seed = 1;
  int num_classes = 4;

  BackboneDescriptor backbone;
  HeadConfig head;
  DecoderOptions decoder;

  // Dataset directories; empty means the synthetic generator.
  std::string train_dir;
  std::string val_dir;
  int synthetic_images = 200;
  int synthetic_val_images = 40;
  int synthetic_size = 64;

  TrainConfig train;
  CrfParams crf;
  int crf_images = 4;  // validation images used by the crf command

  std::vector<HeadKind> compare_heads = {HeadKind::Aspp, HeadKind::Cascade, HeadKind::Res2NetSeg, HeadKind::Wasp};
  std::vector<std::vector<int>> sweep_rates = {{2, 4, 6, 8}, {4, 8, 12, 16}, {6, 12, 18, 24}, {8, 16, 24, 32}};

  std::string output_dir = "out";
  std::string weights;

  RunConfig();

  // Sets one key from its textual value; `where` prefixes error messages.
  void set(std::string_view key, std::string_view value, const std::string& where = "--set");

  // Checks every field and that the network builds. Throws ConfigError.
  void validate() const;

  // Sub-configurations with num_classes and seed filled in.
  NetworkConfig network() const;
  NetworkConfig network(HeadKind kind) const;
  TrainConfig train_config() const;
  SyntheticConfig synthetic_train() const;
  SyntheticConfig synthetic_val() const;

  static const std::vector<std::string>& keys();
};

RunConfig parse_config(std::string_view text, const std::string& source = "<config>");
RunConfig load_config(const std::filesystem::path& path);
// One line per key in keys() order. parse_config(serialize_config(c))
// serializes to the same text.
std::string serialize_config(const RunConfig& config);

}  // namespace waspseg
