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
#include <vector>

#include "waspseg/image.hpp"
#include "waspseg/rng.hpp"

namespace waspseg {

struct Sample {
  std::string name;
  Image image;
  LabelMap labels;
};

using Dataset = std::vector<Sample>;

// Directory layout: <dir>/images/<name>.ppm (P6) and <dir>/labels/<name>.pgm
// (P5, value = class id, 255 = ignore). Samples are ordered by name.
Dataset load_dataset(const std::filesystem::path& dir);
void save_dataset(const std::filesystem::path& dir, const Dataset& samples);

struct AugmentConfig {
  double scale_min = 0.5;
  double scale_max = 1.5;

  void validate() const;
};

// Rescales both by `scale`: the image bilinearly, the labels by nearest
// neighbour. Throws ShapeError if either extent would round to zero.
void rescale(Image& image, LabelMap& labels, double scale);

// Draws scale uniformly from [scale_min, scale_max] and rescales.
double random_scale(Image& image, LabelMap& labels, const AugmentConfig& config, Rng& rng);

// Cuts a size x size window at a random offset, padding with black pixels
// and ignore labels where the input is smaller.
void random_crop(Image& image, LabelMap& labels, int size, Rng& rng);

struct SyntheticConfig {
  int n_images = 200;
  int size = 64;
  int num_classes = 4;
  std::uint64_t seed = 1;

  void validate() const;
};

// Class 0 is a textured background. Foreground class c is drawn as shape
// (c - 1) mod 3: rectangle, ellipse or thin bar, in a class colour with
// per-object jitter. Each image holds 1 to 3 objects; sample i depends only
// on (seed, i).
//
// With the defaults (64x64, 4 classes) background covers 75-90% of the
// pixels of any 100-image set, each foreground class 2-12%, and every
// foreground class appears in at least 30 of the 100 images.
Sample make_synthetic_sample(const SyntheticConfig& config, int index);
Dataset make_synthetic_dataset(const SyntheticConfig& config);

}  // namespace waspseg
