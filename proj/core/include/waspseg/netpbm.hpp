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

#include <filesystem>
#include <istream>
#include <ostream>
#include <string_view>

#include "waspseg/image.hpp"

namespace waspseg {

// Binary netpbm: P5 (grey, 1 channel) and P6 (RGB, 3 channels), maxval 255.
// Headers may contain '#' comments; errors carry the byte offset at which
// parsing failed. Files are written in the canonical form
// "P6\n<w> <h>\n255\n" + raster, so reading and re-writing a canonical file
// reproduces it byte for byte.
Image read_netpbm(std::istream& in, std::string_view source = "<stream>");
Image read_netpbm(const std::filesystem::path& path);
void write_netpbm(std::ostream& out, const Image& image);
void write_netpbm(const std::filesystem::path& path, const Image& image);

// An RGB image; grey files are rejected.
Image read_ppm(const std::filesystem::path& path);
// A P5 file interpreted as class ids.
LabelMap read_labels(const std::filesystem::path& path);
void write_labels(const std::filesystem::path& path, const LabelMap& labels);

}  // namespace waspseg
