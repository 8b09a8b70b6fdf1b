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

#include "waspseg/dataset.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>

#include "waspseg/error.hpp"
#include "waspseg/netpbm.hpp"
#include "waspseg/ops.hpp"

namespace waspseg {

namespace fs = std::filesystem;

Dataset load_dataset(const fs::path& dir) {
  const fs::path images = dir / "images";
  const fs::path labels = dir / "labels";
  if (!fs::is_directory(images)) throw DataError(images.string() + ": not a directory");
  if (!fs::is_directory(labels)) throw DataError(labels.string() + ": not a directory");
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(images)) {
    if (e.is_regular_file() && e.path().extension() == ".ppm") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw DataError(images.string() + ": no .ppm files");
  Dataset out;
  out.reserve(files.size());
  for (const auto& f : files) {
    Sample s;
    s.name = f.stem().string();
    s.image = read_ppm(f);
    const fs::path lp = labels / (s.name + ".pgm");
    if (!fs::exists(lp)) throw DataError(lp.string() + ": missing label map for " + f.string());
    s.labels = read_labels(lp);
    if (s.labels.width != s.image.width || s.labels.height != s.image.height) {
      throw DataError(lp.string() + ": label map is " + std::to_string(s.labels.width) + "x" +
                      std::to_string(s.labels.height) + " but image is " + std::to_string(s.image.width) + "x" +
                      std::to_string(s.image.height));
    }
    out.push_back(std::move(s));
  }
  return out;
}

void save_dataset(const fs::path& dir, const Dataset& samples) {
  fs::create_directories(dir / "images");
  fs::create_directories(dir / "labels");
  for (const auto& s : samples) {
    write_netpbm(dir / "images" / (s.name + ".ppm"), s.image);
    write_labels(dir / "labels" / (s.name + ".pgm"), s.labels);
  }
}

void AugmentConfig::validate() const {
  if (!(scale_min > 0.0) || !(scale_min <= scale_max)) {
    throw ConfigError("augment: need 0 < scale_min <= scale_max, got " + std::to_string(scale_min) + ", " +
                      std::to_string(scale_max));
  }
}

void rescale(Image& image, LabelMap& labels, double scale) {
  const int h = static_cast<int>(std::lround(image.height * scale));
  const int w = static_cast<int>(std::lround(image.width * scale));
  if (h < 1 || w < 1) {
    throw ShapeError("rescale: scale " + std::to_string(scale) + " gives a zero-size " + std::to_string(w) + "x" +
                     std::to_string(h) + " output");
  }
  if (h == image.height && w == image.width) return;

  Tensor t(Shape{1, image.channels, image.height, image.width});
  for (int c = 0; c < image.channels; ++c) {
    auto plane = t.plane(0, c);
    for (std::size_t q = 0; q < plane.size(); ++q) plane[q] = image.pixels[q * image.channels + c];
  }
  const Tensor r = bilinear_resize(t, h, w);
  Image out(w, h, image.channels);
  for (int c = 0; c < image.channels; ++c) {
    const auto plane = r.plane(0, c);
    for (std::size_t q = 0; q < plane.size(); ++q) {
      out.pixels[q * image.channels + c] = static_cast<std::uint8_t>(std::clamp(std::lround(plane[q]), 0L, 255L));
    }
  }

  LabelMap lab(w, h);
  for (int y = 0; y < h; ++y) {
    const int sy = std::min(static_cast<int>((y + 0.5) * labels.height / h), labels.height - 1);
    for (int x = 0; x < w; ++x) {
      const int sx = std::min(static_cast<int>((x + 0.5) * labels.width / w), labels.width - 1);
      lab.at(y, x) = labels.at(sy, sx);
    }
  }
  image = std::move(out);
  labels = std::move(lab);
}

double random_scale(Image& image, LabelMap& labels, const AugmentConfig& config, Rng& rng) {
  config.validate();
  const double s = rng.uniform(config.scale_min, config.scale_max);
  rescale(image, labels, s);
  return s;
}

void random_crop(Image& image, LabelMap& labels, int size, Rng& rng) {
  if (size < 1) throw ConfigError("random_crop: size must be >= 1");
  // Offsets are in input coordinates; negative offsets pad.
  auto offset = [&](int extent) {
    return extent >= size ? rng.uniform_int(0, extent - size) : -rng.uniform_int(0, size - extent);
  };
  const int oy = offset(image.height);
  const int ox = offset(image.width);
  Image out(size, size, image.channels, 0);
  LabelMap lab(size, size, kIgnoreLabel);
  for (int y = 0; y < size; ++y) {
    const int sy = y + oy;
    if (sy < 0 || sy >= image.height) continue;
    for (int x = 0; x < size; ++x) {
      const int sx = x + ox;
      if (sx < 0 || sx >= image.width) continue;
      for (int c = 0; c < image.channels; ++c) out.at(y, x, c) = image.at(sy, sx, c);
      lab.at(y, x) = labels.at(sy, sx);
    }
  }
  image = std::move(out);
  labels = std::move(lab);
}

void SyntheticConfig::validate() const {
  if (n_images < 1) throw ConfigError("synthetic: n_images must be >= 1");
  if (size < 32) throw ConfigError("synthetic: size must be >= 32, got " + std::to_string(size));
  if (num_classes < 2 || num_classes > 32) throw ConfigError("synthetic: num_classes must lie in [2, 32]");
}

namespace {

using Rgb = std::array<int, 3>;

Rgb class_color(int c) {
  static constexpr Rgb palette[] = {{210, 40, 40},  {40, 190, 60},  {50, 80, 220},  {225, 205, 40},
                                    {200, 60, 200}, {40, 200, 210}, {240, 140, 30}, {150, 90, 220}};
  if (c >= 1 && c <= 8) return palette[c - 1];
  Rng rng(derive_seed(0x5eedull, static_cast<std::uint64_t>(c)));
  return {rng.uniform_int(20, 235), rng.uniform_int(20, 235), rng.uniform_int(20, 235)};
}

std::uint8_t clamp_u8(int v) { return static_cast<std::uint8_t>(std::clamp(v, 0, 255)); }

}  // namespace

Sample make_synthetic_sample(const SyntheticConfig& config, int index) {
  config.validate();
  const int S = config.size;
  Rng rng(derive_seed(config.seed, static_cast<std::uint64_t>(index)));
  Sample s;
  char name[32];
  std::snprintf(name, sizeof name, "%05d", index);
  s.name = name;
  s.image = Image(S, S, 3);
  s.labels = LabelMap(S, S, 0);

  // Background: grey-brown base, a low-frequency stripe pattern and noise.
  const Rgb base{rng.uniform_int(90, 140), rng.uniform_int(80, 125), rng.uniform_int(70, 110)};
  const double freq = rng.uniform(0.15, 0.5);
  const double angle = rng.uniform(0.0, 3.14159265358979);
  const double ca = std::cos(angle);
  const double sa = std::sin(angle);
  for (int y = 0; y < S; ++y) {
    for (int x = 0; x < S; ++x) {
      const int stripe = static_cast<int>(18.0 * std::sin(freq * (ca * x + sa * y)));
      for (int c = 0; c < 3; ++c) s.image.at(y, x, c) = clamp_u8(base[c] + stripe + rng.uniform_int(-20, 20));
    }
  }

  const int objects = rng.uniform_int(1, 3);
  for (int o = 0; o < objects; ++o) {
    const int cls = rng.uniform_int(1, config.num_classes - 1);
    const Rgb col = class_color(cls);
    const Rgb tint{rng.uniform_int(-20, 20), rng.uniform_int(-20, 20), rng.uniform_int(-20, 20)};
    const int shape = (cls - 1) % 3;
    auto paint = [&](int y, int x) {
      s.labels.at(y, x) = static_cast<std::uint8_t>(cls);
      for (int c = 0; c < 3; ++c) s.image.at(y, x, c) = clamp_u8(col[c] + tint[c] + rng.uniform_int(-12, 12));
    };
    if (shape == 0) {
      const int h = rng.uniform_int(S / 5, S / 2);
      const int w = rng.uniform_int(S / 5, S / 2);
      const int y0 = rng.uniform_int(0, S - h);
      const int x0 = rng.uniform_int(0, S - w);
      for (int y = y0; y < y0 + h; ++y)
        for (int x = x0; x < x0 + w; ++x) paint(y, x);
    } else if (shape == 1) {
      const double ry = rng.uniform(S / 10.0, S / 4.0);
      const double rx = rng.uniform(S / 10.0, S / 4.0);
      const double cy = rng.uniform(ry, S - ry);
      const double cx = rng.uniform(rx, S - rx);
      for (int y = 0; y < S; ++y) {
        for (int x = 0; x < S; ++x) {
          const double u = (y + 0.5 - cy) / ry;
          const double v = (x + 0.5 - cx) / rx;
          if (u * u + v * v <= 1.0) paint(y, x);
        }
      }
    } else {
      const int thick = rng.uniform_int(std::max(4, S / 16), std::max(4, S / 10));
      const int len = rng.uniform_int(S / 2, S * 9 / 10);
      const bool vertical = rng.bernoulli(0.5);
      const int a0 = rng.uniform_int(0, S - len);
      const int b0 = rng.uniform_int(0, S - thick);
      for (int a = a0; a < a0 + len; ++a)
        for (int b = b0; b < b0 + thick; ++b) vertical ? paint(a, b) : paint(b, a);
    }
  }
  return s;
}

Dataset make_synthetic_dataset(const SyntheticConfig& config) {
  config.validate();
  Dataset d;
  d.reserve(static_cast<std::size_t>(config.n_images));
  for (int i = 0; i < config.n_images; ++i) d.push_back(make_synthetic_sample(config, i));
  return d;
}

}  // namespace waspseg
