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

#include "waspseg/netpbm.hpp"

#include <cctype>
#include <fstream>
#include <string>

#include "waspseg/error.hpp"

namespace waspseg {
namespace {

class HeaderReader {
 public:
  HeaderReader(std::istream& in, std::string_view source) : in_(in), source_(source) {}

  [[noreturn]] void fail(const std::string& what) const {
    throw DataError(source_ + ": byte " + std::to_string(offset_) + ": " + what);
  }

  int get() {
    const int c = in_.get();
    if (c != std::char_traits<char>::eof()) ++offset_;
    return c;
  }

  void skip_space_and_comments() {
    for (;;) {
      const int c = in_.peek();
      if (c == '#') {
        int d;
        while ((d = get()) != '\n' && d != std::char_traits<char>::eof()) {
        }
      } else if (c != std::char_traits<char>::eof() && std::isspace(c)) {
        get();
      } else {
        return;
      }
    }
  }

  int number(const char* what) {
    skip_space_and_comments();
    if (!std::isdigit(in_.peek())) fail(std::string("expected ") + what);
    long v = 0;
    while (std::isdigit(in_.peek())) {
      v = v * 10 + (get() - '0');
      if (v > 1'000'000) fail(std::string(what) + " is too large");
    }
    return static_cast<int>(v);
  }

  std::size_t offset() const noexcept { return offset_; }

 private:
  std::istream& in_;
  std::string source_;
  std::size_t offset_ = 0;
};

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(path.string() + ": cannot open for reading");
  return in;
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError(path.string() + ": cannot open for writing");
  return out;
}

}  // namespace

Image read_netpbm(std::istream& in, std::string_view source) {
  HeaderReader r(in, source);
  const int p = r.get();
  const int kind = r.get();
  if (p != 'P' || (kind != '5' && kind != '6')) r.fail("not a binary PGM/PPM file (expected P5 or P6)");
  const int width = r.number("width");
  const int height = r.number("height");
  const int maxval = r.number("maxval");
  if (width < 1 || height < 1) r.fail("image extent must be positive");
  if (maxval != 255) r.fail("unsupported maxval " + std::to_string(maxval) + " (only 255)");
  const int sep = r.get();
  if (sep == std::char_traits<char>::eof() || !std::isspace(sep)) r.fail("expected whitespace after maxval");

  Image image(width, height, kind == '6' ? 3 : 1);
  in.read(reinterpret_cast<char*>(image.pixels.data()), static_cast<std::streamsize>(image.pixels.size()));
  const auto got = static_cast<std::size_t>(in.gcount());
  if (got != image.pixels.size()) {
    throw DataError(std::string(source) + ": byte " + std::to_string(r.offset() + got) + ": raster truncated, " +
                    std::to_string(got) + " of " + std::to_string(image.pixels.size()) + " bytes present");
  }
  return image;
}

Image read_netpbm(const std::filesystem::path& path) {
  auto in = open_in(path);
  return read_netpbm(in, path.string());
}

void write_netpbm(std::ostream& out, const Image& image) {
  if (image.channels != 1 && image.channels != 3) throw ShapeError("write_netpbm: channels must be 1 or 3");
  out << (image.channels == 3 ? "P6" : "P5") << '\n' << image.width << ' ' << image.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(image.pixels.data()), static_cast<std::streamsize>(image.pixels.size()));
  if (!out) throw DataError("write_netpbm: write failed");
}

void write_netpbm(const std::filesystem::path& path, const Image& image) {
  auto out = open_out(path);
  write_netpbm(out, image);
}

Image read_ppm(const std::filesystem::path& path) {
  Image im = read_netpbm(path);
  if (im.channels != 3) throw DataError(path.string() + ": byte 1: expected an RGB (P6) image");
  return im;
}

LabelMap read_labels(const std::filesystem::path& path) {
  Image im = read_netpbm(path);
  if (im.channels != 1) throw DataError(path.string() + ": byte 1: expected a greyscale (P5) label map");
  LabelMap labels;
  labels.width = im.width;
  labels.height = im.height;
  labels.labels = std::move(im.pixels);
  return labels;
}

void write_labels(const std::filesystem::path& path, const LabelMap& labels) {
  Image im;
  im.width = labels.width;
  im.height = labels.height;
  im.channels = 1;
  im.pixels = labels.labels;
  write_netpbm(path, im);
}

}  // namespace waspseg
