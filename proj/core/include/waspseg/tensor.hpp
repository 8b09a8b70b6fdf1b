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

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace waspseg {

// Extents of a rank-4 (batch, channel, height, width) tensor.
struct Shape {
  int n = 0;
  int c = 0;
  int h = 0;
  int w = 0;

  std::size_t numel() const noexcept {
    return static_cast<std::size_t>(n) * static_cast<std::size_t>(c) *
           static_cast<std::size_t>(h) * static_cast<std::size_t>(w);
  }
  std::size_t plane() const noexcept {
    return static_cast<std::size_t>(h) * static_cast<std::size_t>(w);
  }
  bool valid() const noexcept { return n >= 0 && c >= 0 && h >= 0 && w >= 0; }
  bool empty() const noexcept { return numel() == 0; }
  std::string str() const;

  friend bool operator==(const Shape&, const Shape&) = default;
};

// Dense NCHW tensor, row-major with w fastest. An optional gradient buffer of
// identical shape can be attached; parameters carry one, activations do not.
template <class T>
class BasicTensor {
 public:
  using value_type = T;

  BasicTensor() = default;
  explicit BasicTensor(Shape shape, T fill = T{});
  BasicTensor(Shape shape, std::vector<T> data);

  static BasicTensor zeros(Shape shape) { return BasicTensor(shape); }
  static BasicTensor full(Shape shape, T value) { return BasicTensor(shape, value); }

  const Shape& shape() const noexcept { return shape_; }
  int n() const noexcept { return shape_.n; }
  int c() const noexcept { return shape_.c; }
  int h() const noexcept { return shape_.h; }
  int w() const noexcept { return shape_.w; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  std::span<T> data() noexcept { return data_; }
  std::span<const T> data() const noexcept { return data_; }
  const std::vector<T>& vector() const noexcept { return data_; }

  std::size_t index(int n, int c, int h, int w) const noexcept {
    return ((static_cast<std::size_t>(n) * shape_.c + c) * shape_.h + h) * shape_.w + w;
  }
  T& at(int n, int c, int h, int w) noexcept { return data_[index(n, c, h, w)]; }
  const T& at(int n, int c, int h, int w) const noexcept { return data_[index(n, c, h, w)]; }
  T& operator[](std::size_t i) noexcept { return data_[i]; }
  const T& operator[](std::size_t i) const noexcept { return data_[i]; }

  // One (h, w) plane of sample n, channel c.
  std::span<T> plane(int n, int c) noexcept {
    return std::span<T>(data_).subspan(index(n, c, 0, 0), shape_.plane());
  }
  std::span<const T> plane(int n, int c) const noexcept {
    return std::span<const T>(data_).subspan(index(n, c, 0, 0), shape_.plane());
  }

  bool has_grad() const noexcept { return grad_.has_value(); }
  // Allocates a zeroed gradient buffer if none is attached.
  std::span<T> grad();
  std::span<const T> grad() const;
  void zero_grad();
  void drop_grad() noexcept { grad_.reset(); }

  bool all_finite() const noexcept;
  void fill(T value);
  BasicTensor reshaped(Shape shape) const;

  template <class U>
  BasicTensor<U> cast() const {
    std::vector<U> out(data_.size());
    for (std::size_t i = 0; i < data_.size(); ++i) out[i] = static_cast<U>(data_[i]);
    return BasicTensor<U>(shape_, std::move(out));
  }

 private:
  Shape shape_{};
  std::vector<T> data_;
  std::optional<std::vector<T>> grad_;
};

using Tensor = BasicTensor<float>;
using Tensor64 = BasicTensor<double>;

// Throws NumericalError naming `where` if any element is NaN or Inf.
template <class T>
void require_finite(const BasicTensor<T>& t, std::string_view where);

template <class T>
double max_abs_diff(const BasicTensor<T>& a, const BasicTensor<T>& b);

// Checks a == b on shapes, throwing ShapeError with `where` otherwise.
void require_same_shape(const Shape& a, const Shape& b, std::string_view where);

extern template class BasicTensor<float>;
extern template class BasicTensor<double>;

}  // namespace waspseg
