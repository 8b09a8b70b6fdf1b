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

#include "waspseg/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "waspseg/error.hpp"

namespace waspseg {

std::string Shape::str() const {
  std::ostringstream os;
  os << '(' << n << ", " << c << ", " << h << ", " << w << ')';
  return os.str();
}

template <class T>
BasicTensor<T>::BasicTensor(Shape shape, T fill) : shape_(shape) {
  if (!shape.valid()) throw ShapeError("tensor: negative extent in shape " + shape.str());
  data_.assign(shape.numel(), fill);
}

template <class T>
BasicTensor<T>::BasicTensor(Shape shape, std::vector<T> data)
    : shape_(shape), data_(std::move(data)) {
  if (!shape.valid()) throw ShapeError("tensor: negative extent in shape " + shape.str());
  if (data_.size() != shape.numel()) {
    throw ShapeError("tensor: " + std::to_string(data_.size()) + " values for shape " +
                     shape.str());
  }
}

template <class T>
std::span<T> BasicTensor<T>::grad() {
  if (!grad_) grad_.emplace(data_.size(), T{});
  return *grad_;
}

template <class T>
std::span<const T> BasicTensor<T>::grad() const {
  if (!grad_) return {};
  return *grad_;
}

template <class T>
void BasicTensor<T>::zero_grad() {
  if (grad_) {
    std::fill(grad_->begin(), grad_->end(), T{});
  } else {
    grad_.emplace(data_.size(), T{});
  }
}

template <class T>
bool BasicTensor<T>::all_finite() const noexcept {
  return std::all_of(data_.begin(), data_.end(), [](T v) { return std::isfinite(v); });
}

template <class T>
void BasicTensor<T>::fill(T value) {
  std::fill(data_.begin(), data_.end(), value);
}

template <class T>
BasicTensor<T> BasicTensor<T>::reshaped(Shape shape) const {
  if (shape.numel() != data_.size()) {
    throw ShapeError("reshape: " + shape_.str() + " -> " + shape.str());
  }
  return BasicTensor(shape, data_);
}

template <class T>
void require_finite(const BasicTensor<T>& t, std::string_view where) {
  const auto d = t.data();
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (!std::isfinite(d[i])) {
      throw NumericalError(std::string(where) + ": non-finite value at flat index " +
                           std::to_string(i));
    }
  }
}

template <class T>
double max_abs_diff(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  require_same_shape(a.shape(), b.shape(), "max_abs_diff");
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    worst = std::max(worst, std::abs(static_cast<double>(a[i]) - static_cast<double>(b[i])));
  }
  return worst;
}

void require_same_shape(const Shape& a, const Shape& b, std::string_view where) {
  if (!(a == b)) {
    throw ShapeError(std::string(where) + ": shape mismatch " + a.str() + " vs " + b.str());
  }
}

template class BasicTensor<float>;
template class BasicTensor<double>;
template void require_finite(const BasicTensor<float>&, std::string_view);
template void require_finite(const BasicTensor<double>&, std::string_view);
template double max_abs_diff(const BasicTensor<float>&, const BasicTensor<float>&);
template double max_abs_diff(const BasicTensor<double>&, const BasicTensor<double>&);

}  // namespace waspseg
