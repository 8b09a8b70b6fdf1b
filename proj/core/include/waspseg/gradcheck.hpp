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
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "waspseg/tensor.hpp"

namespace waspseg {

// A scalar function of several tensors together with its analytic gradient.
// `region` is optional: it returns a fingerprint of the function's piecewise
// regime (ReLU sign patterns, max-pool winners). Coordinates whose central
// difference stencil crosses a regime boundary are skipped, since the
// function is not differentiable across it.
struct ScalarFunction {
  std::function<double(std::span<const Tensor64>)> value;
  std::function<std::vector<Tensor64>(std::span<const Tensor64>)> gradient;
  std::function<std::uint64_t(std::span<const Tensor64>)> region;
};

struct GradCheckOptions {
  double epsilon = 1e-3;
  double tolerance = 1e-4;
  // Coordinates checked per input tensor; 0 checks all of them.
  std::size_t max_coordinates = 0;
  // Gradients below this magnitude are compared on absolute scale; keeps
  // round-off in the difference quotient of a flat direction from counting
  // as a relative error of 1.
  double absolute_floor = 1e-6;
  std::uint64_t seed = 0;
};

struct GradCheckReport {
  double max_relative_error = 0.0;
  std::size_t checked = 0;
  std::size_t skipped = 0;
  std::string worst;  // "input <i> [<flat index>]" of the worst coordinate
  bool passed = false;
};

// Compares analytic gradients against central differences
// (f(x + e) - f(x - e)) / 2e, all in double precision. The per-coordinate
// error is |a - n| / max(|a|, |n|, floor) where floor is the larger of
// options.absolute_floor and 1e-3 times the largest numeric gradient
// magnitude of that input, so coordinates whose gradient vanishes are judged
// on absolute scale.
GradCheckReport grad_check(const ScalarFunction& f, std::span<const Tensor64> inputs,
                           const GradCheckOptions& options = {});

}  // namespace waspseg
