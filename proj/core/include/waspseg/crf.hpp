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
#include <functional>
#include <vector>

#include "waspseg/image.hpp"
#include "waspseg/metrics.hpp"
#include "waspseg/tensor.hpp"

namespace waspseg {

// Fully connected CRF with Potts compatibility and the pairwise kernel
//
//   k(i, j) = w1 exp(-|p_i - p_j|^2 / 2 sa^2 - |I_i - I_j|^2 / 2 sb^2)
//           + w2 exp(-|p_i - p_j|^2 / 2 sg^2)
//
// p in pixels, I raw RGB in [0, 255].
struct CrfParams {
  double w1 = 4.0;
  double w2 = 3.0;
  double sigma_alpha = 60.0;
  double sigma_beta = 5.0;
  double sigma_gamma = 3.0;
  int iterations = 10;

  void validate() const;  // ConfigError on negative weights, non-positive bandwidths or iterations
  double kernel(double dist2, double color2) const noexcept;
  friend bool operator==(const CrfParams&, const CrfParams&) = default;
};

// Softmax probabilities (1, C, H, W) and the RGB image they were computed for.
struct UnaryField {
  Tensor64 probabilities;
  Image image;

  // Throws ShapeError on mismatched extents and DataError when a pixel's
  // distribution does not sum to 1 within 1e-5 or leaves [0, 1].
  void validate() const;
  int classes() const noexcept { return probabilities.c(); }
  int height() const noexcept { return probabilities.h(); }
  int width() const noexcept { return probabilities.w(); }
};

inline constexpr double kMinProbability = 1e-12;

struct EnergyReport {
  double unary = 0.0;     // sum_i -log P_i(x_i)
  double pairwise = 0.0;  // sum over unordered pairs i < j of mu(x_i, x_j) k(i, j)
  double total = 0.0;
  // Pixels whose chosen-label probability was below kMinProbability and was
  // clamped before taking the log.
  std::size_t clamped = 0;
};

// Energy of a labelling. Pairs are unordered (each i < j once); summing over
// ordered pairs instead doubles `pairwise`.
EnergyReport crf_energy(const LabelMap& labeling, const UnaryField& unary, const CrfParams& params);

// Synchronous mean-field iterations with exact O(N^2) message passing:
//
//   Q_i(l) ∝ P_i(l) exp(sum_{j != i} k(i, j) Q_j(l))
//
// which is the Potts update with the per-pixel constant dropped. With
// w1 = w2 = 0 the input probabilities are returned unchanged.
// `on_iteration`, when set, sees the distribution after every iteration.
Tensor64 mean_field_refine(const UnaryField& unary, const CrfParams& params,
                           const std::function<void(int, const Tensor64&)>& on_iteration = {});

// Parameter grid, expanded in lexicographic order (w1, sigma_alpha,
// sigma_beta, w2, sigma_gamma) with the innermost list varying fastest.
struct CrfGrid {
  std::vector<double> w1 = {3, 4, 5, 6};
  std::vector<double> sigma_alpha = {30, 40, 50, 60, 70, 80, 90, 100};
  std::vector<double> sigma_beta = {3, 4, 5, 6};
  std::vector<double> w2 = {3};
  std::vector<double> sigma_gamma = {3};
  int iterations = 10;

  std::size_t size() const noexcept;
  std::vector<CrfParams> expand() const;
};

struct CrfSample {
  UnaryField unary;
  LabelMap truth;
};

struct CrfTuneRow {
  CrfParams params;
  double miou = 0.0;
};

struct CrfTuneResult {
  CrfParams best;
  double best_miou = 0.0;
  std::vector<CrfTuneRow> rows;  // grid order
};

// Exhaustive search; the first grid point reaching the maximum mIOU wins.
CrfTuneResult crf_tune(const CrfGrid& grid, const std::vector<CrfSample>& samples, int num_classes);

}  // namespace waspseg
