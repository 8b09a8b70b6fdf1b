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

#include "waspseg/crf.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "waspseg/error.hpp"
#include "waspseg/parallel.hpp"

namespace waspseg {
namespace {

double color_dist2(const Image& im, std::size_t i, std::size_t j) {
  double s = 0.0;
  for (int c = 0; c < 3; ++c) {
    const double d = static_cast<double>(im.pixels[i * 3 + c]) - im.pixels[j * 3 + c];
    s += d * d;
  }
  return s;
}

}  // namespace

void CrfParams::validate() const {
  if (!(w1 >= 0.0) || !(w2 >= 0.0)) throw ConfigError("crf: kernel weights must be >= 0");
  if (!(sigma_alpha > 0.0) || !(sigma_beta > 0.0) || !(sigma_gamma > 0.0)) {
    throw ConfigError("crf: kernel bandwidths must be > 0");
  }
  if (iterations < 1) throw ConfigError("crf: iterations must be >= 1");
}

double CrfParams::kernel(double dist2, double color2) const noexcept {
  return w1 * std::exp(-dist2 / (2.0 * sigma_alpha * sigma_alpha) - color2 / (2.0 * sigma_beta * sigma_beta)) +
         w2 * std::exp(-dist2 / (2.0 * sigma_gamma * sigma_gamma));
}

void UnaryField::validate() const {
  if (probabilities.n() != 1 || probabilities.c() < 1) {
    throw ShapeError("crf: probabilities must be (1, C, H, W), got " + probabilities.shape().str());
  }
  if (image.channels != 3 || image.width != width() || image.height != height()) {
    throw ShapeError("crf: image is " + std::to_string(image.width) + "x" + std::to_string(image.height) + "x" +
                     std::to_string(image.channels) + " but probabilities are " + probabilities.shape().str());
  }
  const std::size_t plane = probabilities.shape().plane();
  for (std::size_t q = 0; q < plane; ++q) {
    double s = 0.0;
    for (int c = 0; c < classes(); ++c) {
      const double p = probabilities.plane(0, c)[q];
      if (!(p >= 0.0 && p <= 1.0)) {
        throw DataError("crf: probability " + std::to_string(p) + " outside [0, 1] at pixel " + std::to_string(q));
      }
      s += p;
    }
    if (std::abs(s - 1.0) > 1e-5) {
      throw DataError("crf: probabilities at pixel " + std::to_string(q) + " sum to " + std::to_string(s));
    }
  }
}

EnergyReport crf_energy(const LabelMap& labeling, const UnaryField& unary, const CrfParams& params) {
  unary.validate();
  params.validate();
  if (labeling.width != unary.width() || labeling.height != unary.height()) {
    throw ShapeError("crf energy: labelling extent does not match the unary field");
  }
  EnergyReport r;
  const std::size_t n = labeling.size();
  for (std::size_t i = 0; i < n; ++i) {
    const int l = labeling.labels[i];
    if (l >= unary.classes()) throw DataError("crf energy: label " + std::to_string(l) + " at pixel " + std::to_string(i));
    double p = unary.probabilities.plane(0, l)[i];
    if (p < kMinProbability) {
      p = kMinProbability;
      ++r.clamped;
    }
    r.unary -= std::log(p);
  }
  const int w = labeling.width;
  for (std::size_t i = 0; i < n; ++i) {
    const int yi = static_cast<int>(i) / w;
    const int xi = static_cast<int>(i) % w;
    for (std::size_t j = i + 1; j < n; ++j) {
      if (labeling.labels[i] == labeling.labels[j]) continue;
      const double dy = yi - static_cast<int>(j) / w;
      const double dx = xi - static_cast<int>(j) % w;
      r.pairwise += params.kernel(dy * dy + dx * dx, color_dist2(unary.image, i, j));
    }
  }
  r.total = r.unary + r.pairwise;
  return r;
}

Tensor64 mean_field_refine(const UnaryField& unary, const CrfParams& params,
                           const std::function<void(int, const Tensor64&)>& on_iteration) {
  unary.validate();
  params.validate();
  if (params.w1 == 0.0 && params.w2 == 0.0) return unary.probabilities;

  const int C = unary.classes();
  const int H = unary.height();
  const int W = unary.width();
  const std::size_t N = static_cast<std::size_t>(H) * W;

  std::vector<double> log_p(N * C);
  for (int c = 0; c < C; ++c) {
    for (std::size_t q = 0; q < N; ++q) {
      log_p[q * C + c] = std::log(std::max(unary.probabilities.plane(0, c)[q], kMinProbability));
    }
  }
  // Spatial factors depend only on the displacement.
  const int tw = 2 * W - 1;
  std::vector<double> spatial_a(static_cast<std::size_t>(2 * H - 1) * tw);
  std::vector<double> spatial_g(spatial_a.size());
  for (int dy = -(H - 1); dy < H; ++dy) {
    for (int dx = -(W - 1); dx < W; ++dx) {
      const double d2 = static_cast<double>(dy) * dy + static_cast<double>(dx) * dx;
      const std::size_t k = static_cast<std::size_t>(dy + H - 1) * tw + (dx + W - 1);
      spatial_a[k] = params.w1 * std::exp(-d2 / (2.0 * params.sigma_alpha * params.sigma_alpha));
      spatial_g[k] = params.w2 * std::exp(-d2 / (2.0 * params.sigma_gamma * params.sigma_gamma));
    }
  }
  const double inv_beta = 1.0 / (2.0 * params.sigma_beta * params.sigma_beta);

  std::vector<double> q_cur(N * C);
  for (int c = 0; c < C; ++c) {
    for (std::size_t q = 0; q < N; ++q) q_cur[q * C + c] = unary.probabilities.plane(0, c)[q];
  }
  std::vector<double> q_next(N * C);
  Tensor64 out(unary.probabilities.shape());

  for (int it = 0; it < params.iterations; ++it) {
    parallel_for(0, N, [&](std::size_t i) {
      const int yi = static_cast<int>(i / W);
      const int xi = static_cast<int>(i % W);
      double msg[256] = {};
      double* m = C <= 256 ? msg : nullptr;
      std::vector<double> big;
      if (m == nullptr) {
        big.assign(static_cast<std::size_t>(C), 0.0);
        m = big.data();
      }
      for (std::size_t j = 0; j < N; ++j) {
        if (j == i) continue;
        const int dy = static_cast<int>(j / W) - yi;
        const int dx = static_cast<int>(j % W) - xi;
        const std::size_t k = static_cast<std::size_t>(dy + H - 1) * tw + (dx + W - 1);
        const double kij = spatial_a[k] * std::exp(-color_dist2(unary.image, i, j) * inv_beta) + spatial_g[k];
        const double* qj = q_cur.data() + j * C;
        for (int c = 0; c < C; ++c) m[c] += kij * qj[c];
      }
      double mx = -INFINITY;
      for (int c = 0; c < C; ++c) {
        m[c] += log_p[i * C + c];
        mx = std::max(mx, m[c]);
      }
      double sum = 0.0;
      for (int c = 0; c < C; ++c) {
        m[c] = std::exp(m[c] - mx);
        sum += m[c];
      }
      for (int c = 0; c < C; ++c) q_next[i * C + c] = m[c] / sum;
    });
    for (double v : q_next) {
      if (!std::isfinite(v)) throw NumericalError("crf: non-finite message in iteration " + std::to_string(it + 1));
    }
    q_cur.swap(q_next);
    if (on_iteration) {
      for (int c = 0; c < C; ++c) {
        for (std::size_t q = 0; q < N; ++q) out.plane(0, c)[q] = q_cur[q * C + c];
      }
      on_iteration(it + 1, out);
    }
  }
  for (int c = 0; c < C; ++c) {
    for (std::size_t q = 0; q < N; ++q) out.plane(0, c)[q] = q_cur[q * C + c];
  }
  return out;
}

std::size_t CrfGrid::size() const noexcept {
  return w1.size() * sigma_alpha.size() * sigma_beta.size() * w2.size() * sigma_gamma.size();
}

std::vector<CrfParams> CrfGrid::expand() const {
  std::vector<CrfParams> out;
  out.reserve(size());
  for (double a : w1)
    for (double sa : sigma_alpha)
      for (double sb : sigma_beta)
        for (double b : w2)
          for (double sg : sigma_gamma) out.push_back(CrfParams{a, b, sa, sb, sg, iterations});
  return out;
}

CrfTuneResult crf_tune(const CrfGrid& grid, const std::vector<CrfSample>& samples, int num_classes) {
  if (grid.size() == 0) throw ConfigError("crf tune: empty grid");
  if (samples.empty()) throw DataError("crf tune: empty evaluation set");
  CrfTuneResult result;
  bool first = true;
  for (const CrfParams& p : grid.expand()) {
    ConfusionMatrix conf(num_classes);
    for (const auto& s : samples) {
      conf.accumulate(argmax_labels(mean_field_refine(s.unary, p)), s.truth);
    }
    const double miou = conf.miou().miou;
    result.rows.push_back({p, miou});
    if (first || miou > result.best_miou) {
      result.best = p;
      result.best_miou = miou;
      first = false;
    }
  }
  return result;
}

}  // namespace waspseg
