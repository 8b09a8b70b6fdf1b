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

#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "instances.hpp"
#include "waspseg/crf.hpp"
#include "waspseg/error.hpp"
#include "waspseg/rng.hpp"

namespace waspseg {
namespace {

using testing::two_region_instance;

// Random softmax-normalised probabilities.
Tensor64 random_probabilities(int classes, int h, int w, Rng& rng) {
  Tensor64 p(Shape{1, classes, h, w});
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double s = 0.0;
      for (int c = 0; c < classes; ++c) s += p.at(0, c, y, x) = rng.uniform(0.05, 1.0);
      for (int c = 0; c < classes; ++c) p.at(0, c, y, x) /= s;
    }
  }
  return p;
}

Image random_image(int h, int w, Rng& rng) {
  Image im(w, h, 3);
  for (auto& v : im.pixels) v = static_cast<std::uint8_t>(rng.uniform_int(0, 255));
  return im;
}

double miou_of(const LabelMap& pred, const LabelMap& truth, int classes) {
  ConfusionMatrix conf(classes);
  conf.accumulate(pred, truth);
  return conf.miou().miou;
}

TEST(Crf, ZeroWeightsReturnInputExactly) {
  Rng rng(1);
  UnaryField u{random_probabilities(3, 5, 6, rng), random_image(5, 6, rng)};
  CrfParams p;
  p.w1 = 0.0;
  p.w2 = 0.0;
  const Tensor64 q = mean_field_refine(u, p);
  ASSERT_EQ(q.shape(), u.probabilities.shape());
  for (std::size_t i = 0; i < q.size(); ++i) EXPECT_EQ(q[i], u.probabilities[i]);
}

TEST(Crf, OutputIsNormalisedEveryIteration) {
  Rng rng(2);
  for (int trial = 0; trial < 5; ++trial) {
    UnaryField u{random_probabilities(4, 6, 7, rng), random_image(6, 7, rng)};
    CrfParams p;
    p.iterations = 5;
    int calls = 0;
    mean_field_refine(u, p, [&](int it, const Tensor64& q) {
      EXPECT_EQ(it, ++calls);
      for (int y = 0; y < q.h(); ++y) {
        for (int x = 0; x < q.w(); ++x) {
          double s = 0.0;
          for (int c = 0; c < q.c(); ++c) {
            EXPECT_GE(q.at(0, c, y, x), 0.0);
            s += q.at(0, c, y, x);
          }
          EXPECT_NEAR(s, 1.0, 1e-5);
        }
      }
    });
    EXPECT_EQ(calls, 5);
  }
}

TEST(Crf, EquivariantUnderClassPermutation) {
  Rng rng(3);
  UnaryField u{random_probabilities(3, 5, 5, rng), random_image(5, 5, rng)};
  const int perm[3] = {2, 0, 1};
  UnaryField v = u;
  for (int c = 0; c < 3; ++c) {
    for (int y = 0; y < 5; ++y) {
      for (int x = 0; x < 5; ++x) v.probabilities.at(0, perm[c], y, x) = u.probabilities.at(0, c, y, x);
    }
  }
  const CrfParams p;
  const Tensor64 qu = mean_field_refine(u, p);
  const Tensor64 qv = mean_field_refine(v, p);
  for (int c = 0; c < 3; ++c) {
    for (int y = 0; y < 5; ++y) {
      for (int x = 0; x < 5; ++x) EXPECT_NEAR(qv.at(0, perm[c], y, x), qu.at(0, c, y, x), 1e-12);
    }
  }
}

TEST(Crf, KernelIsSymmetricInThePair) {
  Rng rng(4);
  UnaryField u{random_probabilities(2, 1, 2, rng), random_image(1, 2, rng)};
  LabelMap a(2, 1), b(2, 1);
  a.labels = {0, 1};
  b.labels = {1, 0};
  const CrfParams p;
  EXPECT_EQ(crf_energy(a, u, p).pairwise, crf_energy(b, u, p).pairwise);
  EXPECT_EQ(p.kernel(5.0, 17.0), p.kernel(5.0, 17.0));
  EXPECT_DOUBLE_EQ(p.kernel(0.0, 0.0), p.w1 + p.w2);
}

TEST(Crf, ConstantColourKernelDependsOnlyOnDisplacement) {
  UnaryField u;
  u.probabilities = Tensor64(Shape{1, 2, 6, 6}, 0.5);
  u.image = Image(6, 6, 3, 90);
  const CrfParams p;
  // One pixel labelled 1 among zeros: the pairwise energy sums its kernel
  // to every other pixel, so it depends on position only through the set
  // of displacements. Mirror-image positions see the same set.
  auto pairwise_with_one_at = [&](int y, int x) {
    LabelMap l(6, 6);
    l.at(y, x) = 1;
    return crf_energy(l, u, p).pairwise;
  };
  EXPECT_NEAR(pairwise_with_one_at(1, 2), pairwise_with_one_at(4, 3), 1e-12);
  EXPECT_NEAR(pairwise_with_one_at(1, 2), pairwise_with_one_at(2, 1), 1e-12);
  // Two pixels differing from the rest: the pair term depends on the offset.
  auto pair_term = [&](int y0, int x0, int y1, int x1) {
    LabelMap both(6, 6), a(6, 6), b(6, 6);
    both.at(y0, x0) = 1;
    both.at(y1, x1) = 1;
    a.at(y0, x0) = 1;
    b.at(y1, x1) = 1;
    return crf_energy(a, u, p).pairwise + crf_energy(b, u, p).pairwise - crf_energy(both, u, p).pairwise;
  };
  const double k = p.kernel(1.0, 0.0);
  EXPECT_NEAR(pair_term(0, 0, 0, 1), 2.0 * k, 1e-9);
  EXPECT_NEAR(pair_term(3, 3, 3, 4), 2.0 * k, 1e-9);
}

TEST(Crf, TwoPixelEnergyMatchesHandEvaluation) {
  UnaryField u;
  u.probabilities = Tensor64(Shape{1, 2, 1, 2}, {0.7, 0.2, 0.3, 0.8});  // P(0) = {.7,.2}, P(1) = {.3,.8}
  u.image = Image(2, 1, 3);
  u.image.pixels = {10, 20, 30, 13, 24, 30};
  const CrfParams p;  // w1 4, w2 3, sigma 60 / 5 / 3

  LabelMap split(2, 1);
  split.labels = {0, 1};
  const auto e = crf_energy(split, u, p);
  const double unary = -std::log(0.7) - std::log(0.8);
  const double pair = 4.0 * std::exp(-1.0 / 7200.0 - 25.0 / 50.0) + 3.0 * std::exp(-1.0 / 18.0);
  EXPECT_NEAR(e.unary, unary, 1e-9);
  EXPECT_NEAR(e.pairwise, pair, 1e-9);
  EXPECT_NEAR(e.total, unary + pair, 1e-9);
  EXPECT_EQ(e.clamped, 0u);

  LabelMap same(2, 1);
  same.labels = {1, 1};
  const auto f = crf_energy(same, u, p);
  EXPECT_NEAR(f.total, -std::log(0.3) - std::log(0.8), 1e-9);
  EXPECT_EQ(f.pairwise, 0.0);
}

TEST(Crf, ZeroProbabilityIsClampedAndReported) {
  UnaryField u;
  u.probabilities = Tensor64(Shape{1, 2, 1, 1}, {1.0, 0.0});
  u.image = Image(1, 1, 3);
  LabelMap l(1, 1, 1);
  const auto e = crf_energy(l, u, CrfParams{});
  EXPECT_EQ(e.clamped, 1u);
  EXPECT_NEAR(e.unary, -std::log(kMinProbability), 1e-9);
}

TEST(Crf, RefinementNeverHurtsTwoRegionInstances) {
  int improved = 0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const CrfSample s = two_region_instance(seed);
    const double before = miou_of(argmax_labels(s.unary.probabilities), s.truth, 2);
    const double after = miou_of(argmax_labels(mean_field_refine(s.unary, CrfParams{})), s.truth, 2);
    EXPECT_GE(after, before) << "seed " << seed;
    improved += after > before;
  }
  EXPECT_GT(improved, 0);
}

TEST(Crf, RefinementLowersEnergyOfTwoRegionInstance) {
  const CrfSample s = two_region_instance(7);
  const CrfParams p;
  const auto before = crf_energy(argmax_labels(s.unary.probabilities), s.unary, p);
  const auto after = crf_energy(argmax_labels(mean_field_refine(s.unary, p)), s.unary, p);
  EXPECT_LT(after.total, before.total);
}

TEST(Crf, SinglePixelKeepsItsDistribution) {
  Rng rng(5);
  UnaryField u{random_probabilities(3, 1, 1, rng), random_image(1, 1, rng)};
  const Tensor64 q = mean_field_refine(u, CrfParams{});
  for (int c = 0; c < 3; ++c) EXPECT_NEAR(q[c], u.probabilities[c], 1e-12);
}

TEST(Crf, RejectsInvalidInput) {
  Rng rng(6);
  UnaryField u{random_probabilities(2, 3, 3, rng), random_image(3, 4, rng)};
  EXPECT_THROW(mean_field_refine(u, CrfParams{}), ShapeError);
  u.image = random_image(3, 3, rng);
  u.probabilities[0] += 0.1;
  EXPECT_THROW(mean_field_refine(u, CrfParams{}), DataError);
  u.probabilities[0] -= 0.1;
  CrfParams bad;
  bad.sigma_beta = 0.0;
  EXPECT_THROW(mean_field_refine(u, bad), ConfigError);
  bad = CrfParams{};
  bad.iterations = 0;
  EXPECT_THROW(mean_field_refine(u, bad), ConfigError);
}

TEST(CrfGrid, DefaultGridHas128PointsInLexicographicOrder) {
  const CrfGrid grid;
  const auto points = grid.expand();
  ASSERT_EQ(grid.size(), 128u);
  ASSERT_EQ(points.size(), 128u);
  EXPECT_EQ(points[0], (CrfParams{3, 3, 30, 3, 3, 10}));
  EXPECT_EQ(points[1], (CrfParams{3, 3, 30, 4, 3, 10}));
  EXPECT_EQ(points[4], (CrfParams{3, 3, 40, 3, 3, 10}));
  EXPECT_EQ(points[127], (CrfParams{6, 3, 100, 6, 3, 10}));
}

TEST(CrfTune, SinglePointGridReturnsThatPoint) {
  CrfGrid grid;
  grid.w1 = {5};
  grid.sigma_alpha = {70};
  grid.sigma_beta = {4};
  const std::vector<CrfSample> samples = {two_region_instance(1)};
  const auto r = crf_tune(grid, samples, 2);
  EXPECT_EQ(r.best, (CrfParams{5, 3, 70, 4, 3, 10}));
  ASSERT_EQ(r.rows.size(), 1u);
  EXPECT_EQ(r.rows[0].miou, r.best_miou);
}

TEST(CrfTune, ReturnsExhaustiveMaximiser) {
  CrfGrid grid;
  // Only the middle point smooths appreciably; the others stay close to the
  // unary, so the maximiser is strict and not at either end of the order.
  grid.w1 = {0.05, 6, 0};
  grid.sigma_alpha = {60};
  grid.sigma_beta = {5};
  grid.w2 = {0};
  grid.iterations = 5;
  std::vector<CrfSample> samples;
  for (std::uint64_t seed = 30; seed < 34; ++seed) samples.push_back(two_region_instance(seed));

  const auto points = grid.expand();
  std::size_t best = 0;
  std::vector<double> scores;
  for (std::size_t k = 0; k < points.size(); ++k) {
    ConfusionMatrix conf(2);
    for (const auto& s : samples) conf.accumulate(argmax_labels(mean_field_refine(s.unary, points[k])), s.truth);
    scores.push_back(conf.miou().miou);
    if (scores[k] > scores[best]) best = k;
  }
  int maxima = 0;
  for (double v : scores) maxima += v == scores[best];
  ASSERT_EQ(maxima, 1) << "instance set does not have a strict maximiser";

  const auto r = crf_tune(grid, samples, 2);
  EXPECT_EQ(r.best, points[best]);
  EXPECT_EQ(r.best_miou, scores[best]);
  for (std::size_t k = 0; k < points.size(); ++k) EXPECT_EQ(r.rows[k].miou, scores[k]);
}

TEST(CrfTune, TiesGoToTheFirstPoint) {
  CrfGrid grid;
  grid.w1 = {0};
  grid.sigma_alpha = {30, 40, 50};
  grid.sigma_beta = {3};
  grid.w2 = {0};
  // All weights zero: every point is the identity and scores the same.
  const std::vector<CrfSample> samples = {two_region_instance(2)};
  const auto r = crf_tune(grid, samples, 2);
  EXPECT_EQ(r.best.sigma_alpha, 30.0);
}

TEST(CrfTune, Errors) {
  CrfGrid empty;
  empty.w1.clear();
  EXPECT_THROW(crf_tune(empty, {two_region_instance(1)}, 2), ConfigError);
  EXPECT_THROW(crf_tune(CrfGrid{}, {}, 2), DataError);
}

}  // namespace
}  // namespace waspseg
