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

#include "test_util.hpp"
#include "waspseg/conv.hpp"
#include "waspseg/error.hpp"
#include "waspseg/gradcheck.hpp"

namespace waspseg {
namespace {

using testing::random_tensor;

// Left-anchored sum with taps k = 1..K, exactly as the textbook definition
// writes it: y'[j] = sum_k x[j + r k] w[k].
std::vector<double> left_anchored(const std::vector<float>& x, const std::vector<float>& w, int r) {
  std::vector<double> y;
  const int n = static_cast<int>(x.size());
  const int K = static_cast<int>(w.size());
  for (int j = 0; j + r * K < n; ++j) {
    double acc = 0.0;
    for (int k = 1; k <= K; ++k) acc += static_cast<double>(x[j + r * k]) * w[k - 1];
    y.push_back(acc);
  }
  return y;
}

// Plain cross-correlation written as a 7-deep loop nest.
Tensor64 naive_conv(const Tensor64& x, const Tensor64& k, int stride, int rate, int pad) {
  const int oh = (x.h() + 2 * pad - (k.h() - 1) * rate - 1) / stride + 1;
  const int ow = (x.w() + 2 * pad - (k.w() - 1) * rate - 1) / stride + 1;
  Tensor64 y(Shape{x.n(), k.n(), oh, ow});
  for (int n = 0; n < x.n(); ++n)
    for (int o = 0; o < k.n(); ++o)
      for (int i = 0; i < oh; ++i)
        for (int j = 0; j < ow; ++j) {
          double acc = 0.0;
          for (int c = 0; c < x.c(); ++c)
            for (int a = 0; a < k.h(); ++a)
              for (int b = 0; b < k.w(); ++b) {
                const int yy = i * stride - pad + a * rate;
                const int xx = j * stride - pad + b * rate;
                if (yy >= 0 && yy < x.h() && xx >= 0 && xx < x.w()) acc += x.at(n, c, yy, xx) * k.at(o, c, a, b);
              }
          y.at(n, o, i, j) = acc;
        }
  return y;
}

TEST(AtrousConv1d, CenterTapsReachBothEndpoints) {
  const std::vector<float> x{1, 0, 0, 0, 1};
  const std::vector<float> w{1, 1, 1};
  const auto y = atrous_conv1d(x, w, 2, 2);
  ASSERT_EQ(y.size(), 5u);
  EXPECT_EQ(y[2], 2.0f);
}

TEST(AtrousConv1d, SingleTapIsIdentity) {
  const std::vector<float> x{0.5f, -1.25f, 3.0f, 7.5f, 2.0f, -4.0f};
  const std::vector<float> w{1.0f};
  EXPECT_EQ(atrous_conv1d(x, w, 5, 0), x);
}

TEST(AtrousConv1d, RateOneIsCrossCorrelation) {
  const std::vector<float> x{1, 2, 3, 4, 5, 6, 7};
  const std::vector<float> w{1, 2, 3};
  const auto y = atrous_conv1d(x, w, 1, 0);
  ASSERT_EQ(y.size(), 5u);
  for (std::size_t i = 0; i < y.size(); ++i) {
    EXPECT_EQ(y[i], x[i] * w[0] + x[i + 1] * w[1] + x[i + 2] * w[2]);
  }
}

TEST(AtrousConv1d, LeftAnchoredMappingHolds) {
  const std::vector<float> x{0.3f, -1.1f, 2.5f, 0.7f, -0.4f, 1.9f, 0.05f, -2.2f, 1.0f, 0.6f, 3.1f, -0.8f, 0.2f};
  const std::vector<float> w{0.5f, -1.5f, 2.0f};
  for (int r : {1, 2, 3}) {
    for (int pad : {0, r}) {
      const auto centered = atrous_conv1d(x, w, r, pad);
      const auto ref = left_anchored(x, w, r);
      for (std::size_t j = 0; j < ref.size(); ++j) {
        EXPECT_FLOAT_EQ(centered[j + r + pad], static_cast<float>(ref[j])) << "r=" << r << " pad=" << pad;
      }
    }
  }
}

TEST(AtrousConv1d, RejectsBadArguments) {
  const std::vector<float> x{1, 2, 3};
  const std::vector<float> w{1};
  EXPECT_THROW(atrous_conv1d({}, w, 1, 0), ShapeError);
  EXPECT_THROW(atrous_conv1d(x, w, 0, 0), ShapeError);
  const std::vector<float> bad{1, NAN, 3};
  EXPECT_THROW(atrous_conv1d(bad, w, 1, 0), NumericalError);
  EXPECT_EQ(exit_code(NumericalError("x")), 3);
}

TEST(Conv2d, DilatedOnesKernelCenter) {
  const Tensor x(Shape{1, 1, 5, 5}, 1.0f);
  const Tensor k(Shape{1, 1, 3, 3}, 1.0f);
  const Tensor y = conv2d(x, k, {}, ConvGeometry::same(3, 2));
  ASSERT_EQ(y.shape(), (Shape{1, 1, 5, 5}));
  EXPECT_EQ(y.at(0, 0, 2, 2), 9.0f);
  EXPECT_EQ(y.at(0, 0, 0, 0), 4.0f);
}

TEST(Conv2d, IdentityKernel) {
  const Tensor x = random_tensor(Shape{2, 1, 7, 6}, 11);
  const Tensor k(Shape{1, 1, 1, 1}, 1.0f);
  EXPECT_EQ(conv2d(x, k, {}, ConvGeometry{}).vector(), x.vector());
}

TEST(Conv2d, ZeroStuffingIsBitIdentical) {
  const Tensor x = random_tensor(Shape{2, 4, 16, 16}, 1);
  const Tensor k = random_tensor(Shape{8, 4, 3, 3}, 2);
  const Tensor dilated = conv2d(x, k, {}, ConvGeometry::same(3, 3));
  const Tensor stuffed = conv2d(x, zero_stuff(k, Pair2::square(3)), {}, ConvGeometry{{1, 1}, {1, 1}, {3, 3}});
  ASSERT_EQ(zero_stuff(k, Pair2::square(3)).h(), 7);
  EXPECT_EQ(max_abs_diff(dilated, stuffed), 0.0);
}

TEST(Conv2d, MatchesNaiveLoopNest) {
  for (int stride : {1, 2}) {
    for (int rate : {1, 2, 3}) {
      const Tensor64 x = random_tensor<double>(Shape{2, 3, 11, 9}, 100 + stride * 10 + rate);
      const Tensor64 k = random_tensor<double>(Shape{4, 3, 3, 3}, 200 + rate);
      const int pad = rate;
      const Tensor64 got = conv2d(x, k, {}, ConvGeometry{{stride, stride}, {rate, rate}, {pad, pad}});
      const Tensor64 want = naive_conv(x, k, stride, rate, pad);
      ASSERT_EQ(got.shape(), want.shape());
      EXPECT_LT(max_abs_diff(got, want), 1e-12);
    }
  }
}

TEST(Conv2d, Linearity) {
  const Tensor a = random_tensor(Shape{1, 3, 10, 10}, 5);
  const Tensor b = random_tensor(Shape{1, 3, 10, 10}, 6);
  const Tensor k = random_tensor(Shape{2, 3, 3, 3}, 7);
  Tensor mix(a.shape());
  for (std::size_t i = 0; i < mix.size(); ++i) mix[i] = 0.5f * a[i] - 1.5f * b[i];
  const auto g = ConvGeometry::same(3, 2);
  const Tensor ya = conv2d(a, k, {}, g);
  const Tensor yb = conv2d(b, k, {}, g);
  const Tensor ym = conv2d(mix, k, {}, g);
  for (std::size_t i = 0; i < ym.size(); ++i) EXPECT_NEAR(ym[i], 0.5f * ya[i] - 1.5f * yb[i], 1e-5);
}

TEST(Conv2d, OutputExtentAndErrors) {
  EXPECT_EQ(conv_output_extent(16, 3, 1, 6, 6), 16);
  EXPECT_EQ(conv_output_extent(7, 3, 2, 1, 1), 4);
  EXPECT_THROW(conv_output_extent(4, 3, 1, 6, 0), ShapeError);
  const Tensor x(Shape{1, 2, 5, 5});
  const Tensor k(Shape{1, 3, 3, 3});
  EXPECT_THROW(conv2d(x, k, {}, ConvGeometry{}), ShapeError);
  EXPECT_EQ(effective_kernel(3, 6), 13);
  EXPECT_EQ(effective_kernel(3, 24), 49);
}

TEST(Conv2dBackward, ScalarProductRule) {
  const Tensor x(Shape{1, 1, 1, 1}, 3.0f);
  const Tensor k(Shape{1, 1, 1, 1}, -2.0f);
  const Tensor g(Shape{1, 1, 1, 1}, 1.0f);
  const auto grads = conv2d_backward(x, k, true, ConvGeometry{}, g);
  EXPECT_EQ(grads.input[0], -2.0f);
  EXPECT_EQ(grads.kernel[0], 3.0f);
  EXPECT_EQ(grads.bias.at(0), 1.0f);
}

TEST(Conv2dBackward, ZeroUpstreamGivesZeroGradients) {
  const Tensor x = random_tensor(Shape{1, 2, 6, 6}, 3);
  const Tensor k = random_tensor(Shape{3, 2, 3, 3}, 4);
  const Tensor g(Shape{1, 3, 6, 6});
  const auto grads = conv2d_backward(x, k, true, ConvGeometry::same(3, 2), g);
  for (float v : grads.input.data()) EXPECT_EQ(v, 0.0f);
  for (float v : grads.kernel.data()) EXPECT_EQ(v, 0.0f);
  for (float v : grads.bias) EXPECT_EQ(v, 0.0f);
}

TEST(Conv2dBackward, RejectsMismatchedUpstream) {
  const Tensor x(Shape{1, 1, 5, 5});
  const Tensor k(Shape{1, 1, 3, 3});
  const Tensor g(Shape{1, 1, 4, 4});
  EXPECT_THROW(conv2d_backward(x, k, false, ConvGeometry::same(3, 1), g), ShapeError);
}

ScalarFunction conv_objective(const ConvGeometry& geometry, const Tensor64& projection) {
  ScalarFunction f;
  f.value = [=](std::span<const Tensor64> in) {
    const auto y = conv2d(in[0], in[1], std::span<const double>(in[2].data()), geometry);
    double s = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) s += y[i] * projection[i];
    return s;
  };
  f.gradient = [=](std::span<const Tensor64> in) {
    auto g = conv2d_backward(in[0], in[1], true, geometry, projection);
    return std::vector<Tensor64>{g.input, g.kernel, Tensor64(in[2].shape(), g.bias)};
  };
  return f;
}

class ConvGradient : public ::testing::TestWithParam<int> {};

TEST_P(ConvGradient, MatchesFiniteDifferences) {
  const int rate = GetParam();
  const int extent = rate >= 6 ? 12 : 8;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto x = random_tensor<double>(Shape{1, 2, extent, extent}, seed);
    const auto k = random_tensor<double>(Shape{3, 2, 3, 3}, seed + 100);
    const auto b = random_tensor<double>(Shape{3, 1, 1, 1}, seed + 200);
    const auto geometry = ConvGeometry::same(3, rate);
    const auto proj = random_tensor<double>(Shape{1, 3, extent, extent}, seed + 300);
    const std::vector<Tensor64> inputs{x, k, b};
    const auto report = grad_check(conv_objective(geometry, proj), inputs);
    EXPECT_TRUE(report.passed) << "rate " << rate << " seed " << seed << " err " << report.max_relative_error;
  }
}

INSTANTIATE_TEST_SUITE_P(Rates, ConvGradient, ::testing::Values(1, 2, 6));

TEST(Conv2dBackward, StridedGradient) {
  const auto x = random_tensor<double>(Shape{2, 2, 9, 9}, 9);
  const auto k = random_tensor<double>(Shape{2, 2, 3, 3}, 10);
  const auto b = random_tensor<double>(Shape{2, 1, 1, 1}, 11);
  const ConvGeometry geometry{{2, 2}, {1, 1}, {1, 1}};
  const auto proj = random_tensor<double>(Shape{2, 2, 5, 5}, 12);
  const std::vector<Tensor64> inputs{x, k, b};
  EXPECT_TRUE(grad_check(conv_objective(geometry, proj), inputs).passed);
}

}  // namespace
}  // namespace waspseg
