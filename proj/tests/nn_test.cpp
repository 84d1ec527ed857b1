/* Copyright 2026 The fcse Authors. All Rights Reserved.

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
#include "fcse/nn.hpp"

#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "test_util.hpp"

namespace fcse::nn {
namespace {

using fcse::testing::expect_error;
using fcse::testing::random_signal;

Tensor<double> random_tensor(std::size_t c, std::size_t b, std::size_t l,
                             std::uint64_t seed) {
  Tensor<double> t(c, b, l);
  t.data = random_signal(t.data.size(), seed);
  return t;
}

TEST(ParamCount, SelectedModelPerLayer) {
  const auto spec = model53_spec();
  const std::vector<std::size_t> expect{972,    48,  3840,  24025, 100, 8000,
                                        100050, 200, 16000, 400100, 400, 32000,
                                        1600200, 800, 64000, 16001};
  ASSERT_EQ(spec.layers.size(), expect.size());
  const auto model = build_model<float>(spec, 1);
  std::size_t sum = 0;
  for (std::size_t i = 0; i < expect.size(); ++i) {
    EXPECT_EQ(param_count(spec.layers[i], spec.frame_len), expect[i]) << "layer " << i;
    EXPECT_EQ(model.layer_parameter_count(i), expect[i]) << "layer " << i;
    sum += expect[i];
  }
  EXPECT_EQ(sum, 2266736u);
  EXPECT_EQ(param_count(spec), 2266736u);
  EXPECT_EQ(model.parameter_count(), 2266736u);
}

TEST(ModelSpec, ValidationErrors) {
  ModelSpec s;
  s.frame_len = 16;
  expect_error(ErrorKind::kSpec, [&] { s.validate(); });
  s.layers = {LayerSpec::conv(2, 1, 3)};
  expect_error(ErrorKind::kSpec, [&] { s.validate(); });
  s.layers = {LayerSpec::conv(1, 4, 3), LayerSpec::batchnorm(3), LayerSpec::conv(3, 1, 3)};
  expect_error(ErrorKind::kSpec, [&] { s.validate(); });
  s.layers = {LayerSpec::conv(1, 4, 3), LayerSpec::prelu(4)};
  expect_error(ErrorKind::kSpec, [&] { s.validate(); });
  s.layers = {LayerSpec::conv(1, 1, 0)};
  expect_error(ErrorKind::kSpec, [&] { s.validate(); });
  s.layers = {LayerSpec::conv(1, 1, 3)};
  EXPECT_NO_THROW(s.validate());
}

TEST(KernelLength, FromMilliseconds) {
  EXPECT_EQ(kernel_len_from_ms(5.0, 16000), 80);
  EXPECT_EQ(kernel_len_from_ms(2.5, 16000), 40);
  EXPECT_EQ(kernel_len_from_ms(5.0, 8000), 40);
  expect_error(ErrorKind::kSpec, [] { kernel_len_from_ms(0.01, 8000); });
}

TEST(BuildModel, InitializationRanges) {
  const int filters[] = {6, 4};
  const auto spec = fcn_spec(16, filters, 5, 3);
  const auto m = build_model<double>(spec, 42);
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const auto& l = spec.layers[i];
    const auto& p = m.layers[i];
    switch (l.kind) {
      case LayerKind::kConv1d: {
        const double limit = std::sqrt(6.0 / (l.in_channels * l.kernel_len * 1.0625));
        for (double w : p.weight) EXPECT_LE(std::abs(w), limit);
        for (double b : p.bias) EXPECT_EQ(b, 0.0);
        break;
      }
      case LayerKind::kBatchNorm:
        for (double g : p.gamma) EXPECT_EQ(g, 1.0);
        for (double v : p.running_var) EXPECT_EQ(v, 1.0);
        break;
      case LayerKind::kPRelu:
        EXPECT_EQ(p.alpha.size(), static_cast<std::size_t>(l.channels) * 16);
        for (double a : p.alpha) EXPECT_EQ(a, 0.25);
        break;
      case LayerKind::kRelu: break;
    }
  }
  EXPECT_TRUE(m.same_parameters(build_model<double>(spec, 42)));
  EXPECT_FALSE(m.same_parameters(build_model<double>(spec, 43)));
}

TEST(BatchNorm, TrainModeNormalizesAndTracksRunningStats) {
  LayerParams<double> p;
  p.gamma = {2.0, 1.0};
  p.beta = {0.5, -1.0};
  p.running_mean = {0.0, 0.0};
  p.running_var = {1.0, 1.0};
  const BatchNormOptions opt;
  auto x = random_tensor(2, 4, 8, 1);
  for (std::size_t j = 0; j < x.row_size(); ++j) x.channel(1)[j] = 3.0 + 5.0 * x.channel(1)[j];
  std::vector<double> mean, inv_std;
  const auto y = batchnorm_forward(x, p, opt, Mode::kTrain, &mean, &inv_std);
  for (std::size_t c = 0; c < 2; ++c) {
    const std::size_t n = x.row_size();
    double m = 0.0, v = 0.0;
    for (std::size_t j = 0; j < n; ++j) m += x.channel(c)[j];
    m /= static_cast<double>(n);
    for (std::size_t j = 0; j < n; ++j) v += (x.channel(c)[j] - m) * (x.channel(c)[j] - m);
    v /= static_cast<double>(n);
    EXPECT_NEAR(mean[c], m, 1e-12);
    EXPECT_NEAR(inv_std[c], 1.0 / std::sqrt(v + 1e-3), 1e-12);
    EXPECT_NEAR(p.running_mean[c], 0.01 * m, 1e-12);
    EXPECT_NEAR(p.running_var[c], 0.99 + 0.01 * v, 1e-12);
    double ym = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      EXPECT_NEAR(y.channel(c)[j],
                  p.gamma[c] * (x.channel(c)[j] - m) / std::sqrt(v + 1e-3) + p.beta[c],
                  1e-12);
      ym += y.channel(c)[j];
    }
    EXPECT_NEAR(ym / static_cast<double>(n), p.beta[c], 1e-12);
  }
}

TEST(BatchNorm, InferUsesRunningStats) {
  LayerParams<double> p;
  p.gamma = {2.0};
  p.beta = {1.0};
  p.running_mean = {0.5};
  p.running_var = {4.0};
  const auto x = random_tensor(1, 1, 5, 2);
  const auto y = batchnorm_infer(x, p, BatchNormOptions{});
  for (std::size_t j = 0; j < 5; ++j) {
    EXPECT_NEAR(y.data[j], 2.0 * (x.data[j] - 0.5) / std::sqrt(4.0 + 1e-3) + 1.0, 1e-12);
  }
  EXPECT_EQ(p.running_mean[0], 0.5);
}

TEST(BatchNorm, TrainModeNeedsTwoItems) {
  LayerParams<double> p;
  p.gamma = {1.0};
  p.beta = {0.0};
  p.running_mean = {0.0};
  p.running_var = {1.0};
  const auto x = random_tensor(1, 1, 5, 2);
  expect_error(ErrorKind::kDegenerateBatch,
               [&] { batchnorm_forward(x, p, BatchNormOptions{}, Mode::kTrain); });
}

TEST(PRelu, ForwardAndBackward) {
  Tensor<double> x(1, 2, 3);
  x.data = {-2.0, 1.0, 0.0, -1.0, -4.0, 3.0};
  const std::vector<double> alpha{0.25, 0.5, 0.1};
  const auto y = prelu_forward<double>(x, alpha);
  EXPECT_EQ(y.data, (std::vector<double>{-0.5, 1.0, 0.0, -0.25, -2.0, 3.0}));
  Tensor<double> dy(1, 2, 3, 1.0);
  std::vector<double> da(3, 0.0);
  const auto dx = prelu_backward<double>(x, alpha, dy, da);
  EXPECT_EQ(dx.data, (std::vector<double>{0.25, 1.0, 1.0, 0.25, 0.5, 1.0}));
  EXPECT_EQ(da, (std::vector<double>{-3.0, -4.0, 0.0}));
  expect_error(ErrorKind::kShape,
               [&] { prelu_forward<double>(x, std::vector<double>(2, 0.25)); });
}

TEST(Relu, ClampsNegatives) {
  Tensor<double> x(1, 1, 4);
  x.data = {-1.0, 0.0, 2.0, -0.5};
  EXPECT_EQ(relu_forward(x).data, (std::vector<double>{0.0, 0.0, 2.0, 0.0}));
  Tensor<double> dy(1, 1, 4, 3.0);
  EXPECT_EQ(relu_backward(x, dy).data, (std::vector<double>{0.0, 0.0, 3.0, 0.0}));
}

double projected_loss(Model<double>& m, const Tensor<double>& x,
                      const std::vector<double>& r) {
  const auto y = forward(m, x, Mode::kTrain).output;
  double acc = 0.0;
  for (std::size_t i = 0; i < r.size(); ++i) acc += y.data[i] * r[i];
  return acc;
}

void gradient_check(Activation act) {
  const int filters[] = {3, 2};
  const auto spec = fcn_spec(16, filters, 5, 4, act);
  auto model = build_model<double>(spec, 9);
  // Break the symmetry of the initial BN/PReLU values.
  {
    std::mt19937_64 rng(10);
    std::uniform_real_distribution<double> d(0.5, 1.5);
    for (auto& p : model.layers) {
      for (auto& g : p.gamma) g = d(rng);
      for (auto& b : p.beta) b = d(rng) - 1.0;
      for (auto& a : p.alpha) a = d(rng) - 0.5;
      for (auto& b : p.bias) b = d(rng) - 1.0;
    }
  }
  const auto x = random_tensor(1, 3, 16, 11);
  const auto r = random_signal(x.data.size(), 12);

  auto fr = forward(model, x, Mode::kTrain);
  Tensor<double> gy(1, 3, 16);
  gy.data = r;
  const auto grads = backward(model, *fr.tape, gy);

  const double h = 1e-6;
  auto check = [&](double analytic, double numeric) {
    const double scale = std::max({1.0, std::abs(analytic), std::abs(numeric)});
    EXPECT_LE(std::abs(analytic - numeric) / scale, 1e-4)
        << "analytic " << analytic << " numeric " << numeric;
  };
  auto params = model.trainable();
  for (std::size_t b = 0; b < params.size(); ++b) {
    for (std::size_t i = 0; i < params[b].size(); ++i) {
      const double saved = params[b][i];
      params[b][i] = saved + h;
      const double up = projected_loss(model, x, r);
      params[b][i] = saved - h;
      const double down = projected_loss(model, x, r);
      params[b][i] = saved;
      check(grads.params[b][i], (up - down) / (2 * h));
    }
  }
  for (std::size_t i = 0; i < x.data.size(); ++i) {
    auto xp = x;
    xp.data[i] += h;
    const double up = projected_loss(model, xp, r);
    xp.data[i] -= 2 * h;
    const double down = projected_loss(model, xp, r);
    check(grads.input.data[i], (up - down) / (2 * h));
  }
}

TEST(Backward, MatchesFiniteDifferencesPRelu) { gradient_check(Activation::kPRelu); }
TEST(Backward, MatchesFiniteDifferencesRelu) { gradient_check(Activation::kRelu); }

TEST(Backward, TapeMisuse) {
  const int filters[] = {2};
  const auto spec = fcn_spec(8, filters, 3, 3);
  auto a = build_model<double>(spec, 1);
  auto b = build_model<double>(spec, 1);
  const auto x = random_tensor(1, 2, 8, 3);
  const Tensor<double> g(1, 2, 8, 1.0);

  auto fr = forward(a, x, Mode::kTrain);
  EXPECT_NO_THROW(backward(a, *fr.tape, g));
  expect_error(ErrorKind::kTape, [&] { backward(a, *fr.tape, g); });

  auto fr2 = forward(a, x, Mode::kTrain);
  expect_error(ErrorKind::kTape, [&] { backward(b, *fr2.tape, g); });

  auto fr3 = forward(a, x, Mode::kTrain);
  a.mark_updated();
  expect_error(ErrorKind::kTape, [&] { backward(a, *fr3.tape, g); });

  auto fr4 = forward(a, x, Mode::kTrain);
  expect_error(ErrorKind::kShape, [&] { backward(a, *fr4.tape, Tensor<double>(1, 3, 8)); });

  EXPECT_FALSE(forward(a, x, Mode::kInfer).tape.has_value());
}

TEST(Forward, ShapesAndInputChecks) {
  const int filters[] = {4, 3};
  const auto spec = fcn_spec(16, filters, 5, 4);
  auto m = build_model<double>(spec, 2);
  const auto x = random_tensor(1, 7, 16, 4);
  const auto y = infer(m, x);
  EXPECT_EQ(y.channels, 1u);
  EXPECT_EQ(y.batch, 7u);
  EXPECT_EQ(y.length, 16u);
  expect_error(ErrorKind::kShape, [&] { infer(m, random_tensor(1, 2, 15, 1)); });
  expect_error(ErrorKind::kShape, [&] { infer(m, random_tensor(2, 2, 16, 1)); });
  expect_error(ErrorKind::kShape, [&] { frames_tensor(std::vector<double>(17), 16); });
}

TEST(Infer, DeterministicAndMatchesFftRoute) {
  const int filters[] = {5, 4};
  const auto spec = fcn_spec(32, filters, 9, 6);
  auto m = build_model<double>(spec, 3);
  // Train-mode passes to give the running statistics non-trivial values.
  for (int i = 0; i < 3; ++i) forward(m, random_tensor(1, 4, 32, 20 + i), Mode::kTrain);
  const auto x = random_tensor(1, 6, 32, 5);
  const auto a = infer(m, x);
  const auto b = infer(m, x);
  EXPECT_EQ(a.data, b.data);
  const auto f = infer(m, x, ConvAlgo::kFft);
  for (std::size_t i = 0; i < a.data.size(); ++i) EXPECT_NEAR(a.data[i], f.data[i], 1e-9);
  // Each frame is processed independently at inference.
  Tensor<double> one(1, 1, 32);
  std::copy_n(x.data.begin() + 64, 32, one.data.begin());
  const auto y1 = infer(m, one);
  for (std::size_t t = 0; t < 32; ++t) EXPECT_NEAR(y1.data[t], a.data[64 + t], 1e-12);
}

TEST(Model, CastPreservesValues) {
  const int filters[] = {2};
  const auto m = build_model<float>(fcn_spec(8, filters, 3, 3), 5);
  const auto d = m.cast<double>();
  const auto back = d.cast<float>();
  EXPECT_TRUE(back.same_parameters(m));
  EXPECT_EQ(d.parameter_count(), m.parameter_count());
}

}  // namespace
}  // namespace fcse::nn
