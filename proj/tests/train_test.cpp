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
#include "fcse/train.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "test_util.hpp"

namespace fcse::train {
namespace {

using fcse::testing::expect_error;
using fcse::testing::random_signal;

FramePairs random_pairs(std::size_t count, int fl, std::uint64_t seed, bool identity) {
  FramePairs p;
  const auto cfg = FramingConfig::with_frame(fl, 16000);
  p.noisy.config = p.clean.config = cfg;
  p.noisy.count = p.clean.count = count;
  p.noisy.normalized = p.clean.normalized = true;
  p.clean.frames = random_signal(count * static_cast<std::size_t>(fl), seed);
  p.noisy.frames = p.clean.frames;
  if (!identity) {
    const auto n = random_signal(p.noisy.frames.size(), seed + 1, -0.5, 0.5);
    for (std::size_t i = 0; i < n.size(); ++i) p.noisy.frames[i] += n[i];
  }
  return p;
}

nn::Model<double> small_model(std::uint64_t seed, int fl = 16) {
  const int filters[] = {4};
  return nn::build_model<double>(nn::fcn_spec(fl, filters, 5, 5), seed);
}

TEST(MseLoss, Examples) {
  const std::vector<double> a{1.0, 2.0, 3.0};
  auto l = mse_loss<double>(a, a);
  EXPECT_EQ(l.value, 0.0);
  EXPECT_EQ(l.grad, (std::vector<double>{0.0, 0.0, 0.0}));
  const std::vector<double> b{1.5, 2.5, 3.5};
  l = mse_loss<double>(b, a);
  EXPECT_DOUBLE_EQ(l.value, 0.25);
  for (double g : l.grad) EXPECT_DOUBLE_EQ(g, 2.0 * 0.5 / 3.0);
  expect_error(ErrorKind::kShape, [&] { mse_loss<double>(a, std::vector<double>(2)); });
}

TEST(MseLoss, MatchesDirectSum) {
  const auto p = random_signal(1000, 1);
  const auto t = random_signal(1000, 2);
  double acc = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) acc += (p[i] - t[i]) * (p[i] - t[i]);
  const auto l = mse_loss<double>(p, t);
  EXPECT_NEAR(l.value, acc / 1000.0, 1e-12);
  for (std::size_t i = 0; i < p.size(); ++i) EXPECT_NEAR(l.grad[i], (p[i] - t[i]) / 500.0, 1e-15);
}

void scalar_step(double& theta, double g, AdamState<double>& st, const AdamConfig& cfg) {
  std::vector<double> buf{theta};
  const std::vector<std::span<double>> params{std::span<double>(buf)};
  adam_step<double>(params, {{g}}, st, cfg);
  theta = buf[0];
}

TEST(Adam, FirstStep) {
  double theta = 0.0;
  AdamState<double> st;
  scalar_step(theta, 2.0, st, {});
  EXPECT_NEAR(theta, -0.001 * (2.0 / (2.0 + 1e-8)), 1e-15);
  EXPECT_NEAR(theta, -0.000999999995, 1e-14);
  EXPECT_EQ(st.t, 1u);
}

TEST(Adam, ZeroGradientKeepsParameters) {
  double theta = 1.5;
  AdamState<double> st;
  scalar_step(theta, 0.0, st, {});
  EXPECT_EQ(theta, 1.5);
}

TEST(Adam, QuadraticConverges) {
  AdamConfig cfg;
  cfg.learning_rate = 0.1;
  double theta = 0.0;
  AdamState<double> st;
  for (int i = 0; i < 200; ++i) scalar_step(theta, 2.0 * (theta - 3.0), st, cfg);
  EXPECT_LT(std::abs(theta - 3.0), 0.01);
}

TEST(Adam, ZeroLearningRateIsIdentity) {
  AdamConfig cfg;
  cfg.learning_rate = 0.0;
  auto m = small_model(1);
  const auto before = m;
  AdamState<double> st;
  for (int i = 0; i < 3; ++i) {
    auto g = nn::zero_gradients(m);
    for (auto& b : g.params) b = random_signal(b.size(), static_cast<std::uint64_t>(i));
    adam_step(m, g, st, cfg);
  }
  EXPECT_TRUE(m.same_parameters(before));
  EXPECT_EQ(m.version(), 3u);
}

TEST(Adam, NonFiniteGradientAborts) {
  double theta = 1.0;
  AdamState<double> st;
  expect_error(ErrorKind::kNumeric,
               [&] { scalar_step(theta, std::numeric_limits<double>::quiet_NaN(), st, {}); });
  EXPECT_EQ(theta, 1.0);
  EXPECT_EQ(st.t, 0u);
  EXPECT_TRUE(st.m.empty());
}

TEST(EarlyStopping, StopsAtArgminPlusPatience) {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 500; ++trial) {
    const int patience = 1 + static_cast<int>(rng() % 6);
    const int max_epochs = 1 + static_cast<int>(rng() % 30);
    std::vector<double> seq(static_cast<std::size_t>(max_epochs));
    for (auto& v : seq) v = static_cast<double>(rng() % 8);
    EarlyStopping es(patience);
    int stop = max_epochs - 1;
    for (int e = 0; e < max_epochs; ++e) {
      es.update(e, seq[static_cast<std::size_t>(e)]);
      if (es.should_stop()) {
        stop = e;
        break;
      }
    }
    // First occurrence of the minimum over the epochs actually seen.
    const auto seen_end = seq.begin() + stop + 1;
    const int argmin = static_cast<int>(std::min_element(seq.begin(), seen_end) - seq.begin());
    EXPECT_EQ(es.best_epoch(), argmin);
    EXPECT_EQ(stop, std::min(argmin + patience, max_epochs - 1));
  }
  expect_error(ErrorKind::kInput, [] { EarlyStopping(0); });
}

TEST(Train, InjectedWorseningLossesStopAfterPatience) {
  const auto data = random_pairs(20, 16, 3, false);
  TrainConfig cfg;
  cfg.batch_size = 8;
  cfg.max_epochs = 200;
  cfg.patience = 20;
  std::vector<nn::Model<double>> snapshots;
  TrainHooks<double> hooks;
  hooks.validation_override = [](int epoch, double) { return 1.0 + epoch; };
  hooks.on_epoch_end = [&](int, const nn::Model<double>& m) { snapshots.push_back(m); };
  const auto r = train(small_model(2), data, data, cfg, hooks);
  EXPECT_EQ(r.report.epochs.size(), 21u);
  EXPECT_EQ(r.report.best_epoch, 0);
  EXPECT_EQ(r.report.stop_reason, StopReason::kPatience);
  ASSERT_EQ(snapshots.size(), 21u);
  EXPECT_TRUE(r.model.same_parameters(snapshots[0]));
  EXPECT_FALSE(r.model.same_parameters(snapshots[20]));
}

TEST(Train, ReturnsBestValidationSnapshot) {
  const auto tr = random_pairs(64, 16, 5, false);
  const auto va = random_pairs(32, 16, 7, false);
  TrainConfig cfg;
  cfg.batch_size = 16;
  cfg.max_epochs = 12;
  cfg.patience = 3;
  cfg.adam.learning_rate = 0.01;
  std::ostringstream log;
  TrainHooks<double> hooks;
  hooks.log = &log;
  const auto r = train(small_model(3), tr, va, cfg, hooks);
  ASSERT_GE(r.report.best_epoch, 0);
  EXPECT_DOUBLE_EQ(evaluate_mse(r.model, va), r.report.best_val_mse());
  EXPECT_EQ(r.report.epochs[static_cast<std::size_t>(r.report.best_epoch)].val_mse,
            r.report.best_val_mse());
  const std::string text = log.str();
  EXPECT_EQ(text.rfind("epoch,train_mse,val_mse,best\n", 0), 0u);
  const auto lines = std::count(text.begin(), text.end(), '\n');
  EXPECT_EQ(static_cast<std::size_t>(lines), r.report.epochs.size() + 1);
}

TEST(Train, IdentityTaskLearns) {
  const auto data = random_pairs(128, 16, 11, true);
  TrainConfig cfg;
  cfg.batch_size = 16;
  cfg.max_epochs = 50;
  cfg.adam.learning_rate = 0.01;
  const auto init = small_model(4);
  const double before = evaluate_mse(init, data);
  const auto r = train(init, data, data, cfg);
  EXPECT_LT(evaluate_mse(r.model, data), 0.01 * before);
  // Median-smoothed training loss never rises.
  std::vector<double> smooth;
  const auto& ep = r.report.epochs;
  for (std::size_t i = 0; i + 5 <= ep.size(); i += 5) {
    std::vector<double> w;
    for (std::size_t j = i; j < i + 5; ++j) w.push_back(ep[j].train_mse);
    std::nth_element(w.begin(), w.begin() + 2, w.end());
    smooth.push_back(w[2]);
  }
  for (std::size_t i = 1; i < smooth.size(); ++i) EXPECT_LE(smooth[i], smooth[i - 1]);
}

TEST(Train, Deterministic) {
  const auto tr = random_pairs(40, 16, 13, false);
  TrainConfig cfg;
  cfg.batch_size = 8;
  cfg.max_epochs = 4;
  cfg.shuffle_seed = 99;
  const auto a = train(small_model(5), tr, tr, cfg);
  const auto b = train(small_model(5), tr, tr, cfg);
  EXPECT_TRUE(a.model.same_parameters(b.model));
  ASSERT_EQ(a.report.epochs.size(), b.report.epochs.size());
  for (std::size_t i = 0; i < a.report.epochs.size(); ++i) {
    EXPECT_EQ(a.report.epochs[i].train_mse, b.report.epochs[i].train_mse);
    EXPECT_EQ(a.report.epochs[i].val_mse, b.report.epochs[i].val_mse);
  }
}

TEST(Train, InputErrors) {
  const auto good = random_pairs(8, 16, 1, false);
  FramePairs empty;
  empty.noisy.config = empty.clean.config = good.noisy.config;
  TrainConfig cfg;
  expect_error(ErrorKind::kInput, [&] { train(small_model(1), empty, good, cfg); });
  expect_error(ErrorKind::kInput, [&] { train(small_model(1), good, empty, cfg); });
  const auto wrong = random_pairs(8, 32, 1, false);
  expect_error(ErrorKind::kInput, [&] { train(small_model(1), wrong, good, cfg); });
  cfg.batch_size = 1;
  expect_error(ErrorKind::kInput, [&] { train(small_model(1), good, good, cfg); });
}

TEST(Train, MaxEpochsZeroReturnsInitialModel) {
  const auto data = random_pairs(8, 16, 1, false);
  TrainConfig cfg;
  cfg.max_epochs = 0;
  const auto init = small_model(6);
  const auto r = train(init, data, data, cfg);
  EXPECT_TRUE(r.model.same_parameters(init));
  EXPECT_EQ(r.report.best_epoch, -1);
  EXPECT_TRUE(r.report.epochs.empty());
}

TEST(BatchRanges, TrailingSingletonMerges) {
  using P = std::pair<std::size_t, std::size_t>;
  EXPECT_EQ(detail::batch_ranges(10, 4), (std::vector<P>{{0, 4}, {4, 8}, {8, 10}}));
  EXPECT_EQ(detail::batch_ranges(9, 4), (std::vector<P>{{0, 4}, {4, 9}}));
  EXPECT_EQ(detail::batch_ranges(3, 64), (std::vector<P>{{0, 3}}));
}

TEST(Finetune, ZeroEpochsIsIdentity) {
  const auto data = random_pairs(16, 16, 2, false);
  const auto m = small_model(7);
  EXPECT_TRUE(finetune(m, data, 0, TrainConfig{}).same_parameters(m));
}

TEST(Finetune, FittedDataDoesNotGetWorse) {
  const auto data = random_pairs(128, 16, 17, true);
  TrainConfig cfg;
  cfg.batch_size = 16;
  cfg.max_epochs = 40;
  cfg.adam.learning_rate = 0.01;
  const auto fitted = train(small_model(8), data, data, cfg).model;
  const double before = evaluate_mse(fitted, data);
  TrainConfig ft;
  ft.batch_size = 16;
  ft.adam.learning_rate = 1e-4;
  std::vector<double> losses;
  const auto tuned = finetune(fitted, data, 5, ft, &losses);
  EXPECT_EQ(losses.size(), 5u);
  EXPECT_LE(evaluate_mse(tuned, data), before + 1e-6);
}

TEST(Finetune, ShiftedDataImproves) {
  // Enough steps for the batchnorm running statistics to settle.
  const auto base = random_pairs(1024, 16, 19, false);
  TrainConfig cfg;
  cfg.batch_size = 16;
  cfg.max_epochs = 10;
  cfg.adam.learning_rate = 0.01;
  const auto trained = train(small_model(9), base, base, cfg).model;
  // Same signal statistics, louder noise.
  auto shifted = random_pairs(1024, 16, 23, true);
  const auto n = random_signal(shifted.noisy.frames.size(), 24, -0.8, 0.8);
  for (std::size_t i = 0; i < n.size(); ++i) shifted.noisy.frames[i] += n[i];
  const double before = evaluate_mse(trained, shifted);
  TrainConfig ft;
  ft.batch_size = 16;
  EXPECT_LT(evaluate_mse(finetune(trained, shifted, 5, ft), shifted), before);
}

}  // namespace
}  // namespace fcse::train
