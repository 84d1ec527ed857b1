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
#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <ostream>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "fcse/dsp.hpp"
#include "fcse/error.hpp"
#include "fcse/nn.hpp"

namespace fcse::train {

template <typename T>
struct Loss {
  double value = 0.0;
  std::vector<T> grad;  // d value / d pred
};

/// Mean squared error over every element, with its gradient 2(p − t)/n.
template <typename T>
Loss<T> mse_loss(std::span<const T> pred, std::span<const T> target) {
  if (pred.size() != target.size()) fail(ErrorKind::kShape, "pred/target size mismatch");
  if (pred.empty()) fail(ErrorKind::kShape, "empty prediction");
  Loss<T> out;
  out.grad.resize(pred.size());
  const double n = static_cast<double>(pred.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = static_cast<double>(pred[i]) - static_cast<double>(target[i]);
    acc += d * d;
    out.grad[i] = static_cast<T>(2.0 * d / n);
  }
  out.value = acc / n;
  return out;
}

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  void validate() const {
    if (!(beta1 > 0.0 && beta1 < 1.0) || !(beta2 > 0.0 && beta2 < 1.0)) {
      fail(ErrorKind::kInput, "Adam betas must lie in (0, 1)");
    }
    if (!(learning_rate >= 0.0) || !(epsilon > 0.0)) {
      fail(ErrorKind::kInput, "learning rate must be >= 0 and epsilon > 0");
    }
  }
};

template <typename T>
struct AdamState {
  std::vector<std::vector<T>> m;
  std::vector<std::vector<T>> v;
  std::uint64_t t = 0;
};

/// One bias-corrected Adam update. Gradients are screened first, so a
/// non-finite entry leaves parameters and state untouched.
template <typename T>
void adam_step(std::span<const std::span<T>> params,
               const std::vector<std::vector<T>>& grads, AdamState<T>& state,
               const AdamConfig& cfg) {
  if (grads.size() != params.size()) fail(ErrorKind::kShape, "grad count mismatch");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (grads[i].size() != params[i].size()) {
      fail(ErrorKind::kShape, "grad buffer " + std::to_string(i) + " size mismatch");
    }
    for (T g : grads[i]) {
      if (!std::isfinite(static_cast<double>(g))) {
        fail(ErrorKind::kNumeric, "non-finite gradient; step aborted");
      }
    }
  }
  if (state.m.empty()) {
    for (const auto& p : params) {
      state.m.emplace_back(p.size(), T(0));
      state.v.emplace_back(p.size(), T(0));
    }
  } else if (state.m.size() != params.size()) {
    fail(ErrorKind::kShape, "optimizer state does not match parameters");
  }

  ++state.t;
  const double t = static_cast<double>(state.t);
  const double c1 = 1.0 - std::pow(cfg.beta1, t);
  const double c2 = 1.0 - std::pow(cfg.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& m = state.m[i];
    auto& v = state.v[i];
    const auto& g = grads[i];
    auto p = params[i];
    for (std::size_t j = 0; j < p.size(); ++j) {
      const double gj = g[j];
      const double mj = cfg.beta1 * m[j] + (1.0 - cfg.beta1) * gj;
      const double vj = cfg.beta2 * v[j] + (1.0 - cfg.beta2) * gj * gj;
      m[j] = static_cast<T>(mj);
      v[j] = static_cast<T>(vj);
      const double m_hat = mj / c1;
      const double v_hat = vj / c2;
      p[j] = static_cast<T>(p[j] - cfg.learning_rate * m_hat /
                                       (std::sqrt(v_hat) + cfg.epsilon));
    }
  }
}

template <typename T>
void adam_step(nn::Model<T>& model, const nn::Gradients<T>& grads,
               AdamState<T>& state, const AdamConfig& cfg) {
  const auto params = model.trainable();
  adam_step<T>(std::span<const std::span<T>>(params), grads.params, state, cfg);
  model.mark_updated();
}

/// Tracks the best validation loss and how long it has stood.
class EarlyStopping {
 public:
  explicit EarlyStopping(int patience) : patience_(patience) {
    if (patience < 1) fail(ErrorKind::kInput, "patience must be >= 1");
  }

  /// Returns true when `loss` strictly improves on the best so far.
  bool update(int epoch, double loss) {
    last_epoch_ = epoch;
    if (std::isfinite(loss) && (best_epoch_ < 0 || loss < best_loss_)) {
      best_loss_ = loss;
      best_epoch_ = epoch;
      return true;
    }
    return false;
  }

  /// True once `patience` epochs have passed without improvement.
  bool should_stop() const {
    return last_epoch_ >= 0 && last_epoch_ - best_epoch_ >= patience_;
  }

  int best_epoch() const { return best_epoch_; }
  double best_loss() const { return best_loss_; }

 private:
  int patience_;
  int best_epoch_ = -1;
  int last_epoch_ = -1;
  double best_loss_ = std::numeric_limits<double>::infinity();
};

struct TrainConfig {
  AdamConfig adam;
  int batch_size = 64;
  int max_epochs = 200;
  int patience = 20;
  std::uint64_t shuffle_seed = 0;

  void validate() const {
    adam.validate();
    if (batch_size < 2) fail(ErrorKind::kInput, "batch_size must be >= 2");
    if (max_epochs < 0) fail(ErrorKind::kInput, "max_epochs must be >= 0");
    if (patience < 1) fail(ErrorKind::kInput, "patience must be >= 1");
  }
};

enum class StopReason { kPatience, kMaxEpochs };

inline std::string_view to_string(StopReason r) {
  return r == StopReason::kPatience ? "patience" : "max_epochs";
}

struct EpochRecord {
  int epoch = 0;
  double train_mse = 0.0;
  double val_mse = 0.0;
  bool best = false;
};

struct TrainReport {
  double initial_val_mse = 0.0;
  std::vector<EpochRecord> epochs;
  int best_epoch = -1;  // −1: no epoch ran, the initial model is returned
  StopReason stop_reason = StopReason::kMaxEpochs;

  double best_val_mse() const {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& e : epochs) best = std::min(best, e.val_mse);
    return best;
  }
};

template <typename T>
struct TrainResult {
  nn::Model<T> model;
  TrainReport report;
};

template <typename T>
struct TrainHooks {
  /// Replaces the measured validation loss (test injection).
  std::function<double(int epoch, double measured)> validation_override;
  std::function<void(int epoch, const nn::Model<T>&)> on_epoch_end;
  /// Receives "epoch,train_mse,val_mse,best" CSV lines.
  std::ostream* log = nullptr;
};

namespace detail {

template <typename T>
std::vector<T> to_scalar(const std::vector<double>& v) {
  return std::vector<T>(v.begin(), v.end());
}

inline void check_pairs(const FramePairs& pairs, int frame_len, const char* what) {
  if (pairs.noisy.count == 0 || pairs.clean.count == 0) {
    fail(ErrorKind::kInput, std::string(what) + " set is empty");
  }
  if (pairs.noisy.count != pairs.clean.count ||
      pairs.noisy.frames.size() != pairs.clean.frames.size()) {
    fail(ErrorKind::kInput, std::string(what) + " noisy/clean frame counts differ");
  }
  if (pairs.noisy.config.frame_len != frame_len ||
      pairs.clean.config.frame_len != frame_len) {
    fail(ErrorKind::kInput, std::string(what) + " frames do not match model frame_len");
  }
}

// Fisher–Yates with raw 64-bit draws, identical on every standard library.
inline void shuffle(std::vector<std::size_t>& idx, std::mt19937_64& rng) {
  for (std::size_t i = idx.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng() % i);
    std::swap(idx[i - 1], idx[j]);
  }
}

// Consecutive slices of `order`; a trailing singleton joins the previous slice.
inline std::vector<std::pair<std::size_t, std::size_t>> batch_ranges(std::size_t n,
                                                                     std::size_t bs) {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (std::size_t s = 0; s < n; s += bs) out.emplace_back(s, std::min(n, s + bs));
  if (out.size() > 1 && out.back().second - out.back().first < 2) {
    out[out.size() - 2].second = out.back().second;
    out.pop_back();
  }
  return out;
}

template <typename T>
nn::Tensor<T> gather(const std::vector<T>& frames, std::size_t frame_len,
                     std::span<const std::size_t> rows) {
  nn::Tensor<T> x(1, rows.size(), frame_len);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    std::copy_n(frames.data() + rows[i] * frame_len, frame_len,
                x.data.data() + i * frame_len);
  }
  return x;
}

/// One pass of shuffled mini-batch Adam. Returns the size-weighted mean of
/// the train-mode batch losses.
template <typename T>
double run_epoch(nn::Model<T>& model, const std::vector<T>& noisy,
                 const std::vector<T>& clean, std::size_t count,
                 const TrainConfig& cfg, std::mt19937_64& rng,
                 AdamState<T>& adam) {
  const auto fl = static_cast<std::size_t>(model.spec.frame_len);
  if (count < 2) fail(ErrorKind::kInput, "training needs at least 2 frames");
  std::vector<std::size_t> order(count);
  for (std::size_t i = 0; i < count; ++i) order[i] = i;
  shuffle(order, rng);
  double weighted = 0.0;
  for (auto [lo, hi] : batch_ranges(count, static_cast<std::size_t>(cfg.batch_size))) {
    const std::span<const std::size_t> rows(order.data() + lo, hi - lo);
    const auto x = gather(noisy, fl, rows);
    const auto y = gather(clean, fl, rows);
    auto fwd = nn::forward(model, x, nn::Mode::kTrain);
    auto loss = mse_loss<T>(fwd.output.data, y.data);
    nn::Tensor<T> g(1, rows.size(), fl);
    g.data = std::move(loss.grad);
    const auto grads = nn::backward(model, *fwd.tape, g);
    adam_step(model, grads, adam, cfg.adam);
    weighted += loss.value * static_cast<double>(rows.size());
  }
  return weighted / static_cast<double>(count);
}

}  // namespace detail

constexpr std::size_t kEvalChunk = 256;

/// Inference-mode MSE over every frame pair.
template <typename T>
double evaluate_mse(const nn::Model<T>& model, const FramePairs& pairs) {
  detail::check_pairs(pairs, model.spec.frame_len, "evaluation");
  const auto fl = static_cast<std::size_t>(model.spec.frame_len);
  double acc = 0.0;
  for (std::size_t lo = 0; lo < pairs.noisy.count; lo += kEvalChunk) {
    const std::size_t hi = std::min(pairs.noisy.count, lo + kEvalChunk);
    std::vector<T> x(pairs.noisy.frames.begin() + static_cast<std::ptrdiff_t>(lo * fl),
                     pairs.noisy.frames.begin() + static_cast<std::ptrdiff_t>(hi * fl));
    const auto out = nn::infer(model, nn::frames_tensor(std::move(x), fl));
    const double* target = pairs.clean.frames.data() + lo * fl;
    for (std::size_t j = 0; j < out.data.size(); ++j) {
      const double d = static_cast<double>(out.data[j]) - target[j];
      acc += d * d;
    }
  }
  return acc / static_cast<double>(pairs.noisy.frames.size());
}

/// Early-stopped Adam training on (noisy → clean) frame pairs. After every
/// epoch the full validation set is scored in infer mode; the parameters from
/// the best-scoring epoch are returned.
template <typename T>
TrainResult<T> train(const nn::Model<T>& initial, const FramePairs& train_pairs,
                     const FramePairs& val_pairs, const TrainConfig& cfg,
                     const TrainHooks<T>& hooks = {}) {
  cfg.validate();
  detail::check_pairs(train_pairs, initial.spec.frame_len, "training");
  detail::check_pairs(val_pairs, initial.spec.frame_len, "validation");
  if (train_pairs.noisy.count < 2) fail(ErrorKind::kInput, "training needs >= 2 frames");

  const auto noisy = detail::to_scalar<T>(train_pairs.noisy.frames);
  const auto clean = detail::to_scalar<T>(train_pairs.clean.frames);

  TrainResult<T> result{initial, {}};
  nn::Model<T> model = initial;
  result.report.initial_val_mse = evaluate_mse(model, val_pairs);
  if (hooks.log) *hooks.log << "epoch,train_mse,val_mse,best\n";

  std::mt19937_64 rng(cfg.shuffle_seed);
  AdamState<T> adam;
  EarlyStopping stopper(cfg.patience);
  for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    const double train_mse = detail::run_epoch(model, noisy, clean,
                                               train_pairs.noisy.count, cfg, rng, adam);
    double val_mse = evaluate_mse(model, val_pairs);
    if (hooks.validation_override) val_mse = hooks.validation_override(epoch, val_mse);
    const bool best = stopper.update(epoch, val_mse);
    if (best) {
      result.model = model;
      result.report.best_epoch = epoch;
    }
    result.report.epochs.push_back({epoch, train_mse, val_mse, best});
    if (hooks.log) {
      *hooks.log << epoch << ',' << train_mse << ',' << val_mse << ','
                 << (best ? 1 : 0) << '\n';
      hooks.log->flush();
    }
    if (hooks.on_epoch_end) hooks.on_epoch_end(epoch, model);
    if (stopper.should_stop()) {
      result.report.stop_reason = StopReason::kPatience;
      break;
    }
  }
  return result;
}

/// Exactly `epochs` epochs of Adam from fresh optimizer state, no early
/// stopping. Per-epoch training losses go to `epoch_losses` when given.
template <typename T>
nn::Model<T> finetune(const nn::Model<T>& model, const FramePairs& pairs,
                      int epochs, const TrainConfig& cfg,
                      std::vector<double>* epoch_losses = nullptr) {
  cfg.validate();
  if (epochs < 0) fail(ErrorKind::kInput, "epochs must be >= 0");
  detail::check_pairs(pairs, model.spec.frame_len, "fine-tuning");
  nn::Model<T> out = model;
  if (epochs == 0) return out;
  const auto noisy = detail::to_scalar<T>(pairs.noisy.frames);
  const auto clean = detail::to_scalar<T>(pairs.clean.frames);
  std::mt19937_64 rng(cfg.shuffle_seed);
  AdamState<T> adam;
  for (int e = 0; e < epochs; ++e) {
    const double loss =
        detail::run_epoch(out, noisy, clean, pairs.noisy.count, cfg, rng, adam);
    if (epoch_losses) epoch_losses->push_back(loss);
  }
  return out;
}

}  // namespace fcse::train
