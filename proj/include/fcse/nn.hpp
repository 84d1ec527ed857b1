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

// Fully convolutional denoiser: hidden blocks of conv → batchnorm → PReLU
// (or ReLU) at constant frame length, closed by a single-filter conv with no
// activation. Reverse-mode gradients come from an explicit forward tape.

#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "fcse/conv.hpp"
#include "fcse/error.hpp"

namespace fcse::nn {

enum class LayerKind : std::uint32_t {
  kConv1d = 0,
  kBatchNorm = 1,
  kPRelu = 2,
  kRelu = 3,
};

enum class Activation { kPRelu, kRelu };

struct LayerSpec {
  LayerKind kind = LayerKind::kConv1d;
  int in_channels = 0;   // conv only
  int channels = 0;      // output channels of this layer
  int kernel_len = 0;    // conv only

  static LayerSpec conv(int in_ch, int out_ch, int kernel_len) {
    return {LayerKind::kConv1d, in_ch, out_ch, kernel_len};
  }
  static LayerSpec batchnorm(int ch) { return {LayerKind::kBatchNorm, ch, ch, 0}; }
  static LayerSpec prelu(int ch) { return {LayerKind::kPRelu, ch, ch, 0}; }
  static LayerSpec relu(int ch) { return {LayerKind::kRelu, ch, ch, 0}; }

  ConvShape conv_shape() const { return {in_channels, channels, kernel_len}; }

  bool operator==(const LayerSpec&) const = default;
};

struct ModelSpec {
  int frame_len = 320;
  std::vector<LayerSpec> layers;

  /// Channel counts must chain from 1 back to 1, every layer keeps
  /// frame_len, and the net ends in a bare conv.
  void validate() const {
    if (frame_len <= 0) fail(ErrorKind::kSpec, "frame_len must be positive");
    if (layers.empty()) fail(ErrorKind::kSpec, "empty layer list");
    int ch = 1;
    for (std::size_t i = 0; i < layers.size(); ++i) {
      const auto& l = layers[i];
      const std::string where = "layer " + std::to_string(i) + ": ";
      if (l.channels <= 0 || l.in_channels <= 0) {
        fail(ErrorKind::kSpec, where + "channel counts must be positive");
      }
      if (l.in_channels != ch) {
        fail(ErrorKind::kSpec, where + "expects " + std::to_string(l.in_channels) +
                                   " channels but receives " + std::to_string(ch));
      }
      if (l.kind == LayerKind::kConv1d) {
        if (l.kernel_len <= 0) fail(ErrorKind::kSpec, where + "kernel_len must be positive");
      } else if (l.channels != l.in_channels) {
        fail(ErrorKind::kSpec, where + "non-conv layers preserve channel count");
      }
      ch = l.channels;
    }
    const auto& last = layers.back();
    if (last.kind != LayerKind::kConv1d || last.channels != 1) {
      fail(ErrorKind::kSpec, "final layer must be a single-filter conv");
    }
  }

  bool operator==(const ModelSpec&) const = default;
};

/// Running statistics count toward the total, matching the published table.
inline std::size_t param_count(const LayerSpec& l, int frame_len) {
  const auto ch = static_cast<std::size_t>(l.channels);
  switch (l.kind) {
    case LayerKind::kConv1d: return l.conv_shape().weight_size() + ch;
    case LayerKind::kBatchNorm: return 4 * ch;
    case LayerKind::kPRelu: return ch * static_cast<std::size_t>(frame_len);
    case LayerKind::kRelu: return 0;
  }
  return 0;
}

inline std::size_t param_count(const ModelSpec& spec) {
  std::size_t n = 0;
  for (const auto& l : spec.layers) n += param_count(l, spec.frame_len);
  return n;
}

inline int kernel_len_from_ms(double kernel_ms, int sample_rate_hz) {
  const auto k = static_cast<int>(std::lround(kernel_ms * sample_rate_hz / 1000.0));
  if (k < 1) fail(ErrorKind::kSpec, "kernel shorter than one sample");
  return k;
}

/// Hidden blocks conv(filters[i]) → BN → activation, then conv(1).
inline ModelSpec fcn_spec(int frame_len, std::span<const int> hidden_filters,
                          int kernel_len, int output_kernel_len,
                          Activation act = Activation::kPRelu) {
  ModelSpec spec;
  spec.frame_len = frame_len;
  int ch = 1;
  for (int f : hidden_filters) {
    spec.layers.push_back(LayerSpec::conv(ch, f, kernel_len));
    spec.layers.push_back(LayerSpec::batchnorm(f));
    spec.layers.push_back(act == Activation::kPRelu ? LayerSpec::prelu(f)
                                                    : LayerSpec::relu(f));
    ch = f;
  }
  spec.layers.push_back(LayerSpec::conv(ch, 1, output_kernel_len));
  spec.validate();
  return spec;
}

/// The selected architecture: 20 ms frames at 16 kHz, 5 ms kernels, widths
/// 12-25-50-100-200.
inline ModelSpec model53_spec() {
  const int filters[] = {12, 25, 50, 100, 200};
  return fcn_spec(320, filters, 80, 80);
}

enum class Mode { kTrain, kInfer };
enum class ConvAlgo { kDirect, kFft };

struct BatchNormOptions {
  double eps = 1e-3;
  double momentum = 0.01;

  bool operator==(const BatchNormOptions&) const = default;
};

template <typename T>
struct LayerParams {
  std::vector<T> weight;  // conv: out × in × k
  std::vector<T> bias;
  std::vector<T> gamma;   // batchnorm
  std::vector<T> beta;
  std::vector<T> running_mean;
  std::vector<T> running_var;
  std::vector<T> alpha;   // prelu: channels × frame_len

  bool operator==(const LayerParams&) const = default;
};

template <typename T>
class Model {
 public:
  ModelSpec spec;
  std::vector<LayerParams<T>> layers;
  BatchNormOptions bn;

  /// Trainable buffers in canonical order: conv weight, bias; BN γ, β;
  /// PReLU α. Running statistics are excluded.
  std::vector<std::span<T>> trainable() {
    std::vector<std::span<T>> out;
    for_each_buffer(*this, false, [&](auto& v) { out.emplace_back(v); });
    return out;
  }
  std::vector<std::span<const T>> trainable() const {
    std::vector<std::span<const T>> out;
    for_each_buffer(*this, false, [&](const auto& v) { out.emplace_back(v); });
    return out;
  }

  /// Every buffer, including running statistics, in serialization order.
  std::vector<std::span<T>> buffers() {
    std::vector<std::span<T>> out;
    for_each_buffer(*this, true, [&](auto& v) { out.emplace_back(v); });
    return out;
  }
  std::vector<std::span<const T>> buffers() const {
    std::vector<std::span<const T>> out;
    for_each_buffer(*this, true, [&](const auto& v) { out.emplace_back(v); });
    return out;
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (auto b : buffers()) n += b.size();
    return n;
  }

  std::size_t layer_parameter_count(std::size_t i) const {
    const auto& p = layers.at(i);
    return p.weight.size() + p.bias.size() + p.gamma.size() + p.beta.size() +
           p.running_mean.size() + p.running_var.size() + p.alpha.size();
  }

  /// Bumped whenever trainable parameters change; tapes from earlier
  /// versions are rejected by backward().
  std::uint64_t version() const { return version_; }
  void mark_updated() { ++version_; }

  template <typename U>
  Model<U> cast() const {
    Model<U> out;
    out.spec = spec;
    out.bn = bn;
    out.layers.resize(layers.size());
    auto conv = [](const std::vector<T>& v) {
      return std::vector<U>(v.begin(), v.end());
    };
    for (std::size_t i = 0; i < layers.size(); ++i) {
      const auto& s = layers[i];
      auto& d = out.layers[i];
      d.weight = conv(s.weight);
      d.bias = conv(s.bias);
      d.gamma = conv(s.gamma);
      d.beta = conv(s.beta);
      d.running_mean = conv(s.running_mean);
      d.running_var = conv(s.running_var);
      d.alpha = conv(s.alpha);
    }
    return out;
  }

  bool same_parameters(const Model& o) const {
    return spec == o.spec && bn == o.bn && layers == o.layers;
  }

 private:
  template <typename Self, typename Fn>
  static void for_each_buffer(Self& self, bool with_running, Fn&& fn) {
    for (std::size_t i = 0; i < self.layers.size(); ++i) {
      auto& p = self.layers[i];
      switch (self.spec.layers[i].kind) {
        case LayerKind::kConv1d:
          fn(p.weight);
          fn(p.bias);
          break;
        case LayerKind::kBatchNorm:
          fn(p.gamma);
          fn(p.beta);
          if (with_running) {
            fn(p.running_mean);
            fn(p.running_var);
          }
          break;
        case LayerKind::kPRelu:
          fn(p.alpha);
          break;
        case LayerKind::kRelu:
          break;
      }
    }
  }

  std::uint64_t version_ = 0;
};

constexpr double kPReluInitSlope = 0.25;

/// Conv weights ~ U(±sqrt(6 / (fan_in·(1 + 0.25²)))), bias 0; BN identity;
/// PReLU slopes 0.25. Same seed, same model.
template <typename T = float>
Model<T> build_model(const ModelSpec& spec, std::uint64_t seed,
                     BatchNormOptions bn = {}) {
  spec.validate();
  Model<T> m;
  m.spec = spec;
  m.bn = bn;
  m.layers.resize(spec.layers.size());
  std::mt19937_64 rng(seed);
  auto uniform = [&rng](double limit) {
    const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    return (2.0 * u - 1.0) * limit;
  };
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const auto& l = spec.layers[i];
    auto& p = m.layers[i];
    const auto ch = static_cast<std::size_t>(l.channels);
    switch (l.kind) {
      case LayerKind::kConv1d: {
        const double fan_in = static_cast<double>(l.in_channels) * l.kernel_len;
        const double limit =
            std::sqrt(6.0 / (fan_in * (1.0 + kPReluInitSlope * kPReluInitSlope)));
        p.weight.resize(l.conv_shape().weight_size());
        for (auto& w : p.weight) w = static_cast<T>(uniform(limit));
        p.bias.assign(ch, T(0));
        break;
      }
      case LayerKind::kBatchNorm:
        p.gamma.assign(ch, T(1));
        p.beta.assign(ch, T(0));
        p.running_mean.assign(ch, T(0));
        p.running_var.assign(ch, T(1));
        break;
      case LayerKind::kPRelu:
        p.alpha.assign(ch * static_cast<std::size_t>(spec.frame_len),
                       static_cast<T>(kPReluInitSlope));
        break;
      case LayerKind::kRelu:
        break;
    }
  }
  return m;
}


/// Intermediate state of one train-mode forward pass.
template <typename T>
struct Tape {
  const void* owner = nullptr;
  std::uint64_t version = 0;
  bool consumed = false;
  std::vector<Tensor<T>> inputs;               // input of every layer
  std::vector<std::vector<double>> bn_mean;    // per layer, empty if not BN
  std::vector<std::vector<double>> bn_inv_std;
};

template <typename T>
struct Gradients {
  std::vector<std::vector<T>> params;  // mirrors Model::trainable()
  Tensor<T> input;
};

// ---------------------------------------------------------------------------
// Layer kernels

/// Per-channel batch statistics over batch × time (population variance).
template <typename T>
void batch_stats(const Tensor<T>& x, std::vector<double>& mean,
                 std::vector<double>& var) {
  const std::size_t n = x.row_size();
  mean.assign(x.channels, 0.0);
  var.assign(x.channels, 0.0);
  for (std::size_t c = 0; c < x.channels; ++c) {
    const T* row = x.channel(c);
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j) s += row[j];
    const double mu = s / static_cast<double>(n);
    double ss = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      const double d = row[j] - mu;
      ss += d * d;
    }
    mean[c] = mu;
    var[c] = ss / static_cast<double>(n);
  }
}

namespace detail {

template <typename T>
Tensor<T> batchnorm_apply(const Tensor<T>& x, const LayerParams<T>& p,
                          const std::vector<double>& mean,
                          const std::vector<double>& inv_std) {
  Tensor<T> y(x.channels, x.batch, x.length);
  for (std::size_t c = 0; c < x.channels; ++c) {
    const T scale = static_cast<T>(p.gamma[c] * inv_std[c]);
    const T shift = static_cast<T>(p.beta[c] - p.gamma[c] * mean[c] * inv_std[c]);
    const T* src = x.channel(c);
    T* dst = y.channel(c);
    for (std::size_t j = 0; j < x.row_size(); ++j) dst[j] = src[j] * scale + shift;
  }
  return y;
}

}  // namespace detail

/// Normalizes with the running estimates.
template <typename T>
Tensor<T> batchnorm_infer(const Tensor<T>& x, const LayerParams<T>& p,
                          const BatchNormOptions& opt) {
  if (p.gamma.size() != x.channels) fail(ErrorKind::kShape, "batchnorm channel mismatch");
  std::vector<double> mean(x.channels), inv_std(x.channels);
  for (std::size_t c = 0; c < x.channels; ++c) {
    mean[c] = p.running_mean[c];
    inv_std[c] = 1.0 / std::sqrt(static_cast<double>(p.running_var[c]) + opt.eps);
  }
  return detail::batchnorm_apply(x, p, mean, inv_std);
}

/// Train mode normalizes with batch statistics and folds them into the
/// running estimates (running ← (1 − m)·running + m·batch); infer mode uses
/// the running estimates only. When `mean_out`/`inv_std_out` are given they
/// receive the batch statistics used.
template <typename T>
Tensor<T> batchnorm_forward(const Tensor<T>& x, LayerParams<T>& p,
                            const BatchNormOptions& opt, Mode mode,
                            std::vector<double>* mean_out = nullptr,
                            std::vector<double>* inv_std_out = nullptr) {
  if (mode == Mode::kInfer) return batchnorm_infer(x, p, opt);
  if (p.gamma.size() != x.channels) fail(ErrorKind::kShape, "batchnorm channel mismatch");
  if (x.batch < 2) {
    fail(ErrorKind::kDegenerateBatch, "train-mode batchnorm needs batch >= 2");
  }
  std::vector<double> mean, var, inv_std(x.channels);
  batch_stats(x, mean, var);
  for (std::size_t c = 0; c < x.channels; ++c) {
    inv_std[c] = 1.0 / std::sqrt(var[c] + opt.eps);
    p.running_mean[c] = static_cast<T>((1.0 - opt.momentum) * p.running_mean[c] +
                                       opt.momentum * mean[c]);
    p.running_var[c] = static_cast<T>((1.0 - opt.momentum) * p.running_var[c] +
                                      opt.momentum * var[c]);
  }
  Tensor<T> y = detail::batchnorm_apply(x, p, mean, inv_std);
  if (mean_out) *mean_out = std::move(mean);
  if (inv_std_out) *inv_std_out = std::move(inv_std);
  return y;
}

template <typename T>
Tensor<T> batchnorm_backward(const Tensor<T>& x, const LayerParams<T>& p,
                             const std::vector<double>& mean,
                             const std::vector<double>& inv_std,
                             const Tensor<T>& dy, std::span<T> dgamma,
                             std::span<T> dbeta) {
  const std::size_t n = x.row_size();
  const double inv_n = 1.0 / static_cast<double>(n);
  Tensor<T> dx(x.channels, x.batch, x.length);
  for (std::size_t c = 0; c < x.channels; ++c) {
    const T* xs = x.channel(c);
    const T* gs = dy.channel(c);
    double sum_g = 0.0, sum_gx = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      const double xhat = (xs[j] - mean[c]) * inv_std[c];
      sum_g += gs[j];
      sum_gx += gs[j] * xhat;
    }
    dgamma[c] += static_cast<T>(sum_gx);
    dbeta[c] += static_cast<T>(sum_g);
    const double k = p.gamma[c] * inv_std[c];
    T* out = dx.channel(c);
    for (std::size_t j = 0; j < n; ++j) {
      const double xhat = (xs[j] - mean[c]) * inv_std[c];
      out[j] = static_cast<T>(k * (gs[j] - inv_n * sum_g - xhat * inv_n * sum_gx));
    }
  }
  return dx;
}

/// y = x for x ≥ 0, α·x otherwise, with one slope per (channel, time) slot
/// shared across the batch.
template <typename T>
Tensor<T> prelu_forward(const Tensor<T>& x, std::span<const T> alpha) {
  if (alpha.size() != x.channels * x.length) {
    fail(ErrorKind::kShape, "PReLU slopes must be channels × frame_len");
  }
  Tensor<T> y(x.channels, x.batch, x.length);
  for (std::size_t c = 0; c < x.channels; ++c) {
    const T* a = alpha.data() + c * x.length;
    for (std::size_t b = 0; b < x.batch; ++b) {
      const T* src = x.channel(c) + b * x.length;
      T* dst = y.channel(c) + b * x.length;
      for (std::size_t t = 0; t < x.length; ++t) {
        dst[t] = src[t] >= T(0) ? src[t] : a[t] * src[t];
      }
    }
  }
  return y;
}

template <typename T>
Tensor<T> prelu_backward(const Tensor<T>& x, std::span<const T> alpha,
                         const Tensor<T>& dy, std::span<T> dalpha) {
  Tensor<T> dx(x.channels, x.batch, x.length);
  for (std::size_t c = 0; c < x.channels; ++c) {
    const T* a = alpha.data() + c * x.length;
    T* da = dalpha.data() + c * x.length;
    for (std::size_t b = 0; b < x.batch; ++b) {
      const std::size_t off = b * x.length;
      const T* xs = x.channel(c) + off;
      const T* gs = dy.channel(c) + off;
      T* out = dx.channel(c) + off;
      for (std::size_t t = 0; t < x.length; ++t) {
        if (xs[t] >= T(0)) {
          out[t] = gs[t];
        } else {
          out[t] = a[t] * gs[t];
          da[t] += gs[t] * xs[t];
        }
      }
    }
  }
  return dx;
}

template <typename T>
Tensor<T> relu_forward(const Tensor<T>& x) {
  Tensor<T> y = x;
  for (auto& v : y.data) v = v > T(0) ? v : T(0);
  return y;
}

template <typename T>
Tensor<T> relu_backward(const Tensor<T>& x, const Tensor<T>& dy) {
  Tensor<T> dx = dy;
  for (std::size_t j = 0; j < dx.data.size(); ++j) {
    if (!(x.data[j] > T(0))) dx.data[j] = T(0);
  }
  return dx;
}

// ---------------------------------------------------------------------------
// Whole-network passes

namespace detail {

template <typename T>
Tensor<T> conv_layer(const Tensor<T>& x, const LayerSpec& l,
                     const LayerParams<T>& p, ConvAlgo algo) {
  if (algo == ConvAlgo::kDirect) {
    return conv_forward<T>(x, l.conv_shape(), p.weight, p.bias);
  }
  // Frequency-domain route, one frame at a time.
  Tensor<T> y(static_cast<std::size_t>(l.channels), x.batch, x.length);
  std::vector<T> frame(x.channels * x.length);
  for (std::size_t b = 0; b < x.batch; ++b) {
    for (std::size_t c = 0; c < x.channels; ++c) {
      std::copy_n(x.channel(c) + b * x.length, x.length, frame.data() + c * x.length);
    }
    const auto out = conv1d_fft<T>(frame, x.length, l.conv_shape(), p.weight, p.bias);
    for (std::size_t c = 0; c < y.channels; ++c) {
      std::copy_n(out.data() + c * x.length, x.length, y.channel(c) + b * x.length);
    }
  }
  return y;
}

template <typename T>
void check_input(const ModelSpec& spec, const Tensor<T>& x) {
  if (x.channels != 1 || x.length != static_cast<std::size_t>(spec.frame_len) ||
      x.batch == 0 || x.data.size() != x.row_size()) {
    fail(ErrorKind::kShape, "network input must be batch × " +
                                std::to_string(spec.frame_len) + " × 1");
  }
}

}  // namespace detail

/// Wraps a row-major batch × frame_len buffer as a one-channel tensor.
template <typename T>
Tensor<T> frames_tensor(std::vector<T> frames, std::size_t frame_len) {
  if (frame_len == 0 || frames.size() % frame_len != 0) {
    fail(ErrorKind::kShape, "frame buffer is not a whole number of frames");
  }
  Tensor<T> x;
  x.channels = 1;
  x.length = frame_len;
  x.batch = frames.size() / frame_len;
  x.data = std::move(frames);
  return x;
}

template <typename T>
struct ForwardResult {
  Tensor<T> output;
  std::optional<Tape<T>> tape;  // present only in train mode
};

/// Applies the layers in order. Train mode uses batch statistics, updates the
/// running estimates, and records a tape for backward().
template <typename T>
ForwardResult<T> forward(Model<T>& model, const Tensor<T>& input, Mode mode,
                         ConvAlgo algo = ConvAlgo::kDirect) {
  detail::check_input(model.spec, input);
  ForwardResult<T> result;
  if (mode == Mode::kTrain) {
    auto& tape = result.tape.emplace();
    tape.owner = &model;
    tape.version = model.version();
    tape.inputs.reserve(model.layers.size());
    tape.bn_mean.resize(model.layers.size());
    tape.bn_inv_std.resize(model.layers.size());
  }
  Tensor<T> x = input;
  for (std::size_t i = 0; i < model.layers.size(); ++i) {
    const auto& l = model.spec.layers[i];
    auto& p = model.layers[i];
    Tensor<T> y;
    switch (l.kind) {
      case LayerKind::kConv1d: y = detail::conv_layer(x, l, p, algo); break;
      case LayerKind::kBatchNorm:
        y = mode == Mode::kTrain
                ? batchnorm_forward(x, p, model.bn, mode, &result.tape->bn_mean[i],
                                    &result.tape->bn_inv_std[i])
                : batchnorm_forward(x, p, model.bn, mode);
        break;
      case LayerKind::kPRelu: y = prelu_forward<T>(x, p.alpha); break;
      case LayerKind::kRelu: y = relu_forward(x); break;
    }
    if (result.tape) {
      result.tape->inputs.push_back(std::move(x));
    }
    x = std::move(y);
  }
  result.output = std::move(x);
  return result;
}

/// Pure inference pass; safe for concurrent callers sharing one model.
template <typename T>
Tensor<T> infer(const Model<T>& model, const Tensor<T>& input,
                ConvAlgo algo = ConvAlgo::kDirect) {
  detail::check_input(model.spec, input);
  Tensor<T> x = input;
  for (std::size_t i = 0; i < model.layers.size(); ++i) {
    const auto& l = model.spec.layers[i];
    const auto& p = model.layers[i];
    switch (l.kind) {
      case LayerKind::kConv1d: x = detail::conv_layer(x, l, p, algo); break;
      case LayerKind::kBatchNorm: x = batchnorm_infer(x, p, model.bn); break;
      case LayerKind::kPRelu: x = prelu_forward<T>(x, p.alpha); break;
      case LayerKind::kRelu: x = relu_forward(x); break;
    }
  }
  return x;
}

template <typename T>
Gradients<T> zero_gradients(const Model<T>& model) {
  Gradients<T> g;
  for (auto b : model.trainable()) g.params.emplace_back(b.size(), T(0));
  return g;
}

/// Reverse pass over a train-mode tape. The tape is consumed; reusing it, or
/// using one recorded before the last parameter update, is an error.
template <typename T>
Gradients<T> backward(const Model<T>& model, Tape<T>& tape,
                      const Tensor<T>& output_grad) {
  if (tape.consumed) fail(ErrorKind::kTape, "tape already consumed");
  if (tape.owner != &model) fail(ErrorKind::kTape, "tape belongs to another model");
  if (tape.version != model.version()) {
    fail(ErrorKind::kTape, "tape is stale: parameters changed since forward");
  }
  if (tape.inputs.size() != model.layers.size()) {
    fail(ErrorKind::kTape, "tape is incomplete");
  }
  const auto& last_in = tape.inputs.front();
  if (output_grad.channels != 1 || output_grad.batch != last_in.batch ||
      output_grad.length != last_in.length) {
    fail(ErrorKind::kShape, "output gradient shape mismatch");
  }
  tape.consumed = true;

  Gradients<T> grads = zero_gradients(model);
  // Trainable slots are laid out in layer order; find each layer's first slot.
  std::vector<std::size_t> slot(model.layers.size());
  {
    std::size_t s = 0;
    for (std::size_t i = 0; i < model.layers.size(); ++i) {
      slot[i] = s;
      switch (model.spec.layers[i].kind) {
        case LayerKind::kConv1d:
        case LayerKind::kBatchNorm: s += 2; break;
        case LayerKind::kPRelu: s += 1; break;
        case LayerKind::kRelu: break;
      }
    }
  }

  Tensor<T> g = output_grad;
  for (std::size_t i = model.layers.size(); i-- > 0;) {
    const auto& l = model.spec.layers[i];
    const auto& p = model.layers[i];
    const auto& x = tape.inputs[i];
    switch (l.kind) {
      case LayerKind::kConv1d:
        g = conv_backward<T>(x, l.conv_shape(), p.weight, g, grads.params[slot[i]],
                             grads.params[slot[i] + 1]);
        break;
      case LayerKind::kBatchNorm:
        g = batchnorm_backward<T>(x, p, tape.bn_mean[i], tape.bn_inv_std[i], g,
                                  grads.params[slot[i]], grads.params[slot[i] + 1]);
        break;
      case LayerKind::kPRelu:
        g = prelu_backward<T>(x, p.alpha, g, grads.params[slot[i]]);
        break;
      case LayerKind::kRelu: g = relu_backward(x, g); break;
    }
  }
  grads.input = std::move(g);
  return grads;
}

}  // namespace fcse::nn
