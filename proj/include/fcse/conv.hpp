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

// Stride-1, undilated 1-D convolution with "same" zero padding, as used by
// every layer of the network. Two routes compute the same thing: an im2col +
// GEMM direct path, and a frequency-domain path built on fft.hpp.

#include <algorithm>
#include <complex>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "fcse/error.hpp"
#include "fcse/fft.hpp"

namespace fcse::nn {

/// Activations for a batch of frames, stored channel-major: row c holds the
/// `batch` frames of channel c back to back, each `length` samples long.
/// With one channel this is exactly a row-major batch × length matrix.
template <typename T>
struct Tensor {
  std::vector<T> data;
  std::size_t channels = 0;
  std::size_t batch = 0;
  std::size_t length = 0;

  Tensor() = default;
  Tensor(std::size_t c, std::size_t b, std::size_t l, T fill = T(0))
      : data(c * b * l, fill), channels(c), batch(b), length(l) {}

  std::size_t row_size() const { return batch * length; }
  T* channel(std::size_t c) { return data.data() + c * row_size(); }
  const T* channel(std::size_t c) const { return data.data() + c * row_size(); }
  T& at(std::size_t c, std::size_t b, std::size_t t) {
    return data[c * row_size() + b * length + t];
  }
  const T& at(std::size_t c, std::size_t b, std::size_t t) const {
    return data[c * row_size() + b * length + t];
  }
  bool same_shape(const Tensor& o) const {
    return channels == o.channels && batch == o.batch && length == o.length;
  }
};

struct SamePadding {
  int left;
  int right;
};

/// Even kernels put the extra zero on the right: k = 80 pads 39 left, 40 right.
constexpr SamePadding same_padding(int kernel_len) {
  return {(kernel_len - 1) / 2, kernel_len - 1 - (kernel_len - 1) / 2};
}

/// Weights are out_ch × in_ch × kernel_len, row-major.
struct ConvShape {
  int in_channels;
  int out_channels;
  int kernel_len;

  std::size_t weight_size() const {
    return static_cast<std::size_t>(in_channels) * out_channels * kernel_len;
  }
};

namespace detail {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Upper bound on im2col scratch, in elements.
constexpr std::size_t kColsBudget = std::size_t{1} << 22;

inline std::size_t items_per_chunk(const ConvShape& s, std::size_t length) {
  const std::size_t per_item =
      static_cast<std::size_t>(s.in_channels) * s.kernel_len * length;
  return std::max<std::size_t>(1, kColsBudget / std::max<std::size_t>(1, per_item));
}

// cols[(i·K + k), j·L + t] = x[i, item0 + j, t + k − pad_left], zero outside.
template <typename T>
void im2col(const Tensor<T>& x, const ConvShape& s, std::size_t item0,
            std::size_t n_items, RowMat<T>& cols) {
  const auto L = static_cast<std::ptrdiff_t>(x.length);
  const int K = s.kernel_len;
  const int pad = same_padding(K).left;
  cols.resize(static_cast<Eigen::Index>(s.in_channels) * K,
              static_cast<Eigen::Index>(n_items * x.length));
  cols.setZero();
  for (int i = 0; i < s.in_channels; ++i) {
    const T* src_row = x.channel(static_cast<std::size_t>(i));
    for (int k = 0; k < K; ++k) {
      T* dst_row = cols.data() + (static_cast<std::ptrdiff_t>(i) * K + k) * cols.cols();
      const std::ptrdiff_t shift = k - pad;
      const std::ptrdiff_t t_lo = std::max<std::ptrdiff_t>(0, -shift);
      const std::ptrdiff_t t_hi = std::min<std::ptrdiff_t>(L, L - shift);
      for (std::size_t j = 0; j < n_items; ++j) {
        const T* src = src_row + (item0 + j) * x.length;
        T* dst = dst_row + j * x.length;
        for (std::ptrdiff_t t = t_lo; t < t_hi; ++t) dst[t] = src[t + shift];
      }
    }
  }
}

// Adjoint of im2col: scatter-add columns back into dx.
template <typename T>
void col2im_add(const RowMat<T>& cols, const ConvShape& s, std::size_t item0,
                std::size_t n_items, Tensor<T>& dx) {
  const auto L = static_cast<std::ptrdiff_t>(dx.length);
  const int K = s.kernel_len;
  const int pad = same_padding(K).left;
  for (int i = 0; i < s.in_channels; ++i) {
    T* dst_row = dx.channel(static_cast<std::size_t>(i));
    for (int k = 0; k < K; ++k) {
      const T* src_row =
          cols.data() + (static_cast<std::ptrdiff_t>(i) * K + k) * cols.cols();
      const std::ptrdiff_t shift = k - pad;
      const std::ptrdiff_t t_lo = std::max<std::ptrdiff_t>(0, -shift);
      const std::ptrdiff_t t_hi = std::min<std::ptrdiff_t>(L, L - shift);
      for (std::size_t j = 0; j < n_items; ++j) {
        T* dst = dst_row + (item0 + j) * dx.length;
        const T* src = src_row + j * dx.length;
        for (std::ptrdiff_t t = t_lo; t < t_hi; ++t) dst[t + shift] += src[t];
      }
    }
  }
}

inline void check_conv_args(const ConvShape& s, std::size_t in_channels,
                            std::size_t weight_size, std::size_t bias_size) {
  if (s.in_channels <= 0 || s.out_channels <= 0 || s.kernel_len <= 0) {
    fail(ErrorKind::kShape, "conv dimensions must be positive");
  }
  if (in_channels != static_cast<std::size_t>(s.in_channels)) {
    fail(ErrorKind::kShape, "conv expects " + std::to_string(s.in_channels) +
                                " input channels, got " +
                                std::to_string(in_channels));
  }
  if (weight_size != s.weight_size() ||
      bias_size != static_cast<std::size_t>(s.out_channels)) {
    fail(ErrorKind::kShape, "conv weight/bias size mismatch");
  }
}

}  // namespace detail

/// Direct "same" convolution (cross-correlation) over every frame in `x`.
template <typename T>
Tensor<T> conv_forward(const Tensor<T>& x, const ConvShape& s,
                       std::span<const T> weight, std::span<const T> bias) {
  using Mat = detail::RowMat<T>;
  detail::check_conv_args(s, x.channels, weight.size(), bias.size());
  Tensor<T> y(static_cast<std::size_t>(s.out_channels), x.batch, x.length);
  const Eigen::Map<const Mat> w(weight.data(), s.out_channels,
                                static_cast<Eigen::Index>(s.in_channels) * s.kernel_len);
  Eigen::Map<Mat> out(y.data.data(), s.out_channels,
                      static_cast<Eigen::Index>(y.row_size()));
  const std::size_t chunk = detail::items_per_chunk(s, x.length);
  Mat cols;
  for (std::size_t item0 = 0; item0 < x.batch; item0 += chunk) {
    const std::size_t n = std::min(chunk, x.batch - item0);
    detail::im2col(x, s, item0, n, cols);
    out.middleCols(static_cast<Eigen::Index>(item0 * x.length),
                   static_cast<Eigen::Index>(n * x.length))
        .noalias() = w * cols;
  }
  for (int o = 0; o < s.out_channels; ++o) out.row(o).array() += bias[o];
  return y;
}

/// Accumulates weight/bias gradients into `dw`/`db` and returns dL/dx.
template <typename T>
Tensor<T> conv_backward(const Tensor<T>& x, const ConvShape& s,
                        std::span<const T> weight, const Tensor<T>& dy,
                        std::span<T> dw, std::span<T> db) {
  using Mat = detail::RowMat<T>;
  const Eigen::Index wk = static_cast<Eigen::Index>(s.in_channels) * s.kernel_len;
  const Eigen::Map<const Mat> w(weight.data(), s.out_channels, wk);
  const Eigen::Map<const Mat> g(dy.data.data(), s.out_channels,
                                static_cast<Eigen::Index>(dy.row_size()));
  Eigen::Map<Mat> gw(dw.data(), s.out_channels, wk);
  Tensor<T> dx(x.channels, x.batch, x.length);
  const std::size_t chunk = detail::items_per_chunk(s, x.length);
  Mat cols;
  Mat dcols;
  for (std::size_t item0 = 0; item0 < x.batch; item0 += chunk) {
    const std::size_t n = std::min(chunk, x.batch - item0);
    const auto g_chunk = g.middleCols(static_cast<Eigen::Index>(item0 * x.length),
                                      static_cast<Eigen::Index>(n * x.length));
    detail::im2col(x, s, item0, n, cols);
    gw.noalias() += g_chunk * cols.transpose();
    dcols.noalias() = w.transpose() * g_chunk;
    detail::col2im_add(dcols, s, item0, n, dx);
  }
  for (int o = 0; o < s.out_channels; ++o) {
    const T* row = dy.channel(static_cast<std::size_t>(o));
    T acc = T(0);
    for (std::size_t j = 0; j < dy.row_size(); ++j) acc += row[j];
    db[o] += acc;
  }
  return dx;
}

/// Single-frame direct convolution: `input` is in_ch × L row-major, output
/// out_ch × L.
template <typename T>
std::vector<T> conv1d_same(std::span<const T> input, std::size_t length,
                           const ConvShape& s, std::span<const T> weight,
                           std::span<const T> bias) {
  if (length == 0 || input.size() != length * static_cast<std::size_t>(s.in_channels)) {
    fail(ErrorKind::kShape, "input is not in_channels × length");
  }
  Tensor<T> x;
  x.channels = static_cast<std::size_t>(s.in_channels);
  x.batch = 1;
  x.length = length;
  x.data.assign(input.begin(), input.end());
  return conv_forward(x, s, weight, bias).data;
}

/// The same convolution computed as a pointwise product of spectra. The
/// transform length is a power of two ≥ L + K − 1, so no circular wrap reaches
/// the retained samples.
template <typename T>
std::vector<T> conv1d_fft(std::span<const T> input, std::size_t length,
                          const ConvShape& s, std::span<const T> weight,
                          std::span<const T> bias) {
  if (length == 0 || input.size() != length * static_cast<std::size_t>(s.in_channels)) {
    fail(ErrorKind::kShape, "input is not in_channels × length");
  }
  detail::check_conv_args(s, static_cast<std::size_t>(s.in_channels),
                          weight.size(), bias.size());
  const auto K = static_cast<std::size_t>(s.kernel_len);
  const std::size_t n = fft::next_pow2(length + K - 1);
  const std::size_t offset = K - 1 - static_cast<std::size_t>(same_padding(s.kernel_len).left);

  std::vector<std::vector<std::complex<double>>> spectra;
  spectra.reserve(static_cast<std::size_t>(s.in_channels));
  for (int i = 0; i < s.in_channels; ++i) {
    spectra.push_back(fft::forward_padded(input.data() + i * length, length, n));
  }

  std::vector<T> out(static_cast<std::size_t>(s.out_channels) * length);
  std::vector<std::complex<double>> acc(n);
  std::vector<T> reversed(K);
  for (int o = 0; o < s.out_channels; ++o) {
    std::fill(acc.begin(), acc.end(), std::complex<double>{});
    for (int i = 0; i < s.in_channels; ++i) {
      const T* w = weight.data() + (static_cast<std::size_t>(o) * s.in_channels + i) * K;
      std::reverse_copy(w, w + K, reversed.begin());
      const auto kspec = fft::forward_padded(reversed.data(), K, n);
      const auto& xspec = spectra[static_cast<std::size_t>(i)];
      for (std::size_t f = 0; f < n; ++f) acc[f] += xspec[f] * kspec[f];
    }
    fft::transform(acc, true);
    for (std::size_t t = 0; t < length; ++t) {
      out[o * length + t] = static_cast<T>(acc[t + offset].real() + bias[o]);
    }
  }
  return out;
}

}  // namespace fcse::nn
