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

// Pre-processing (mixing, framing, windowing, normalization) and the
// matching overlap-add reconstruction.

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "fcse/audio_io.hpp"
#include "fcse/error.hpp"

namespace fcse {

struct FramingConfig {
  int frame_len = 320;
  int hop = 160;
  int sample_rate_hz = 16000;

  /// 50 % overlap framing of `frame_len` samples.
  static FramingConfig with_frame(int frame_len, int sample_rate_hz) {
    FramingConfig cfg{frame_len, frame_len / 2, sample_rate_hz};
    cfg.validate();
    return cfg;
  }

  void validate() const {
    if (frame_len <= 0 || frame_len % 2 != 0) {
      fail(ErrorKind::kInput, "frame_len must be even and positive, got " +
                                  std::to_string(frame_len));
    }
    if (hop != frame_len / 2) {
      fail(ErrorKind::kInput, "hop must equal frame_len / 2");
    }
    if (sample_rate_hz <= 0) fail(ErrorKind::kInput, "non-positive rate");
  }

  bool operator==(const FramingConfig&) const = default;
};

struct NormStats {
  double mean = 0.0;
  double std = 1.0;

  void validate() const {
    if (!std::isfinite(mean) || !std::isfinite(std) || !(std > 0.0)) {
      fail(ErrorKind::kDegenerateInput, "normalization stats need finite mean "
                                        "and positive std");
    }
  }

  bool operator==(const NormStats&) const = default;
};

/// Row-major count × frame_len matrix of frames.
struct FrameBatch {
  std::vector<double> frames;
  std::size_t count = 0;
  FramingConfig config;
  bool normalized = false;

  std::size_t frame_len() const { return static_cast<std::size_t>(config.frame_len); }
  std::span<double> row(std::size_t k) {
    return {frames.data() + k * frame_len(), frame_len()};
  }
  std::span<const double> row(std::size_t k) const {
    return {frames.data() + k * frame_len(), frame_len()};
  }
};

/// Noisy inputs and their clean targets, framed identically.
struct FramePairs {
  FrameBatch noisy;
  FrameBatch clean;
};

inline double mean_power(std::span<const double> x) {
  double acc = 0.0;
  for (double v : x) acc += v * v;
  return x.empty() ? 0.0 : acc / static_cast<double>(x.size());
}

struct MixResult {
  AudioClip mixture;
  double scale = 0.0;
};

/// clean + scale·noise[offset : offset + len(clean)], with scale chosen so that
/// the mixture has exactly `snr_db` of clean-to-noise power. snr_db = +inf
/// yields scale 0.
inline MixResult mix_at_snr(const AudioClip& clean, const AudioClip& noise,
                            double snr_db, std::size_t noise_offset = 0) {
  if (clean.sample_rate_hz != noise.sample_rate_hz) {
    fail(ErrorKind::kRate, "clean and noise sample rates differ");
  }
  if (std::isnan(snr_db) || snr_db == -std::numeric_limits<double>::infinity()) {
    fail(ErrorKind::kInput, "snr_db must be finite or +inf");
  }
  if (noise.samples.size() < clean.samples.size() + noise_offset) {
    fail(ErrorKind::kTooShort, "noise shorter than clean speech");
  }
  const std::span<const double> noise_seg(noise.samples.data() + noise_offset,
                                          clean.samples.size());
  const double p_clean = mean_power(clean.samples);
  const double p_noise = mean_power(noise_seg);
  if (!(p_clean > 0.0) || !(p_noise > 0.0)) {
    fail(ErrorKind::kDegenerateInput, "zero-power clean or noise signal");
  }

  MixResult out;
  out.scale = std::isinf(snr_db)
                  ? 0.0
                  : std::sqrt(p_clean / (p_noise * std::pow(10.0, snr_db / 10.0)));
  out.mixture.sample_rate_hz = clean.sample_rate_hz;
  out.mixture.samples.resize(clean.samples.size());
  for (std::size_t i = 0; i < clean.samples.size(); ++i) {
    out.mixture.samples[i] = clean.samples[i] + out.scale * noise_seg[i];
  }
  return out;
}

/// Uniform start offset into a noise clip longer than the clean clip.
inline std::size_t seeded_noise_offset(std::uint64_t seed, std::size_t clean_len,
                                       std::size_t noise_len) {
  if (noise_len <= clean_len) return 0;
  std::mt19937_64 rng(seed);
  return static_cast<std::size_t>(rng() % (noise_len - clean_len + 1));
}

/// Periodic Hann: w[n] = 0.5·(1 − cos(2πn/N)). Shifted copies at N/2 sum to 1.
inline std::vector<double> hann_window(int frame_len) {
  if (frame_len < 2 || frame_len % 2 != 0) {
    fail(ErrorKind::kInput, "Hann length must be even and >= 2");
  }
  std::vector<double> w(static_cast<std::size_t>(frame_len));
  for (int n = 0; n < frame_len; ++n) {
    w[n] = 0.5 * (1.0 - std::cos(2.0 * std::numbers::pi * n / frame_len));
  }
  return w;
}

/// Mean and population standard deviation over every sample (two-pass).
inline NormStats compute_norm_stats(const AudioClip& clean_training_speech) {
  const auto& x = clean_training_speech.samples;
  if (x.empty()) fail(ErrorKind::kDegenerateInput, "empty clip");
  double sum = 0.0;
  for (double v : x) sum += v;
  const double mean = sum / static_cast<double>(x.size());
  double ss = 0.0;
  for (double v : x) ss += (v - mean) * (v - mean);
  const double var = ss / static_cast<double>(x.size());
  if (!(var > 0.0)) fail(ErrorKind::kDegenerateInput, "zero variance");
  return {mean, std::sqrt(var)};
}

inline std::size_t frame_count(std::size_t len, const FramingConfig& cfg) {
  const auto fl = static_cast<std::size_t>(cfg.frame_len);
  if (len < fl) return 0;
  return (len - fl) / static_cast<std::size_t>(cfg.hop) + 1;
}

/// Frames k·hop .. k·hop + frame_len, trailing remainder dropped. Each frame is
/// Hann-windowed then mapped through (x − mean)/std.
inline FrameBatch frame_signal(const AudioClip& clip, const FramingConfig& cfg,
                               const NormStats& stats) {
  cfg.validate();
  stats.validate();
  if (clip.sample_rate_hz != cfg.sample_rate_hz) {
    fail(ErrorKind::kRate, "clip rate " + std::to_string(clip.sample_rate_hz) +
                               " differs from framing rate " +
                               std::to_string(cfg.sample_rate_hz));
  }
  if (clip.samples.size() < static_cast<std::size_t>(cfg.frame_len)) {
    fail(ErrorKind::kTooShort, "clip shorter than one frame");
  }
  const auto window = hann_window(cfg.frame_len);
  FrameBatch batch;
  batch.config = cfg;
  batch.count = frame_count(clip.samples.size(), cfg);
  batch.frames.resize(batch.count * batch.frame_len());
  const double inv_std = 1.0 / stats.std;
  for (std::size_t k = 0; k < batch.count; ++k) {
    const double* src = clip.samples.data() + k * static_cast<std::size_t>(cfg.hop);
    auto dst = batch.row(k);
    for (std::size_t n = 0; n < dst.size(); ++n) {
      dst[n] = (window[n] * src[n] - stats.mean) * inv_std;
    }
  }
  batch.normalized = true;
  return batch;
}

/// Length after zero-padding `len` up to a whole number of hops past one
/// frame, and to at least two frames so overlap-add is defined.
inline std::size_t padded_length(std::size_t len, const FramingConfig& cfg) {
  const auto fl = static_cast<std::size_t>(cfg.frame_len);
  const auto hop = static_cast<std::size_t>(cfg.hop);
  if (len <= fl + hop) return fl + hop;
  return fl + (len - fl + hop - 1) / hop * hop;
}

/// Inference framing: zero-pads so no input sample is dropped.
inline FrameBatch frame_signal_padded(const AudioClip& clip,
                                      const FramingConfig& cfg,
                                      const NormStats& stats) {
  AudioClip padded = clip;
  padded.samples.resize(padded_length(clip.samples.size(), cfg), 0.0);
  return frame_signal(padded, cfg, stats);
}

/// Denormalizes every frame and sums them at hop offsets, without trimming.
/// Output length is (count − 1)·hop + frame_len.
inline AudioClip overlap_add_full(const FrameBatch& batch, const NormStats& stats) {
  batch.config.validate();
  stats.validate();
  if (!batch.normalized) {
    fail(ErrorKind::kInconsistency, "frames are not in the normalized domain");
  }
  if (batch.frames.size() != batch.count * batch.frame_len()) {
    fail(ErrorKind::kInconsistency, "frame buffer does not match count × frame_len");
  }
  if (batch.count < 2) fail(ErrorKind::kTooShort, "overlap-add needs >= 2 frames");
  const auto hop = static_cast<std::size_t>(batch.config.hop);
  AudioClip out;
  out.sample_rate_hz = batch.config.sample_rate_hz;
  out.samples.assign((batch.count - 1) * hop + batch.frame_len(), 0.0);
  for (std::size_t k = 0; k < batch.count; ++k) {
    auto src = batch.row(k);
    double* dst = out.samples.data() + k * hop;
    for (std::size_t n = 0; n < src.size(); ++n) {
      dst[n] += src[n] * stats.std + stats.mean;
    }
  }
  return out;
}

/// Overlap-add with the attenuated first and last hop trimmed. Sample i of
/// the result corresponds to sample hop + i of the framed signal.
inline AudioClip overlap_add(const FrameBatch& batch, const NormStats& stats) {
  AudioClip full = overlap_add_full(batch, stats);
  const auto hop = static_cast<std::size_t>(batch.config.hop);
  full.samples.erase(full.samples.end() - static_cast<std::ptrdiff_t>(hop),
                     full.samples.end());
  full.samples.erase(full.samples.begin(),
                     full.samples.begin() + static_cast<std::ptrdiff_t>(hop));
  return full;
}

}  // namespace fcse
