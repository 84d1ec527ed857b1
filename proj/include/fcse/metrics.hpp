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

// Objective SNR-family measures used to score enhancement. Perfect
// reconstruction reports +inf, a fully orthogonal estimate −inf.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "fcse/audio_io.hpp"
#include "fcse/dsp.hpp"
#include "fcse/error.hpp"

namespace fcse::metrics {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kSegSnrFloorDb = -10.0;
constexpr double kSegSnrCeilDb = 35.0;
constexpr double kSilentFramePower = 1e-8;

namespace detail {

inline void check_pair(const AudioClip& ref, const AudioClip& est) {
  if (ref.sample_rate_hz != est.sample_rate_hz) {
    fail(ErrorKind::kRate, "reference and estimate rates differ");
  }
  if (ref.samples.size() != est.samples.size()) {
    fail(ErrorKind::kInconsistency,
         "reference has " + std::to_string(ref.samples.size()) +
             " samples, estimate " + std::to_string(est.samples.size()));
  }
  if (ref.samples.empty()) fail(ErrorKind::kDegenerateInput, "empty signals");
}

inline double ratio_db(double signal, double noise) {
  if (noise == 0.0) return kInf;
  if (signal == 0.0) return -kInf;
  return 10.0 * std::log10(signal / noise);
}

}  // namespace detail

/// 10·log10(Σref² / Σ(ref − est)²).
inline double snr_db(const AudioClip& ref, const AudioClip& est) {
  detail::check_pair(ref, est);
  double sig = 0.0, err = 0.0;
  for (std::size_t i = 0; i < ref.samples.size(); ++i) {
    const double r = ref.samples[i];
    const double d = r - est.samples[i];
    sig += r * r;
    err += d * d;
  }
  if (sig == 0.0) fail(ErrorKind::kDegenerateInput, "zero-power reference");
  return detail::ratio_db(sig, err);
}

/// Scale-invariant SDR: the estimate is split into its projection on the
/// reference and an orthogonal residual.
inline double si_sdr_db(const AudioClip& ref, const AudioClip& est) {
  detail::check_pair(ref, est);
  double rr = 0.0, er = 0.0;
  for (std::size_t i = 0; i < ref.samples.size(); ++i) {
    rr += ref.samples[i] * ref.samples[i];
    er += est.samples[i] * ref.samples[i];
  }
  if (rr == 0.0) fail(ErrorKind::kDegenerateInput, "zero-power reference");
  const double s = er / rr;
  double target = 0.0, resid = 0.0;
  for (std::size_t i = 0; i < ref.samples.size(); ++i) {
    const double t = s * ref.samples[i];
    const double d = est.samples[i] - t;
    target += t * t;
    resid += d * d;
  }
  return detail::ratio_db(target, resid);
}

/// Clamped per-frame SNRs of aligned frame rows, skipping frames whose
/// reference mean power is below 1e-8.
inline std::vector<double> frame_snrs_db(const FrameBatch& ref, const FrameBatch& est) {
  if (ref.count != est.count || ref.frame_len() != est.frame_len() ||
      ref.frames.size() != est.frames.size()) {
    fail(ErrorKind::kInconsistency, "frame batches differ in shape");
  }
  std::vector<double> out;
  for (std::size_t k = 0; k < ref.count; ++k) {
    auto r = ref.row(k);
    auto e = est.row(k);
    double sig = 0.0, err = 0.0;
    for (std::size_t n = 0; n < r.size(); ++n) {
      const double d = r[n] - e[n];
      sig += r[n] * r[n];
      err += d * d;
    }
    if (sig / static_cast<double>(r.size()) < kSilentFramePower) continue;
    out.push_back(std::clamp(detail::ratio_db(sig, err), kSegSnrFloorDb, kSegSnrCeilDb));
  }
  return out;
}

inline double segmental_snr_db(const FrameBatch& ref, const FrameBatch& est) {
  const auto snrs = frame_snrs_db(ref, est);
  if (snrs.empty()) fail(ErrorKind::kDegenerateInput, "every reference frame is silent");
  double sum = 0.0;
  for (double v : snrs) sum += v;
  return sum / static_cast<double>(snrs.size());
}

/// Unwindowed, unnormalized framing used for segmental scoring.
inline FrameBatch raw_frames(const AudioClip& clip, const FramingConfig& cfg) {
  cfg.validate();
  const std::size_t count = frame_count(clip.samples.size(), cfg);
  if (count == 0) fail(ErrorKind::kTooShort, "signal shorter than one frame");
  FrameBatch b;
  b.config = cfg;
  b.count = count;
  b.frames.resize(count * b.frame_len());
  for (std::size_t k = 0; k < count; ++k) {
    std::copy_n(clip.samples.data() + k * static_cast<std::size_t>(cfg.hop),
                b.frame_len(), b.row(k).data());
  }
  return b;
}

/// Mean over frames of the per-frame SNR, each clamped to [−10, 35] dB.
inline double segmental_snr_db(const AudioClip& ref, const AudioClip& est,
                               const FramingConfig& cfg) {
  detail::check_pair(ref, est);
  return segmental_snr_db(raw_frames(ref, cfg), raw_frames(est, cfg));
}

inline double mse(const AudioClip& ref, const AudioClip& est) {
  detail::check_pair(ref, est);
  double acc = 0.0;
  for (std::size_t i = 0; i < ref.samples.size(); ++i) {
    const double d = ref.samples[i] - est.samples[i];
    acc += d * d;
  }
  return acc / static_cast<double>(ref.samples.size());
}

/// Decibel value for CSV output; infinities print as "+inf" / "-inf".
inline std::string format_db(double v) {
  if (std::isinf(v)) return v > 0 ? "+inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

}  // namespace fcse::metrics
