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

// Deterministic stand-ins for target speech and babble: voiced "syllables"
// built from a few harmonics of a gliding pitch, and a sum of band-limited,
// syllable-modulated noise talkers.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <vector>

#include "fcse/audio_io.hpp"
#include "fcse/error.hpp"

namespace fcse::synth {

namespace detail {

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Box–Muller; avoids std::normal_distribution so output is library-independent.
  double gaussian() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    spare_ = r * std::sin(2.0 * std::numbers::pi * u2);
    have_spare_ = true;
    return r * std::cos(2.0 * std::numbers::pi * u2);
  }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

inline void scale_to_rms(std::vector<double>& x, double rms) {
  double p = 0.0;
  for (double v : x) p += v * v;
  p = std::sqrt(p / static_cast<double>(std::max<std::size_t>(1, x.size())));
  if (p > 0.0) {
    for (double& v : x) v *= rms / p;
  }
}

/// Piecewise syllable envelope: raised-sine bumps of random length separated
/// by short random gaps, values in [floor, 1].
inline std::vector<double> syllable_envelope(std::size_t n, int rate, double syl_rate_hz,
                                             double floor, Rng& rng) {
  std::vector<double> env(n, floor);
  std::size_t pos = static_cast<std::size_t>(rng.uniform(0.0, 0.1) * rate);
  const double mean_len = 1.0 / syl_rate_hz;
  while (pos < n) {
    const auto len = static_cast<std::size_t>(rng.uniform(0.6, 1.2) * mean_len * rate);
    const auto gap = static_cast<std::size_t>(rng.uniform(0.0, 0.4) * mean_len * rate);
    const double peak = rng.uniform(0.6, 1.0);
    for (std::size_t i = 0; i < len && pos + i < n; ++i) {
      const double s = std::sin(std::numbers::pi * (i + 0.5) / static_cast<double>(len));
      env[pos + i] = floor + (peak - floor) * s * s;
    }
    pos += len + gap;
  }
  return env;
}

}  // namespace detail

struct SpeechParams {
  double f0_hz = 150.0;
  int harmonics = 4;             // 3-5 works well at 8 kHz
  double syllable_rate_hz = 4.0;
  double rms = 0.1;
};

/// Sum of `harmonics` partials of a pitch that glides within each syllable,
/// under a syllable-rate amplitude envelope.
inline AudioClip speech(double seconds, int rate, const SpeechParams& p,
                        std::uint64_t seed) {
  if (seconds <= 0.0 || rate <= 0 || p.harmonics < 1 || p.f0_hz <= 0.0) {
    fail(ErrorKind::kInput, "invalid synthetic speech parameters");
  }
  detail::Rng rng(seed);
  const auto n = static_cast<std::size_t>(std::llround(seconds * rate));
  const auto env = detail::syllable_envelope(n, rate, p.syllable_rate_hz, 0.0, rng);

  std::vector<double> amps(static_cast<std::size_t>(p.harmonics));
  for (int k = 0; k < p.harmonics; ++k) amps[k] = rng.uniform(0.5, 1.0) / (k + 1);

  // Pitch contour: random targets every ~syllable, linearly interpolated.
  const auto seg = static_cast<std::size_t>(rate / p.syllable_rate_hz);
  std::vector<double> knots;
  for (std::size_t i = 0; i <= n / std::max<std::size_t>(1, seg) + 1; ++i) {
    knots.push_back(p.f0_hz * rng.uniform(0.85, 1.15));
  }
  AudioClip out;
  out.sample_rate_hz = rate;
  out.samples.resize(n);
  double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t s = i / seg;
    const double frac = static_cast<double>(i % seg) / static_cast<double>(seg);
    const double f0 = knots[s] + (knots[s + 1] - knots[s]) * frac;
    phase += 2.0 * std::numbers::pi * f0 / rate;
    double v = 0.0;
    for (int k = 0; k < p.harmonics; ++k) {
      if (f0 * (k + 1) < 0.45 * rate) v += amps[k] * std::sin((k + 1) * phase);
    }
    out.samples[i] = env[i] * v;
  }
  detail::scale_to_rms(out.samples, p.rms);
  return out;
}

struct BabbleParams {
  int talkers = 6;
  double min_center_hz = 200.0;
  double max_center_hz = 2500.0;
  double q = 1.2;
  double rms = 0.1;
};

/// Each talker is white noise through a resonant band-pass with a random
/// centre, gated by its own syllable envelope; talkers are summed.
inline AudioClip babble(double seconds, int rate, const BabbleParams& p,
                        std::uint64_t seed) {
  if (seconds <= 0.0 || rate <= 0 || p.talkers < 1) {
    fail(ErrorKind::kInput, "invalid babble parameters");
  }
  detail::Rng rng(seed);
  const auto n = static_cast<std::size_t>(std::llround(seconds * rate));
  AudioClip out;
  out.sample_rate_hz = rate;
  out.samples.assign(n, 0.0);
  for (int t = 0; t < p.talkers; ++t) {
    const double fc = std::min(rng.uniform(p.min_center_hz, p.max_center_hz), 0.4 * rate);
    const auto env =
        detail::syllable_envelope(n, rate, rng.uniform(3.0, 6.0), 0.15, rng);
    // Band-pass biquad, 0 dB peak gain.
    const double w0 = 2.0 * std::numbers::pi * fc / rate;
    const double alpha = std::sin(w0) / (2.0 * p.q);
    const double a0 = 1.0 + alpha;
    const double b0 = alpha / a0, b2 = -alpha / a0;
    const double a1 = -2.0 * std::cos(w0) / a0, a2 = (1.0 - alpha) / a0;
    double x1 = 0, x2 = 0, y1 = 0, y2 = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const double x = rng.gaussian();
      const double y = b0 * x + b2 * x2 - a1 * y1 - a2 * y2;
      x2 = x1;
      x1 = x;
      y2 = y1;
      y1 = y;
      out.samples[i] += env[i] * y;
    }
  }
  detail::scale_to_rms(out.samples, p.rms);
  return out;
}

}  // namespace fcse::synth
