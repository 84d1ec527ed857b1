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

#include <algorithm>
#include <cmath>
#include <cstddef>

#include "fcse/audio_io.hpp"
#include "fcse/dsp.hpp"
#include "fcse/metrics.hpp"
#include "fcse/nn.hpp"
#include "fcse/pipeline.hpp"

namespace fcse {

/// Framing for segmental SNR: 20 ms frames (even length), 50 % hop.
inline FramingConfig scoring_framing(int rate) {
  int fl = static_cast<int>(std::lround(0.02 * rate));
  fl = std::max(2, fl + (fl & 1));
  return FramingConfig::with_frame(fl, rate);
}

struct DenoisingScore {
  double train_snr_db = 0.0;
  double test_snr_db = 0.0;
  double input_snr_db = 0.0;
  double output_snr_db = 0.0;
  double input_si_sdr_db = 0.0;
  double output_si_sdr_db = 0.0;
  double input_seg_snr_db = 0.0;
  double output_seg_snr_db = 0.0;
};

inline AudioClip interior(const AudioClip& c, std::size_t hop) {
  AudioClip out;
  out.sample_rate_hz = c.sample_rate_hz;
  if (c.size() > 2 * hop) {
    out.samples.assign(c.samples.begin() + static_cast<std::ptrdiff_t>(hop),
                       c.samples.end() - static_cast<std::ptrdiff_t>(hop));
  }
  return out;
}

/// Mixes `clean` with `noise` at `test_snr_db`, denoises, and scores both the
/// mixture and the output against the clean reference over the same
/// interior span.
template <typename T>
DenoisingScore score_denoising(const nn::Model<T>& model, const NormStats& stats,
                               const FramingConfig& framing, const AudioClip& clean,
                               const AudioClip& noise, double test_snr_db,
                               std::size_t noise_offset = 0) {
  const auto mix = mix_at_snr(clean, noise, test_snr_db, noise_offset);
  const AudioClip out = denoise(model, stats, framing, mix.mixture);
  const auto hop = static_cast<std::size_t>(framing.hop);
  const AudioClip ref = interior(clean, hop);
  const AudioClip noisy = interior(mix.mixture, hop);
  const auto seg = scoring_framing(clean.sample_rate_hz);
  DenoisingScore c;
  c.test_snr_db = test_snr_db;
  c.input_snr_db = metrics::snr_db(ref, noisy);
  c.output_snr_db = metrics::snr_db(ref, out);
  c.input_si_sdr_db = metrics::si_sdr_db(ref, noisy);
  c.output_si_sdr_db = metrics::si_sdr_db(ref, out);
  c.input_seg_snr_db = metrics::segmental_snr_db(ref, noisy, seg);
  c.output_seg_snr_db = metrics::segmental_snr_db(ref, out, seg);
  return c;
}

}  // namespace fcse
