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
#include <cstdint>
#include <filesystem>
#include <numbers>
#include <string>
#include <vector>

#include "fcse/error.hpp"
#include "fcse/io_util.hpp"

namespace fcse {

/// Mono sample buffer at a fixed rate. Amplitudes nominally lie in [-1, 1].
struct AudioClip {
  std::vector<double> samples;
  int sample_rate_hz = 16000;

  std::size_t size() const { return samples.size(); }
  double duration_s() const {
    return static_cast<double>(samples.size()) / sample_rate_hz;
  }
};

/// Planar multi-channel audio as decoded from a file, before down-mixing.
struct MultiChannelAudio {
  std::vector<std::vector<double>> channels;
  int sample_rate_hz = 16000;
};

/// Element-wise mean of the channels. One channel is passed through untouched.
inline AudioClip to_mono(const MultiChannelAudio& audio) {
  if (audio.channels.empty() || audio.channels.size() > 2) {
    fail(ErrorKind::kUnsupportedFormat,
         "expected 1 or 2 channels, got " +
             std::to_string(audio.channels.size()));
  }
  AudioClip out{audio.channels[0], audio.sample_rate_hz};
  if (audio.channels.size() == 2) {
    const auto& right = audio.channels[1];
    if (right.size() != out.samples.size()) {
      fail(ErrorKind::kInconsistency, "channel lengths differ");
    }
    for (std::size_t i = 0; i < out.samples.size(); ++i) {
      out.samples[i] = 0.5 * (out.samples[i] + right[i]);
    }
  }
  return out;
}

inline AudioClip to_mono(const AudioClip& clip) { return clip; }

namespace wav {

constexpr double kPcm16Scale = 32768.0;
constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

inline MultiChannelAudio decode(const std::vector<std::uint8_t>& bytes) {
  io::ByteReader r(bytes, ErrorKind::kFormat);
  if (r.tag() != "RIFF") fail(ErrorKind::kFormat, "missing RIFF tag");
  r.u32();
  if (r.tag() != "WAVE") fail(ErrorKind::kFormat, "missing WAVE tag");

  bool have_fmt = false;
  std::uint16_t channels = 0;
  std::uint32_t rate = 0;
  while (r.remaining() >= 8) {
    const std::string id = r.tag();
    const std::uint32_t size = r.u32();
    const std::size_t padded = size + (size & 1u);
    if (id == "fmt ") {
      if (size < 16) fail(ErrorKind::kFormat, "fmt chunk too small");
      std::uint16_t format = r.u16();
      channels = r.u16();
      rate = r.u32();
      r.u32();  // byte rate
      r.u16();  // block align
      const std::uint16_t bits = r.u16();
      std::size_t consumed = 16;
      if (format == kFormatExtensible && size >= 40) {
        r.u16();  // cbSize
        r.u16();  // valid bits
        r.u32();  // channel mask
        format = r.u16();  // first two bytes of the subformat GUID
        consumed += 10;
      }
      if (padded < consumed) fail(ErrorKind::kFormat, "bad fmt chunk size");
      r.skip(padded - consumed);
      if (format != kFormatPcm) {
        fail(ErrorKind::kUnsupportedFormat,
             "only integer PCM is supported (format tag " +
                 std::to_string(format) + ")");
      }
      if (bits != 16) {
        fail(ErrorKind::kUnsupportedFormat,
             "only 16-bit samples are supported, got " + std::to_string(bits));
      }
      if (channels < 1 || channels > 2) {
        fail(ErrorKind::kUnsupportedFormat,
             "only mono or stereo is supported, got " +
                 std::to_string(channels) + " channels");
      }
      if (rate == 0) fail(ErrorKind::kFormat, "zero sample rate");
      have_fmt = true;
    } else if (id == "data") {
      if (!have_fmt) fail(ErrorKind::kFormat, "data chunk precedes fmt chunk");
      const std::size_t frame_bytes = 2u * channels;
      if (size % frame_bytes != 0) {
        fail(ErrorKind::kFormat, "data size is not a whole number of frames");
      }
      if (r.remaining() < size) fail(ErrorKind::kFormat, "truncated data chunk");
      const std::size_t n = size / frame_bytes;
      MultiChannelAudio audio;
      audio.sample_rate_hz = static_cast<int>(rate);
      audio.channels.assign(channels, std::vector<double>(n));
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t c = 0; c < channels; ++c) {
          audio.channels[c][i] = r.i16() / kPcm16Scale;
        }
      }
      if (n == 0) fail(ErrorKind::kFormat, "empty data chunk");
      return audio;
    } else {
      if (r.remaining() < padded) fail(ErrorKind::kFormat, "truncated chunk");
      r.skip(padded);
    }
  }
  fail(ErrorKind::kFormat, "no data chunk");
}

inline std::int16_t quantize(double x) {
  const double clamped = std::clamp(x, -1.0, 1.0);
  const double q = std::nearbyint(clamped * kPcm16Scale);
  return static_cast<std::int16_t>(std::clamp(q, -32768.0, 32767.0));
}

inline std::vector<std::uint8_t> encode(const AudioClip& clip) {
  const auto data_bytes = static_cast<std::uint32_t>(clip.samples.size() * 2);
  const auto rate = static_cast<std::uint32_t>(clip.sample_rate_hz);
  io::ByteWriter w;
  w.tag("RIFF");
  w.u32(36 + data_bytes);
  w.tag("WAVE");
  w.tag("fmt ");
  w.u32(16);
  w.u16(kFormatPcm);
  w.u16(1);
  w.u32(rate);
  w.u32(rate * 2);
  w.u16(2);
  w.u16(16);
  w.tag("data");
  w.u32(data_bytes);
  for (double s : clip.samples) w.i16(quantize(s));
  return std::move(w.bytes());
}

}  // namespace wav

inline MultiChannelAudio read_wav_channels(const std::filesystem::path& path) {
  return wav::decode(io::read_file(path));
}

/// Reads a PCM-16 RIFF/WAVE file, scaling samples by 1/32768 and averaging
/// stereo down to mono.
inline AudioClip read_wav(const std::filesystem::path& path) {
  return to_mono(read_wav_channels(path));
}

/// Writes mono PCM-16. Samples are clamped to [-1, 1] and rounded to the
/// nearest step, so a round trip is within 2^-15 per sample.
inline void write_wav(const AudioClip& clip, const std::filesystem::path& path) {
  if (clip.sample_rate_hz <= 0) fail(ErrorKind::kInput, "non-positive rate");
  io::write_file_atomic(path, wav::encode(clip));
}

namespace detail {

inline double kaiser(double n, double half_width, double beta) {
  const double r = n / half_width;
  const double arg = std::max(0.0, 1.0 - r * r);
  return std::cyl_bessel_i(0.0, beta * std::sqrt(arg)) /
         std::cyl_bessel_i(0.0, beta);
}

}  // namespace detail

constexpr double kKaiserBeta = 8.6;
constexpr int kTapsPerFactor = 64;

/// Linear-phase low-pass for decimation by `factor`: Kaiser-windowed sinc with
/// cutoff at the output Nyquist and unity DC gain. Length 64·factor + 1.
inline std::vector<double> decimation_filter(int factor) {
  const int taps = kTapsPerFactor * factor + 1;
  const double center = (taps - 1) / 2.0;
  const double cutoff = 0.5 / factor;  // cycles per source sample
  std::vector<double> h(static_cast<std::size_t>(taps));
  double sum = 0.0;
  for (int n = 0; n < taps; ++n) {
    const double t = n - center;
    const double x = 2.0 * cutoff * t;
    const double sinc =
        t == 0.0 ? 1.0 : std::sin(std::numbers::pi * x) / (std::numbers::pi * x);
    h[n] = 2.0 * cutoff * sinc * detail::kaiser(t, center, kKaiserBeta);
    sum += h[n];
  }
  for (double& v : h) v /= sum;
  return h;
}

/// Integer-factor downsampling: zero-phase anti-alias filter, then keep every
/// `factor`-th sample. Output has ceil(N / factor) samples.
inline AudioClip decimate(const AudioClip& clip, int factor) {
  if (factor < 1) fail(ErrorKind::kUnsupportedRate, "factor must be >= 1");
  if (clip.sample_rate_hz % factor != 0) {
    fail(ErrorKind::kUnsupportedRate,
         std::to_string(clip.sample_rate_hz) + " Hz is not divisible by " +
             std::to_string(factor));
  }
  if (factor == 1) return clip;

  const auto h = decimation_filter(factor);
  const auto center = static_cast<std::ptrdiff_t>(h.size() / 2);
  const auto n_in = static_cast<std::ptrdiff_t>(clip.samples.size());
  const std::ptrdiff_t n_out = (n_in + factor - 1) / factor;

  AudioClip out;
  out.sample_rate_hz = clip.sample_rate_hz / factor;
  out.samples.resize(static_cast<std::size_t>(n_out));
  for (std::ptrdiff_t m = 0; m < n_out; ++m) {
    const std::ptrdiff_t base = m * factor - center;
    const std::ptrdiff_t k_lo = std::max<std::ptrdiff_t>(0, -base);
    const std::ptrdiff_t k_hi =
        std::min<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(h.size()), n_in - base);
    double acc = 0.0;
    for (std::ptrdiff_t k = k_lo; k < k_hi; ++k) {
      acc += h[k] * clip.samples[base + k];
    }
    out.samples[m] = acc;
  }
  return out;
}

}  // namespace fcse
