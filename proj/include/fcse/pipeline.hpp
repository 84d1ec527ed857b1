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

// End-to-end glue: dataset manifests, frame-pair preparation, the checkpoint
// container, and arbitrary-length denoising.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "fcse/audio_io.hpp"
#include "fcse/dsp.hpp"
#include "fcse/error.hpp"
#include "fcse/io_util.hpp"
#include "fcse/nn.hpp"

namespace fcse {

// ---------------------------------------------------------------------------
// Plain-text key/value files

namespace text {

inline std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

inline std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = s.find(sep, start);
    auto item = trim(s.substr(start, pos == std::string_view::npos ? pos : pos - start));
    if (!item.empty()) out.push_back(std::move(item));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

struct KeyValue {
  std::string key;
  std::string value;
  int line = 0;
};

/// `key = value` per line; `#` starts a comment; blank lines ignored.
inline std::vector<KeyValue> parse_key_values(std::string_view body,
                                              const std::string& origin) {
  std::vector<KeyValue> out;
  int line_no = 0;
  std::istringstream in{std::string(body)};
  std::string line;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const auto content = trim(line);
    if (content.empty()) continue;
    const auto eq = content.find('=');
    if (eq == std::string::npos) {
      fail(ErrorKind::kFormat, origin + ":" + std::to_string(line_no) +
                                   ": expected `key = value`");
    }
    out.push_back({trim(content.substr(0, eq)), trim(content.substr(eq + 1)), line_no});
  }
  return out;
}

inline double parse_double(const std::string& s, const std::string& what) {
  if (s == "inf" || s == "+inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != s.size()) {
    fail(ErrorKind::kFormat, what + ": not a number: '" + s + "'");
  }
  return v;
}

inline long long parse_int(const std::string& s, const std::string& what) {
  std::size_t used = 0;
  long long v = 0;
  try {
    v = std::stoll(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != s.size()) {
    fail(ErrorKind::kFormat, what + ": not an integer: '" + s + "'");
  }
  return v;
}

inline std::string read_text(const std::filesystem::path& path) {
  const auto bytes = io::read_file(path);
  return std::string(bytes.begin(), bytes.end());
}

}  // namespace text

// ---------------------------------------------------------------------------
// Dataset manifests

enum class DatasetRole { kTrain, kVal, kTest };

struct DatasetManifest {
  std::vector<std::filesystem::path> clean;  // concatenated in order
  std::vector<std::filesystem::path> noise;  // concatenated in order
  double snr_db = 5.0;
  DatasetRole role = DatasetRole::kTrain;
  std::optional<std::uint64_t> noise_offset_seed;
  int clean_decimate = 1;
  int noise_decimate = 1;
};

/// Keys: clean, noise (repeatable or comma-separated), snr_db (number or
/// `inf` for a noise-free set), role (train|val|test), noise_offset_seed,
/// clean_decimate, noise_decimate. Relative paths resolve against `base_dir`.
inline DatasetManifest parse_manifest(std::string_view body,
                                      const std::filesystem::path& base_dir,
                                      const std::string& origin = "manifest") {
  DatasetManifest m;
  bool have_snr = false;
  auto resolve = [&](const std::string& p) {
    std::filesystem::path path(p);
    return path.is_absolute() ? path : base_dir / path;
  };
  for (const auto& kv : text::parse_key_values(body, origin)) {
    const std::string where = origin + ":" + std::to_string(kv.line);
    if (kv.key == "clean") {
      for (const auto& p : text::split(kv.value, ',')) m.clean.push_back(resolve(p));
    } else if (kv.key == "noise") {
      for (const auto& p : text::split(kv.value, ',')) m.noise.push_back(resolve(p));
    } else if (kv.key == "snr_db") {
      m.snr_db = text::parse_double(kv.value, where);
      have_snr = true;
    } else if (kv.key == "role") {
      if (kv.value == "train") m.role = DatasetRole::kTrain;
      else if (kv.value == "val") m.role = DatasetRole::kVal;
      else if (kv.value == "test") m.role = DatasetRole::kTest;
      else fail(ErrorKind::kFormat, where + ": role must be train, val or test");
    } else if (kv.key == "noise_offset_seed") {
      m.noise_offset_seed = static_cast<std::uint64_t>(text::parse_int(kv.value, where));
    } else if (kv.key == "clean_decimate") {
      m.clean_decimate = static_cast<int>(text::parse_int(kv.value, where));
    } else if (kv.key == "noise_decimate") {
      m.noise_decimate = static_cast<int>(text::parse_int(kv.value, where));
    } else {
      fail(ErrorKind::kFormat, where + ": unknown key '" + kv.key + "'");
    }
  }
  if (!have_snr) fail(ErrorKind::kFormat, origin + ": snr_db is required");
  if (std::isnan(m.snr_db) || m.snr_db == -std::numeric_limits<double>::infinity()) {
    fail(ErrorKind::kFormat, origin + ": snr_db must be finite or inf");
  }
  if (m.clean.empty()) fail(ErrorKind::kFormat, origin + ": no clean files");
  if (m.noise.empty() && !std::isinf(m.snr_db)) {
    fail(ErrorKind::kFormat, origin + ": no noise files");
  }
  for (const auto& p : m.clean) {
    if (!std::filesystem::exists(p)) fail(ErrorKind::kIo, "missing file " + p.string());
  }
  for (const auto& p : m.noise) {
    if (!std::filesystem::exists(p)) fail(ErrorKind::kIo, "missing file " + p.string());
  }
  return m;
}

inline DatasetManifest load_manifest(const std::filesystem::path& path) {
  return parse_manifest(text::read_text(path), path.parent_path(), path.string());
}

namespace detail {

inline AudioClip load_concatenated(const std::vector<std::filesystem::path>& paths,
                                   int factor) {
  AudioClip out;
  bool first = true;
  for (const auto& p : paths) {
    AudioClip c = decimate(read_wav(p), factor);
    if (first) {
      out.sample_rate_hz = c.sample_rate_hz;
      first = false;
    } else if (c.sample_rate_hz != out.sample_rate_hz) {
      fail(ErrorKind::kRate, p.string() + " has a different sample rate");
    }
    out.samples.insert(out.samples.end(), c.samples.begin(), c.samples.end());
  }
  return out;
}

}  // namespace detail

inline AudioClip load_clean(const DatasetManifest& m) {
  return detail::load_concatenated(m.clean, m.clean_decimate);
}

inline AudioClip load_noise(const DatasetManifest& m) {
  return detail::load_concatenated(m.noise, m.noise_decimate);
}

struct PreparedPairs {
  FramePairs pairs;
  AudioClip clean;
  AudioClip mixture;
  double noise_scale = 0.0;
};

/// Mixes at `snr_db` and frames mixture and clean target identically.
inline PreparedPairs prepare_pairs(const AudioClip& clean, const AudioClip& noise,
                                   double snr_db, const FramingConfig& cfg,
                                   const NormStats& stats, std::size_t noise_offset = 0) {
  PreparedPairs out;
  out.clean = clean;
  if (std::isinf(snr_db) && snr_db > 0 && noise.samples.empty()) {
    out.mixture = clean;
  } else {
    auto mix = mix_at_snr(clean, noise, snr_db, noise_offset);
    out.mixture = std::move(mix.mixture);
    out.noise_scale = mix.scale;
  }
  out.pairs.noisy = frame_signal(out.mixture, cfg, stats);
  out.pairs.clean = frame_signal(clean, cfg, stats);
  return out;
}

inline PreparedPairs prepare_pairs(const DatasetManifest& m, const FramingConfig& cfg,
                                   const NormStats& stats) {
  const AudioClip clean = load_clean(m);
  AudioClip noise;
  noise.sample_rate_hz = clean.sample_rate_hz;
  if (!m.noise.empty()) noise = load_noise(m);
  std::size_t offset = 0;
  if (m.noise_offset_seed) {
    offset = seeded_noise_offset(*m.noise_offset_seed, clean.samples.size(),
                                 noise.samples.size());
  }
  if (std::isinf(m.snr_db)) noise.samples.clear();
  return prepare_pairs(clean, noise, m.snr_db, cfg, stats, offset);
}

// ---------------------------------------------------------------------------
// Checkpoints

struct Checkpoint {
  static constexpr std::uint32_t kVersion = 1;

  nn::Model<float> model;
  NormStats stats;
  FramingConfig framing;
  double train_snr_db = std::numeric_limits<double>::quiet_NaN();
  std::uint64_t seed = 0;
};

inline std::uint64_t fnv1a64(const std::uint8_t* data, std::size_t n) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (std::size_t i = 0; i < n; ++i) {
    h ^= data[i];
    h *= 0x100000001b3ull;
  }
  return h;
}

/// Layout (little-endian): "FCSE", u32 version, u32 frame_len, u32 layer
/// count, per layer u32 {kind, in_channels, channels, kernel_len}, f64 BN eps,
/// f64 BN momentum, u32 {framing frame_len, hop, rate}, f64 {mean, std,
/// training SNR}, u64 seed, u64 parameter count, f32 parameters in
/// Model::buffers() order, then u64 FNV-1a of everything before it.
inline std::vector<std::uint8_t> serialize(const Checkpoint& ck) {
  ck.model.spec.validate();
  io::ByteWriter w;
  w.tag("FCSE");
  w.u32(Checkpoint::kVersion);
  const auto& spec = ck.model.spec;
  w.u32(static_cast<std::uint32_t>(spec.frame_len));
  w.u32(static_cast<std::uint32_t>(spec.layers.size()));
  for (const auto& l : spec.layers) {
    w.u32(static_cast<std::uint32_t>(l.kind));
    w.u32(static_cast<std::uint32_t>(l.in_channels));
    w.u32(static_cast<std::uint32_t>(l.channels));
    w.u32(static_cast<std::uint32_t>(l.kernel_len));
  }
  w.f64(ck.model.bn.eps);
  w.f64(ck.model.bn.momentum);
  w.u32(static_cast<std::uint32_t>(ck.framing.frame_len));
  w.u32(static_cast<std::uint32_t>(ck.framing.hop));
  w.u32(static_cast<std::uint32_t>(ck.framing.sample_rate_hz));
  w.f64(ck.stats.mean);
  w.f64(ck.stats.std);
  w.f64(ck.train_snr_db);
  w.u64(ck.seed);
  w.u64(ck.model.parameter_count());
  for (auto buf : ck.model.buffers()) {
    for (float v : buf) w.f32(v);
  }
  const auto& b = w.bytes();
  w.u64(fnv1a64(b.data(), b.size()));
  return std::move(w.bytes());
}

inline Checkpoint deserialize(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 16) fail(ErrorKind::kCheckpoint, "file too small");
  const std::size_t body = bytes.size() - 8;
  std::uint64_t stored = 0;
  for (int i = 0; i < 8; ++i) {
    stored |= static_cast<std::uint64_t>(bytes[body + i]) << (8 * i);
  }
  io::ByteReader r(bytes, ErrorKind::kCheckpoint);
  if (r.tag() != "FCSE") fail(ErrorKind::kCheckpoint, "bad magic");
  const std::uint32_t version = r.u32();
  if (version != Checkpoint::kVersion) {
    fail(ErrorKind::kCheckpoint, "unsupported version " + std::to_string(version));
  }
  if (fnv1a64(bytes.data(), body) != stored) {
    fail(ErrorKind::kCheckpoint, "integrity hash mismatch");
  }

  Checkpoint ck;
  nn::ModelSpec spec;
  spec.frame_len = static_cast<int>(r.u32());
  const std::uint32_t n_layers = r.u32();
  if (n_layers > 1u << 16) fail(ErrorKind::kCheckpoint, "implausible layer count");
  for (std::uint32_t i = 0; i < n_layers; ++i) {
    nn::LayerSpec l;
    const std::uint32_t kind = r.u32();
    if (kind > static_cast<std::uint32_t>(nn::LayerKind::kRelu)) {
      fail(ErrorKind::kCheckpoint, "unknown layer kind " + std::to_string(kind));
    }
    l.kind = static_cast<nn::LayerKind>(kind);
    l.in_channels = static_cast<int>(r.u32());
    l.channels = static_cast<int>(r.u32());
    l.kernel_len = static_cast<int>(r.u32());
    spec.layers.push_back(l);
  }
  try {
    spec.validate();
  } catch (const Error& e) {
    fail(ErrorKind::kCheckpoint, e.what());
  }
  nn::BatchNormOptions bn;
  bn.eps = r.f64();
  bn.momentum = r.f64();
  ck.framing.frame_len = static_cast<int>(r.u32());
  ck.framing.hop = static_cast<int>(r.u32());
  ck.framing.sample_rate_hz = static_cast<int>(r.u32());
  ck.stats.mean = r.f64();
  ck.stats.std = r.f64();
  ck.train_snr_db = r.f64();
  ck.seed = r.u64();
  const std::uint64_t count = r.u64();
  if (count != nn::param_count(spec)) {
    fail(ErrorKind::kCheckpoint, "parameter count does not match layer list");
  }
  ck.model = nn::build_model<float>(spec, 0, bn);
  for (auto buf : ck.model.buffers()) {
    for (float& v : buf) v = r.f32();
  }
  if (r.pos() != body) fail(ErrorKind::kCheckpoint, "trailing bytes after payload");
  try {
    ck.framing.validate();
    ck.stats.validate();
  } catch (const Error& e) {
    fail(ErrorKind::kCheckpoint, e.what());
  }
  if (ck.framing.frame_len != spec.frame_len) {
    fail(ErrorKind::kCheckpoint, "framing and model frame lengths differ");
  }
  return ck;
}

inline void save_checkpoint(const Checkpoint& ck, const std::filesystem::path& path) {
  io::write_file_atomic(path, serialize(ck));
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
  return deserialize(io::read_file(path));
}

// ---------------------------------------------------------------------------
// Inference

constexpr std::size_t kDenoiseBatchFrames = 128;

/// Frames, filters and overlap-adds an arbitrary-length clip. The result
/// covers input samples [hop, N − hop), so it is 2·hop shorter than the input.
template <typename T>
AudioClip denoise(const nn::Model<T>& model, const NormStats& stats,
                  const FramingConfig& cfg, const AudioClip& noisy,
                  std::size_t batch_frames = kDenoiseBatchFrames) {
  cfg.validate();
  if (noisy.sample_rate_hz != cfg.sample_rate_hz) {
    fail(ErrorKind::kRate, "input is " + std::to_string(noisy.sample_rate_hz) +
                               " Hz, model expects " +
                               std::to_string(cfg.sample_rate_hz) + " Hz");
  }
  if (noisy.samples.size() < static_cast<std::size_t>(cfg.frame_len)) {
    fail(ErrorKind::kTooShort, "input shorter than one frame");
  }
  if (model.spec.frame_len != cfg.frame_len) {
    fail(ErrorKind::kInconsistency, "model and framing frame lengths differ");
  }
  if (batch_frames == 0) batch_frames = 1;
  FrameBatch frames = frame_signal_padded(noisy, cfg, stats);
  const std::size_t fl = frames.frame_len();
  for (std::size_t lo = 0; lo < frames.count; lo += batch_frames) {
    const std::size_t hi = std::min(frames.count, lo + batch_frames);
    const auto begin = frames.frames.begin() + static_cast<std::ptrdiff_t>(lo * fl);
    const auto end = frames.frames.begin() + static_cast<std::ptrdiff_t>(hi * fl);
    const auto out = nn::infer(model, nn::frames_tensor(std::vector<T>(begin, end), fl));
    std::copy(out.data.begin(), out.data.end(), begin);
  }
  AudioClip full = overlap_add_full(frames, stats);
  const auto hop = static_cast<std::size_t>(cfg.hop);
  const std::size_t n = noisy.samples.size();
  AudioClip out;
  out.sample_rate_hz = noisy.sample_rate_hz;
  if (n > 2 * hop) {
    out.samples.assign(full.samples.begin() + static_cast<std::ptrdiff_t>(hop),
                       full.samples.begin() + static_cast<std::ptrdiff_t>(n - hop));
  }
  return out;
}

inline AudioClip denoise(const Checkpoint& ck, const AudioClip& noisy,
                         std::size_t batch_frames = kDenoiseBatchFrames) {
  return denoise(ck.model, ck.stats, ck.framing, noisy, batch_frames);
}

}  // namespace fcse
