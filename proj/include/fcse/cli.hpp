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

// Command implementations behind the `fcse` executable. Each command is a
// plain function over an options struct so it can be driven from tests;
// run() adds argument parsing and the exit-code contract
// (0 success, 1 usage error, 2 data or numeric error).

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "fcse/arch.hpp"
#include "fcse/audio_io.hpp"
#include "fcse/dsp.hpp"
#include "fcse/error.hpp"
#include "fcse/evaluate.hpp"
#include "fcse/io_util.hpp"
#include "fcse/metrics.hpp"
#include "fcse/nn.hpp"
#include "fcse/pipeline.hpp"
#include "fcse/synth.hpp"
#include "fcse/train.hpp"

namespace fcse::cli {

namespace fs = std::filesystem;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;

// ---------------------------------------------------------------------------
// mix

struct MixOptions {
  fs::path clean;
  fs::path noise;
  double snr_db = 5.0;
  fs::path out;
  std::optional<std::uint64_t> seed;  // random noise offset when set
};

inline double cmd_mix(const MixOptions& o, std::ostream& out) {
  const AudioClip clean = read_wav(o.clean);
  const AudioClip noise = read_wav(o.noise);
  std::size_t offset = 0;
  if (o.seed) offset = seeded_noise_offset(*o.seed, clean.size(), noise.size());
  const auto mix = mix_at_snr(clean, noise, o.snr_db, offset);
  write_wav(mix.mixture, o.out);
  out << "noise_scale=" << std::setprecision(10) << mix.scale << '\n';
  return mix.scale;
}

// ---------------------------------------------------------------------------
// train

struct TrainOptions {
  fs::path train_manifest;
  fs::path val_manifest;
  fs::path arch;
  fs::path out;
  std::optional<fs::path> log;  // default: <out>.log.csv
  double lr = 1e-3;
  int batch = 64;
  int max_epochs = 200;
  int patience = 20;
  std::uint64_t seed = 0;
  std::optional<double> snr_db;  // overrides both manifests
};

inline fs::path default_log_path(const fs::path& out) {
  fs::path p = out;
  p += ".log.csv";
  return p;
}

inline train::TrainReport cmd_train(const TrainOptions& o, std::ostream& out) {
  const auto arch = arch::load_architecture(o.arch);
  auto train_m = load_manifest(o.train_manifest);
  auto val_m = load_manifest(o.val_manifest);
  if (o.snr_db) train_m.snr_db = val_m.snr_db = *o.snr_db;

  const auto framing = FramingConfig::with_frame(arch.spec.frame_len, arch.sample_rate_hz);
  const NormStats stats = compute_norm_stats(load_clean(train_m));
  const auto train_set = prepare_pairs(train_m, framing, stats);
  const auto val_set = prepare_pairs(val_m, framing, stats);

  const auto model = nn::build_model<float>(arch.spec, o.seed);
  out << "model: " << model.parameter_count() << " parameters, "
      << arch.spec.layers.size() << " layers\n"
      << "data: " << train_set.pairs.noisy.count << " training frames, "
      << val_set.pairs.noisy.count << " validation frames at "
      << metrics::format_db(train_m.snr_db) << " dB\n";

  train::TrainConfig cfg;
  cfg.adam.learning_rate = o.lr;
  cfg.batch_size = o.batch;
  cfg.max_epochs = o.max_epochs;
  cfg.patience = o.patience;
  cfg.shuffle_seed = o.seed;

  std::ostringstream log;
  train::TrainHooks<float> hooks;
  hooks.log = &log;
  // Echo progress as it happens.
  std::size_t echoed = 0;
  hooks.on_epoch_end = [&](int, const nn::Model<float>&) {
    const std::string s = log.str();
    out << s.substr(echoed);
    out.flush();
    echoed = s.size();
  };
  const auto result = train::train(model, train_set.pairs, val_set.pairs, cfg, hooks);
  if (echoed == 0) out << log.str();

  Checkpoint ck;
  ck.model = result.model;
  ck.stats = stats;
  ck.framing = framing;
  ck.train_snr_db = train_m.snr_db;
  ck.seed = o.seed;
  save_checkpoint(ck, o.out);
  io::write_text_atomic(o.log.value_or(default_log_path(o.out)), log.str());

  out << "best_epoch=" << result.report.best_epoch
      << " best_val_mse=" << (result.report.epochs.empty()
                                  ? result.report.initial_val_mse
                                  : result.report.best_val_mse())
      << " stop=" << train::to_string(result.report.stop_reason) << '\n';
  return result.report;
}

// ---------------------------------------------------------------------------
// finetune

struct FinetuneOptions {
  fs::path model;
  fs::path manifest;
  fs::path out;
  int epochs = 5;
  double lr = 1e-3;
  int batch = 64;
  std::uint64_t seed = 0;
  std::optional<double> snr_db;
};

/// Returns (MSE before, MSE after) on the fine-tuning pairs.
inline std::pair<double, double> cmd_finetune(const FinetuneOptions& o,
                                              std::ostream& out) {
  Checkpoint ck = load_checkpoint(o.model);
  auto m = load_manifest(o.manifest);
  if (o.snr_db) m.snr_db = *o.snr_db;
  // The original speaker's normalization is kept.
  const auto set = prepare_pairs(m, ck.framing, ck.stats);

  train::TrainConfig cfg;
  cfg.adam.learning_rate = o.lr;
  cfg.batch_size = o.batch;
  cfg.shuffle_seed = o.seed;
  const double before = train::evaluate_mse(ck.model, set.pairs);
  std::vector<double> losses;
  ck.model = train::finetune(ck.model, set.pairs, o.epochs, cfg, &losses);
  const double after = train::evaluate_mse(ck.model, set.pairs);
  for (std::size_t e = 0; e < losses.size(); ++e) {
    out << "epoch " << e << " train_mse=" << losses[e] << '\n';
  }
  out << "mse_before=" << before << " mse_after=" << after << '\n';
  save_checkpoint(ck, o.out);
  return {before, after};
}

// ---------------------------------------------------------------------------
// denoise

struct DenoiseOptions {
  fs::path model;
  fs::path in;
  fs::path out;
  int decimate_by = 1;
  std::size_t batch = kDenoiseBatchFrames;
};

inline AudioClip cmd_denoise(const DenoiseOptions& o, std::ostream& out) {
  const Checkpoint ck = load_checkpoint(o.model);
  const AudioClip noisy = decimate(read_wav(o.in), o.decimate_by);
  AudioClip clean = denoise(ck, noisy, o.batch);
  write_wav(clean, o.out);
  out << "in_samples=" << noisy.size() << " out_samples=" << clean.size()
      << " trimmed=" << noisy.size() - clean.size() << '\n';
  return clean;
}

// ---------------------------------------------------------------------------
// eval

struct EvalOptions {
  fs::path ref;
  fs::path deg;
  std::vector<std::string> metrics{"snr", "si_sdr", "seg_snr", "mse"};
  std::size_t trim_ref = 0;  // samples dropped from each end of the reference
};

inline const char* kMetricsHeader = "metric,value,ref,est";

inline std::string csv_field(std::string s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s) {
    if (c == '"') q += '"';
    q += c;
  }
  return q + '"';
}

inline void cmd_eval(const EvalOptions& o, std::ostream& out) {
  AudioClip ref = read_wav(o.ref);
  const AudioClip deg = read_wav(o.deg);
  if (o.trim_ref > 0) {
    if (2 * o.trim_ref >= ref.size()) fail(ErrorKind::kTooShort, "trim exceeds reference");
    ref.samples = std::vector<double>(
        ref.samples.begin() + static_cast<std::ptrdiff_t>(o.trim_ref),
        ref.samples.end() - static_cast<std::ptrdiff_t>(o.trim_ref));
  }
  std::vector<std::pair<std::string, std::string>> rows;
  for (const auto& name : o.metrics) {
    if (name == "snr") {
      rows.emplace_back("snr_db", metrics::format_db(metrics::snr_db(ref, deg)));
    } else if (name == "si_sdr") {
      rows.emplace_back("si_sdr_db", metrics::format_db(metrics::si_sdr_db(ref, deg)));
    } else if (name == "seg_snr") {
      rows.emplace_back("seg_snr_db",
                        metrics::format_db(metrics::segmental_snr_db(
                            ref, deg, scoring_framing(ref.sample_rate_hz))));
    } else if (name == "mse") {
      std::ostringstream v;
      v << std::setprecision(10) << metrics::mse(ref, deg);
      rows.emplace_back("mse", v.str());
    } else {
      fail(ErrorKind::kInput, "unknown metric '" + name + "'");
    }
  }
  out << kMetricsHeader << '\n';
  for (const auto& [k, v] : rows) {
    out << k << ',' << v << ',' << csv_field(o.ref.string()) << ','
        << csv_field(o.deg.string()) << '\n';
  }
}

// ---------------------------------------------------------------------------
// eval-matrix

struct EvalMatrixOptions {
  std::vector<fs::path> models;
  fs::path test_clean;
  fs::path test_noise;
  std::vector<double> test_snrs{-5.0, 0.0, 5.0};
  fs::path out_csv;
  std::optional<std::uint64_t> seed;
};

inline const char* kMatrixHeader =
    "model,train_snr_db,test_snr_db,input_snr_db,output_snr_db,"
    "snr_improvement_db,input_si_sdr_db,output_si_sdr_db,"
    "input_seg_snr_db,output_seg_snr_db";

inline std::vector<DenoisingScore> cmd_eval_matrix(const EvalMatrixOptions& o,
                                               std::ostream& out) {
  if (o.models.empty()) fail(ErrorKind::kInput, "no models given");
  const AudioClip clean = read_wav(o.test_clean);
  const AudioClip noise = read_wav(o.test_noise);
  std::size_t offset = 0;
  if (o.seed) offset = seeded_noise_offset(*o.seed, clean.size(), noise.size());
  std::ostringstream csv;
  csv << kMatrixHeader << '\n';
  std::vector<DenoisingScore> cells;
  for (const auto& path : o.models) {
    const Checkpoint ck = load_checkpoint(path);
    for (double snr : o.test_snrs) {
      DenoisingScore c =
          score_denoising(ck.model, ck.stats, ck.framing, clean, noise, snr, offset);
      c.train_snr_db = ck.train_snr_db;
      csv << csv_field(path.string()) << ',' << metrics::format_db(c.train_snr_db) << ','
          << metrics::format_db(c.test_snr_db) << ',' << metrics::format_db(c.input_snr_db)
          << ',' << metrics::format_db(c.output_snr_db) << ','
          << metrics::format_db(c.output_snr_db - c.input_snr_db) << ','
          << metrics::format_db(c.input_si_sdr_db) << ','
          << metrics::format_db(c.output_si_sdr_db) << ','
          << metrics::format_db(c.input_seg_snr_db) << ','
          << metrics::format_db(c.output_seg_snr_db) << '\n';
      cells.push_back(c);
    }
  }
  io::write_text_atomic(o.out_csv, csv.str());
  out << csv.str();
  return cells;
}

// ---------------------------------------------------------------------------
// sweep

struct SweepOptions {
  fs::path grid;
  fs::path train_manifest;
  fs::path val_manifest;
  fs::path out_csv;
  double lr = 1e-3;
  int batch = 64;
  std::uint64_t seed = 0;
};

inline const char* kSweepHeader =
    "arch_id,depth,filters,kernel_ms,activation,param_count,train_mse,val_mse,"
    "best_epoch,status";

struct SweepRow {
  arch::GridCell cell;
  std::size_t param_count = 0;
  double train_mse = std::numeric_limits<double>::quiet_NaN();
  double val_mse = std::numeric_limits<double>::quiet_NaN();
  int best_epoch = -1;
  std::string status = "ok";
};

/// Trains every grid cell under the grid's shared budget. Cells that fail are
/// reported with status `failed: ...` and the sweep moves on.
inline std::vector<SweepRow> cmd_sweep(const SweepOptions& o, std::ostream& out) {
  const arch::Grid grid = arch::load_grid(o.grid);
  std::ostringstream csv;
  csv << "# budget max_epochs=" << grid.max_epochs << " patience=" << grid.patience
      << " lr=" << o.lr << " batch=" << o.batch << " seed=" << o.seed << '\n'
      << kSweepHeader << '\n';
  std::vector<SweepRow> rows;
  if (!grid.cells.empty()) {
    const auto train_m = load_manifest(o.train_manifest);
    const auto val_m = load_manifest(o.val_manifest);
    const auto framing = FramingConfig::with_frame(grid.frame_len, grid.sample_rate_hz);
    const NormStats stats = compute_norm_stats(load_clean(train_m));
    const auto train_set = prepare_pairs(train_m, framing, stats);
    const auto val_set = prepare_pairs(val_m, framing, stats);

    train::TrainConfig cfg;
    cfg.adam.learning_rate = o.lr;
    cfg.batch_size = o.batch;
    cfg.max_epochs = grid.max_epochs;
    cfg.patience = grid.patience;
    cfg.shuffle_seed = o.seed;

    for (const auto& cell : grid.cells) {
      SweepRow row;
      row.cell = cell;
      try {
        const auto spec = arch::cell_spec(grid, cell);
        row.param_count = nn::param_count(spec);
        const auto model = nn::build_model<float>(spec, o.seed);
        const auto result = train::train(model, train_set.pairs, val_set.pairs, cfg);
        row.train_mse = train::evaluate_mse(result.model, train_set.pairs);
        row.val_mse = train::evaluate_mse(result.model, val_set.pairs);
        row.best_epoch = result.report.best_epoch;
      } catch (const std::exception& e) {
        row.status = std::string("failed: ") + e.what();
      }
      out << cell.id << ": params=" << row.param_count << " train_mse=" << row.train_mse
          << " val_mse=" << row.val_mse << " " << row.status << '\n';
      rows.push_back(std::move(row));
    }
  }
  for (const auto& r : rows) {
    csv << r.cell.id << ',' << r.cell.depth << ',' << r.cell.filters << ','
        << arch::format_number(r.cell.kernel_ms) << ',' << arch::to_string(r.cell.activation)
        << ',' << r.param_count << ',' << std::setprecision(8) << r.train_mse << ','
        << r.val_mse << ',' << r.best_epoch << ',' << csv_field(r.status) << '\n';
  }
  io::write_text_atomic(o.out_csv, csv.str());
  return rows;
}

// ---------------------------------------------------------------------------
// synth

struct SynthOptions {
  std::string kind = "speech";
  double seconds = 10.0;
  int rate = 16000;
  double f0_hz = 150.0;
  int harmonics = 4;
  int talkers = 6;
  double rms = 0.1;
  std::uint64_t seed = 0;
  fs::path out;
};

inline void cmd_synth(const SynthOptions& o, std::ostream& out) {
  AudioClip clip;
  if (o.kind == "speech") {
    synth::SpeechParams p;
    p.f0_hz = o.f0_hz;
    p.harmonics = o.harmonics;
    p.rms = o.rms;
    clip = synth::speech(o.seconds, o.rate, p, o.seed);
  } else if (o.kind == "babble") {
    synth::BabbleParams p;
    p.talkers = o.talkers;
    p.rms = o.rms;
    clip = synth::babble(o.seconds, o.rate, p, o.seed);
  } else {
    fail(ErrorKind::kInput, "kind must be speech or babble");
  }
  write_wav(clip, o.out);
  out << "wrote " << clip.size() << " samples at " << clip.sample_rate_hz << " Hz\n";
}

// ---------------------------------------------------------------------------
// argument parsing

/// Parses argv and dispatches. Never throws; returns the process exit code.
inline int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Fully convolutional raw-waveform speech enhancement"};
  app.name("fcse");
  app.require_subcommand(1);

  MixOptions mix;
  std::uint64_t mix_seed = 0;
  auto* c_mix = app.add_subcommand("mix", "Mix clean speech with noise at a target SNR");
  c_mix->add_option("--clean", mix.clean, "Clean speech WAV")->required();
  c_mix->add_option("--noise", mix.noise, "Noise WAV (at least as long as clean)")->required();
  c_mix->add_option("--snr-db", mix.snr_db, "Target SNR in dB")->required();
  c_mix->add_option("--out", mix.out, "Output mixture WAV")->required();
  auto* mix_seed_opt =
      c_mix->add_option("--seed", mix_seed, "Seed for a random noise start offset");

  TrainOptions tr;
  double tr_snr = 0.0;
  auto* c_train = app.add_subcommand("train", "Train a model with early stopping");
  c_train->add_option("--train-manifest", tr.train_manifest)->required();
  c_train->add_option("--val-manifest", tr.val_manifest)->required();
  c_train->add_option("--arch", tr.arch, "Architecture file")->required();
  c_train->add_option("--out", tr.out, "Output checkpoint")->required();
  std::string tr_log;
  auto* tr_log_opt = c_train->add_option("--log", tr_log, "CSV training log path");
  c_train->add_option("--lr", tr.lr)->capture_default_str();
  c_train->add_option("--batch", tr.batch)->capture_default_str();
  c_train->add_option("--max-epochs", tr.max_epochs)->capture_default_str();
  c_train->add_option("--patience", tr.patience)->capture_default_str();
  c_train->add_option("--seed", tr.seed)->capture_default_str();
  auto* tr_snr_opt =
      c_train->add_option("--snr-db", tr_snr, "Override the manifests' mixing SNR");

  FinetuneOptions ft;
  double ft_snr = 0.0;
  auto* c_ft = app.add_subcommand("finetune", "Fine-tune a trained model for a fixed epoch count");
  c_ft->add_option("--model", ft.model)->required();
  c_ft->add_option("--manifest", ft.manifest)->required();
  c_ft->add_option("--out", ft.out)->required();
  c_ft->add_option("--epochs", ft.epochs)->capture_default_str();
  c_ft->add_option("--lr", ft.lr)->capture_default_str();
  c_ft->add_option("--batch", ft.batch)->capture_default_str();
  c_ft->add_option("--seed", ft.seed)->capture_default_str();
  auto* ft_snr_opt = c_ft->add_option("--snr-db", ft_snr);

  DenoiseOptions dn;
  auto* c_dn = app.add_subcommand("denoise", "Enhance a noisy WAV file");
  c_dn->add_option("--model", dn.model)->required();
  c_dn->add_option("--in", dn.in)->required();
  c_dn->add_option("--out", dn.out)->required();
  c_dn->add_option("--decimate", dn.decimate_by, "Integer downsampling factor for the input")
      ->capture_default_str();
  c_dn->add_option("--batch", dn.batch, "Frames per forward pass")->capture_default_str();

  EvalOptions ev;
  std::string ev_metrics = "snr,si_sdr,seg_snr,mse";
  auto* c_ev = app.add_subcommand("eval", "Score an estimate against a reference");
  c_ev->add_option("--ref", ev.ref)->required();
  c_ev->add_option("--deg", ev.deg)->required();
  c_ev->add_option("--metrics", ev_metrics, "Comma list of snr, si_sdr, seg_snr, mse")
      ->capture_default_str();
  c_ev->add_option("--trim-ref", ev.trim_ref, "Samples to drop from each end of the reference")
      ->capture_default_str();

  EvalMatrixOptions em;
  std::string em_models, em_snrs = "-5,0,5";
  std::uint64_t em_seed = 0;
  auto* c_em = app.add_subcommand("eval-matrix", "Cross-SNR evaluation of trained models");
  c_em->add_option("--models", em_models, "Comma list of checkpoints")->required();
  c_em->add_option("--test-clean", em.test_clean)->required();
  c_em->add_option("--test-noise", em.test_noise)->required();
  c_em->add_option("--test-snrs", em_snrs)->capture_default_str();
  c_em->add_option("--out-csv", em.out_csv)->required();
  auto* em_seed_opt = c_em->add_option("--seed", em_seed, "Seed for a random noise offset");

  SweepOptions sw;
  auto* c_sw = app.add_subcommand("sweep", "Train a grid of architectures");
  c_sw->add_option("--grid", sw.grid)->required();
  c_sw->add_option("--train-manifest", sw.train_manifest)->required();
  c_sw->add_option("--val-manifest", sw.val_manifest)->required();
  c_sw->add_option("--out-csv", sw.out_csv)->required();
  c_sw->add_option("--lr", sw.lr)->capture_default_str();
  c_sw->add_option("--batch", sw.batch)->capture_default_str();
  c_sw->add_option("--seed", sw.seed)->capture_default_str();

  SynthOptions sy;
  auto* c_sy = app.add_subcommand("synth", "Generate synthetic speech or babble");
  c_sy->add_option("--kind", sy.kind, "speech or babble")->capture_default_str();
  c_sy->add_option("--seconds", sy.seconds)->capture_default_str();
  c_sy->add_option("--rate", sy.rate)->capture_default_str();
  c_sy->add_option("--f0", sy.f0_hz)->capture_default_str();
  c_sy->add_option("--harmonics", sy.harmonics)->capture_default_str();
  c_sy->add_option("--talkers", sy.talkers)->capture_default_str();
  c_sy->add_option("--rms", sy.rms)->capture_default_str();
  c_sy->add_option("--seed", sy.seed)->capture_default_str();
  c_sy->add_option("--out", sy.out)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (c_mix->parsed()) {
      if (*mix_seed_opt) mix.seed = mix_seed;
      cmd_mix(mix, out);
    } else if (c_train->parsed()) {
      if (*tr_log_opt) tr.log = tr_log;
      if (*tr_snr_opt) tr.snr_db = tr_snr;
      cmd_train(tr, out);
    } else if (c_ft->parsed()) {
      if (*ft_snr_opt) ft.snr_db = ft_snr;
      cmd_finetune(ft, out);
    } else if (c_dn->parsed()) {
      cmd_denoise(dn, out);
    } else if (c_ev->parsed()) {
      ev.metrics = text::split(ev_metrics, ',');
      cmd_eval(ev, out);
    } else if (c_em->parsed()) {
      for (const auto& p : text::split(em_models, ',')) em.models.emplace_back(p);
      em.test_snrs.clear();
      for (const auto& s : text::split(em_snrs, ',')) {
        em.test_snrs.push_back(text::parse_double(s, "--test-snrs"));
      }
      if (*em_seed_opt) em.seed = em_seed;
      cmd_eval_matrix(em, out);
    } else if (c_sw->parsed()) {
      cmd_sweep(sw, out);
    } else if (c_sy->parsed()) {
      cmd_synth(sy, out);
    }
  } catch (const Error& e) {
    err << "fcse: " << e.what() << '\n';
    return kExitData;
  } catch (const std::exception& e) {
    err << "fcse: " << e.what() << '\n';
    return kExitData;
  }
  return kExitOk;
}

}  // namespace fcse::cli
