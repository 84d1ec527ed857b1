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

// Text formats describing networks.
//
// Architecture file, one directive per line (`#` comments):
//   sample_rate <hz>                      optional, default 16000
//   frame_len <samples>                   optional, default 320
//   conv <filters> <kernel_ms> [prelu|relu]   hidden block: conv, BN, activation
//   output <kernel_ms>                    final single-filter conv, required last
//
// Sweep grid file, `key = comma list` per line:
//   depths, filters, kernel_ms, activation, output_kernel_ms,
//   sample_rate, frame_len, max_epochs, patience

#include <sstream>
#include <string>
#include <vector>

#include "fcse/error.hpp"
#include "fcse/nn.hpp"
#include "fcse/pipeline.hpp"

namespace fcse::arch {

struct Architecture {
  nn::ModelSpec spec;
  int sample_rate_hz = 16000;
};

inline nn::Activation parse_activation(const std::string& s, const std::string& where) {
  if (s == "prelu") return nn::Activation::kPRelu;
  if (s == "relu") return nn::Activation::kRelu;
  fail(ErrorKind::kFormat, where + ": activation must be prelu or relu, got '" + s + "'");
}

inline std::string to_string(nn::Activation a) {
  return a == nn::Activation::kPRelu ? "prelu" : "relu";
}

inline Architecture parse_architecture(std::string_view body,
                                       const std::string& origin = "arch") {
  struct Hidden {
    int filters;
    double kernel_ms;
    nn::Activation act;
  };
  Architecture a;
  int frame_len = 320;
  std::vector<Hidden> hidden;
  std::optional<double> output_ms;

  std::istringstream in{std::string(body)};
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream words(line);
    std::vector<std::string> tok;
    for (std::string w; words >> w;) tok.push_back(w);
    if (tok.empty()) continue;
    const std::string where = origin + ":" + std::to_string(line_no);
    if (output_ms) fail(ErrorKind::kFormat, where + ": nothing may follow `output`");
    if (tok[0] == "sample_rate" && tok.size() == 2) {
      a.sample_rate_hz = static_cast<int>(text::parse_int(tok[1], where));
    } else if (tok[0] == "frame_len" && tok.size() == 2) {
      frame_len = static_cast<int>(text::parse_int(tok[1], where));
    } else if (tok[0] == "conv" && (tok.size() == 3 || tok.size() == 4)) {
      hidden.push_back({static_cast<int>(text::parse_int(tok[1], where)),
                        text::parse_double(tok[2], where),
                        tok.size() == 4 ? parse_activation(tok[3], where)
                                        : nn::Activation::kPRelu});
    } else if (tok[0] == "output" && tok.size() == 2) {
      output_ms = text::parse_double(tok[1], where);
    } else {
      fail(ErrorKind::kFormat, where + ": unrecognized directive '" + tok[0] + "'");
    }
  }
  if (!output_ms) fail(ErrorKind::kFormat, origin + ": missing `output` line");
  if (a.sample_rate_hz <= 0) fail(ErrorKind::kFormat, origin + ": bad sample_rate");

  a.spec.frame_len = frame_len;
  int ch = 1;
  for (const auto& h : hidden) {
    const int k = nn::kernel_len_from_ms(h.kernel_ms, a.sample_rate_hz);
    a.spec.layers.push_back(nn::LayerSpec::conv(ch, h.filters, k));
    a.spec.layers.push_back(nn::LayerSpec::batchnorm(h.filters));
    a.spec.layers.push_back(h.act == nn::Activation::kPRelu ? nn::LayerSpec::prelu(h.filters)
                                                            : nn::LayerSpec::relu(h.filters));
    ch = h.filters;
  }
  a.spec.layers.push_back(
      nn::LayerSpec::conv(ch, 1, nn::kernel_len_from_ms(*output_ms, a.sample_rate_hz)));
  a.spec.validate();
  return a;
}

inline Architecture load_architecture(const std::filesystem::path& path) {
  return parse_architecture(text::read_text(path), path.string());
}

/// Architecture file for the 12-25-50-100-200 network with 5 ms kernels.
inline constexpr std::string_view kModel53 =
    "# 20 ms frames at 16 kHz, 5 ms kernels\n"
    "sample_rate 16000\n"
    "frame_len 320\n"
    "conv 12 5 prelu\n"
    "conv 25 5 prelu\n"
    "conv 50 5 prelu\n"
    "conv 100 5 prelu\n"
    "conv 200 5 prelu\n"
    "output 5\n";

struct GridCell {
  std::string id;
  int depth = 1;
  int filters = 1;
  double kernel_ms = 5.0;
  double output_kernel_ms = 5.0;
  nn::Activation activation = nn::Activation::kPRelu;
};

struct Grid {
  int sample_rate_hz = 16000;
  int frame_len = 320;
  int max_epochs = 30;
  int patience = 5;
  std::vector<GridCell> cells;  // depth-major, then filters, kernel, activation
};

inline std::string format_number(double v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

inline Grid parse_grid(std::string_view body, const std::string& origin = "grid") {
  Grid g;
  std::vector<int> depths, filters;
  std::vector<double> kernels{5.0};
  std::vector<nn::Activation> acts{nn::Activation::kPRelu};
  std::optional<double> output_ms;
  for (const auto& kv : text::parse_key_values(body, origin)) {
    const std::string where = origin + ":" + std::to_string(kv.line);
    const auto items = text::split(kv.value, ',');
    auto one = [&]() -> const std::string& {
      if (items.size() != 1) fail(ErrorKind::kFormat, where + ": expected one value");
      return items[0];
    };
    if (kv.key == "depths") {
      for (const auto& s : items) depths.push_back(static_cast<int>(text::parse_int(s, where)));
    } else if (kv.key == "filters") {
      for (const auto& s : items) filters.push_back(static_cast<int>(text::parse_int(s, where)));
    } else if (kv.key == "kernel_ms") {
      kernels.clear();
      for (const auto& s : items) kernels.push_back(text::parse_double(s, where));
    } else if (kv.key == "activation") {
      acts.clear();
      for (const auto& s : items) acts.push_back(parse_activation(s, where));
    } else if (kv.key == "output_kernel_ms") {
      output_ms = text::parse_double(one(), where);
    } else if (kv.key == "sample_rate") {
      g.sample_rate_hz = static_cast<int>(text::parse_int(one(), where));
    } else if (kv.key == "frame_len") {
      g.frame_len = static_cast<int>(text::parse_int(one(), where));
    } else if (kv.key == "max_epochs") {
      g.max_epochs = static_cast<int>(text::parse_int(one(), where));
    } else if (kv.key == "patience") {
      g.patience = static_cast<int>(text::parse_int(one(), where));
    } else {
      fail(ErrorKind::kFormat, where + ": unknown key '" + kv.key + "'");
    }
  }
  for (int d : depths) {
    if (d < 0) fail(ErrorKind::kFormat, origin + ": negative depth");
    for (int f : filters) {
      for (double k : kernels) {
        for (auto act : acts) {
          GridCell c;
          c.depth = d;
          c.filters = f;
          c.kernel_ms = k;
          c.output_kernel_ms = output_ms.value_or(k);
          c.activation = act;
          c.id = "d" + std::to_string(d) + "_f" + std::to_string(f) + "_k" +
                 format_number(k) + "_" + to_string(act);
          g.cells.push_back(std::move(c));
        }
      }
    }
  }
  return g;
}

/// Model spec for one grid cell; throws a spec error for impossible cells.
inline nn::ModelSpec cell_spec(const Grid& g, const GridCell& c) {
  const std::vector<int> widths(static_cast<std::size_t>(c.depth), c.filters);
  return nn::fcn_spec(g.frame_len, widths, nn::kernel_len_from_ms(c.kernel_ms, g.sample_rate_hz),
                      nn::kernel_len_from_ms(c.output_kernel_ms, g.sample_rate_hz),
                      c.activation);
}

inline Grid load_grid(const std::filesystem::path& path) {
  return parse_grid(text::read_text(path), path.string());
}

}  // namespace fcse::arch
