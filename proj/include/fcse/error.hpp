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

#include <stdexcept>
#include <string>
#include <string_view>

namespace fcse {

enum class ErrorKind {
  kFormat,
  kUnsupportedFormat,
  kUnsupportedRate,
  kIo,
  kDegenerateInput,
  kTooShort,
  kInconsistency,
  kSpec,
  kShape,
  kDegenerateBatch,
  kTape,
  kNumeric,
  kInput,
  kCheckpoint,
  kRate,
};

inline std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kFormat: return "format error";
    case ErrorKind::kUnsupportedFormat: return "unsupported format";
    case ErrorKind::kUnsupportedRate: return "unsupported rate";
    case ErrorKind::kIo: return "I/O error";
    case ErrorKind::kDegenerateInput: return "degenerate input";
    case ErrorKind::kTooShort: return "input too short";
    case ErrorKind::kInconsistency: return "inconsistent input";
    case ErrorKind::kSpec: return "model spec error";
    case ErrorKind::kShape: return "shape error";
    case ErrorKind::kDegenerateBatch: return "degenerate batch";
    case ErrorKind::kTape: return "tape error";
    case ErrorKind::kNumeric: return "numeric error";
    case ErrorKind::kInput: return "input error";
    case ErrorKind::kCheckpoint: return "checkpoint error";
    case ErrorKind::kRate: return "sample rate mismatch";
  }
  return "error";
}

/// Every failure raised by the library carries a kind so that callers (and
/// the CLI exit-code mapping) can dispatch without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what),
        kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) {
  throw Error(kind, what);
}

}  // namespace fcse
