// SPDX-FileCopyrightText: Copyright (c) 2026 blasst contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace blasst {

enum class ErrorKind {
  io,                 // file could not be opened, read, or written
  format,             // bad magic, version, header fields, malformed JSON
  length,             // payload size disagrees with the header
  unsupported_dtype,  // dtype code not in {f32, f64}
  validation,         // a value violates a documented invariant
  geometry,           // tensor shapes disagree with the attention geometry
  calibration_failed, // no calibration length produced an acceptable point
  model,              // malformed pipeline model (e.g. cyclic dependencies)
};

const char* to_string(ErrorKind kind) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace blasst
