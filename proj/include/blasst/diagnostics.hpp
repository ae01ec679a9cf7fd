// SPDX-FileCopyrightText: Copyright (c) 2026 blasst contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>

namespace blasst {

/// A query row whose softmax denominator was zero (all keys masked or
/// skipped). Its output row is defined as zero.
struct RowDiagnostic {
  std::uint64_t head = 0;
  std::uint64_t row = 0;
  std::string message;
};

}  // namespace blasst
