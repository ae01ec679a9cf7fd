// SPDX-FileCopyrightText: Copyright (c) 2026 blasst contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <vector>

#include "blasst/attention_spec.hpp"
#include "blasst/diagnostics.hpp"
#include "blasst/skip_mask.hpp"
#include "blasst/tensor.hpp"

namespace blasst {

// Reference attention computed in f64 with a max-subtracted softmax. The
// output tensor is always f64, shaped [num_q_heads, seq_len_q, head_dim].
struct OracleResult {
  Tensor output;
  std::vector<RowDiagnostic> diagnostics;
};

OracleResult dense_attention(const Tensor& q, const Tensor& k, const Tensor& v,
                             const AttentionSpec& spec);

// Same as dense_attention but every key position inside a skipped block of
// `mask` is dropped from both numerator and denominator.
OracleResult masked_oracle_attention(const Tensor& q, const Tensor& k, const Tensor& v,
                                     const AttentionSpec& spec, const SkipMask& mask);

// max |a - ref| / max |ref| over all elements (0 when both are all-zero).
double max_relative_deviation(const Tensor& a, const Tensor& ref);

}  // namespace blasst
