// SPDX-FileCopyrightText: Copyright (c) 2026 blasst contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "blasst/attention_spec.hpp"
#include "blasst/diagnostics.hpp"
#include "blasst/skip_mask.hpp"
#include "blasst/tensor.hpp"

namespace blasst {

enum class SkipDecision { keep, skip };

/// Block-unanimous skip test. running_maxes must already include this block.
/// Skips only if every row satisfies block_max - running_max < ln_lambda
/// (strict). Rows whose block max is -inf have no live element in the block
/// and do not vote.
SkipDecision block_skip_decision(std::span<const double> block_row_maxes,
                                 std::span<const double> running_maxes, double ln_lambda);

enum class ReportLayout { global, per_head, per_block_row };

struct SparsityRow {
  std::optional<std::uint64_t> head;       // empty = aggregated over heads
  std::optional<std::uint64_t> block_row;  // empty = aggregated over tile rows
  std::uint64_t kept = 0;
  std::uint64_t skipped = 0;
  std::uint64_t masked = 0;
  double sparsity = 0.0;
};

struct SparsityReport {
  ReportLayout layout = ReportLayout::global;
  std::vector<SparsityRow> rows;
  double global_sparsity = 0.0;
  std::vector<std::string> diagnostics;

  // head,block_row,kept,skipped,masked,sparsity; aggregated fields print "all".
  std::string to_csv() const;
};

SparsityReport sparsity_report(const SkipMask& mask, ReportLayout layout);

struct ForwardResult {
  Tensor output;  // f32, [num_q_heads, seq_len_q, head_dim]
  SkipMask mask;
  SparsityReport report;  // global layout
  // Per grid cell (SkipMask indexing): max over voting rows of
  // (block_max - running_max) at decision time; NaN for masked_out cells.
  // A block is skipped iff its margin < ln(lambda).
  std::vector<double> margins;
  // Final running max per [head, query row]; -inf for rows with no live key.
  std::vector<float> row_max;
  std::vector<RowDiagnostic> diagnostics;
  std::vector<std::string> warnings;
};

/// Blocked online-softmax forward pass with threshold skipping. Scores are f32
/// (rounded from an f64-accumulated dot product), P~ is f32, and the
/// per-row denominator and output accumulators are f64.
ForwardResult blasst_forward(const Tensor& q, const Tensor& k, const Tensor& v,
                             const AttentionSpec& spec);

/// Decision margins only (no softmax or PV work). Since the running max does
/// not depend on which blocks are skipped, this determines blasst_forward's
/// mask for every lambda at once.
struct DecisionProfile {
  SkipMask geometry;            // masked_out cells marked, others kept
  std::vector<double> margins;  // as ForwardResult::margins

  std::uint64_t countable() const;
  std::uint64_t skipped_at(double lambda) const;
  double sparsity_at(double lambda) const;
  SkipMask mask_at(double lambda) const;
};

DecisionProfile decision_profile(const Tensor& q, const Tensor& k, const Tensor& v,
                                 const AttentionSpec& spec);

}  // namespace blasst
