// SPDX-FileCopyrightText: Copyright (c) 2026 blasst contributors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "blasst/blasst_core.hpp"
#include "blasst/dense_oracle.hpp"
#include "blasst/workload.hpp"
#include "test_util.hpp"

namespace blasst {
namespace {

using testing::make_spec;
using testing::random_qkv;

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

SkipDecision decide(std::vector<double> bm, std::vector<double> m, double ln_lam) {
  return block_skip_decision(bm, m, ln_lam);
}

TEST(SkipDecision, BoundaryIsKeep) { EXPECT_EQ(decide({1.0, 3.0}, {3.0, 3.0}, -2.0), SkipDecision::keep); }

TEST(SkipDecision, ClearMarginSkips) { EXPECT_EQ(decide({0.0, 0.5}, {3.0, 3.0}, -2.0), SkipDecision::skip); }

TEST(SkipDecision, OneDissentingRowKeeps) {
  EXPECT_EQ(decide({0.0, 2.5}, {3.0, 3.0}, -2.0), SkipDecision::keep);
}

TEST(SkipDecision, RowsWithoutLiveElementsDoNotVote) {
  EXPECT_EQ(decide({0.0, kNegInf}, {3.0, 5.0}, -2.0), SkipDecision::skip);
  EXPECT_EQ(decide({0.0, 1.0}, {3.0, 3.0}, kNegInf), SkipDecision::keep);
}

// Two aligned keys (score +8) followed by two anti-aligned keys (score -8).
testing::Qkv aligned_instance() {
  const double a = 2.0 * std::sqrt(2.0);
  Tensor q({1, 4, 2}, std::vector<double>{4, 0, 4, 0, 4, 0, 4, 0});
  Tensor k({1, 4, 2}, std::vector<double>{a, 0, a, 0, -a, 0, -a, 0});
  Tensor v({1, 4, 2}, std::vector<double>{1, 2, 3, 4, 5, 6, 7, 8});
  return {q, k, v};
}

TEST(BlasstForward, ConstructedInstanceSkipsTheAntiAlignedBlock) {
  auto in = aligned_instance();
  auto spec = make_spec(4, 4, 1, 1, 2, 2, 2);
  spec.threshold = ThresholdPolicy::fixed(1e-3);
  const auto r = blasst_forward(in.q, in.k, in.v, spec);
  for (std::uint64_t i = 0; i < 2; ++i) {
    EXPECT_EQ(r.mask.at(0, i, 0), BlockState::kept);
    EXPECT_EQ(r.mask.at(0, i, 1), BlockState::skipped);
  }
  EXPECT_DOUBLE_EQ(r.report.global_sparsity, 0.5);
  const auto oracle = masked_oracle_attention(in.q, in.k, in.v, spec, r.mask).output;
  EXPECT_LT(max_relative_deviation(r.output, oracle), 1e-6);
  // Equal scores over keys 0 and 1: every row is the mean of V rows 0 and 1.
  const auto o = oracle.f64();
  for (int i = 0; i < 4; ++i) {
    EXPECT_DOUBLE_EQ(o[i * 2], 2.0);
    EXPECT_DOUBLE_EQ(o[i * 2 + 1], 3.0);
  }
}

TEST(BlasstForward, ReverseOrderOnTheConstructedInstance) {
  auto in = aligned_instance();
  auto spec = make_spec(4, 4, 1, 1, 2, 2, 2);
  spec.threshold = ThresholdPolicy::fixed(1e-3);
  spec.col_order = ColOrder::reverse();
  const auto r = blasst_forward(in.q, in.k, in.v, spec);
  // The anti-aligned block comes first and cannot be skipped.
  EXPECT_EQ(r.mask.count(BlockState::skipped), 0u);
  const auto oracle = masked_oracle_attention(in.q, in.k, in.v, spec, r.mask).output;
  EXPECT_LT(max_relative_deviation(r.output, oracle), 1e-6);
}

TEST(BlasstForward, LambdaZeroIsDense) {
  for (auto mask : {MaskMode::none(), MaskMode::causal(), MaskMode::sliding_window(20)}) {
    auto spec = make_spec(70, 90, 4, 2, 16, 16, 32);
    spec.mask = mask;
    auto in = random_qkv(spec, 3, 2.0);
    const auto r = blasst_forward(in.q, in.k, in.v, spec);
    EXPECT_EQ(r.mask.count(BlockState::skipped), 0u);
    EXPECT_EQ(r.report.global_sparsity, 0.0);
    EXPECT_LT(max_relative_deviation(r.output, dense_attention(in.q, in.k, in.v, spec).output), 1e-4);
  }
}

TEST(BlasstForward, SingleColumnTileIsNeverSkipped) {
  auto spec = make_spec(40, 30, 2, 1, 8, 8, 32);
  spec.threshold = ThresholdPolicy::fixed(0.99);
  auto in = random_qkv(spec, 5, 3.0);
  EXPECT_EQ(blasst_forward(in.q, in.k, in.v, spec).mask.count(BlockState::skipped), 0u);
}

TEST(BlasstForward, FirstProcessedBlockIsAlwaysKept) {
  for (auto order : {ColOrder::sequential(), ColOrder::reverse()}) {
    auto spec = make_spec(64, 64, 2, 2, 8, 16, 8);
    spec.mask = MaskMode::causal();
    spec.threshold = ThresholdPolicy::fixed(0.9);
    spec.col_order = order;
    auto in = random_qkv(spec, 8, 3.0);
    const auto r = blasst_forward(in.q, in.k, in.v, spec);
    for (std::uint64_t h = 0; h < 2; ++h)
      for (std::uint64_t i = 0; i < spec.tiles_q(); ++i)
        for (auto j : spec.column_sequence()) {
          if (r.mask.at(h, i, j) == BlockState::masked_out) continue;
          EXPECT_EQ(r.mask.at(h, i, j), BlockState::kept);
          break;
        }
  }
}

struct Case {
  MaskMode mask;
  ColOrder order;
  std::uint64_t lq, lk, hq, hkv, d, br, bc;
  double sigma, lambda;
};

std::vector<Case> cases() {
  std::vector<Case> out;
  const MaskMode masks[] = {MaskMode::none(), MaskMode::causal(), MaskMode::sliding_window(24)};
  int n = 0;
  for (const auto& m : masks)
    for (auto order : {ColOrder::sequential(), ColOrder::reverse()})
      for (double lam : {1e-4, 1e-2, 0.2}) {
        ++n;
        out.push_back({m, order, 37 + 11u * n % 50, 61 + 7u * n % 70, n % 2 ? 4u : 2u, n % 3 ? 2u : 1u, 16, 8,
                       n % 2 ? 16u : 8u, 2.5, lam});
      }
  return out;
}

TEST(BlasstForward, MatchesMaskedOracleOnItsOwnMask) {
  int seed = 0;
  for (const auto& c : cases()) {
    auto spec = make_spec(c.lq, c.lk, c.hq, c.hkv, c.d, c.br, c.bc);
    spec.mask = c.mask;
    spec.col_order = c.order;
    spec.threshold = ThresholdPolicy::fixed(c.lambda);
    auto in = random_qkv(spec, ++seed, c.sigma);
    const auto r = blasst_forward(in.q, in.k, in.v, spec);
    const auto oracle = masked_oracle_attention(in.q, in.k, in.v, spec, r.mask);
    EXPECT_LT(max_relative_deviation(r.output, oracle.output), 1e-6) << seed;
    EXPECT_EQ(r.diagnostics.size(), oracle.diagnostics.size());
  }
}

TEST(BlasstForward, SkippedElementsAreBelowLambdaAfterTheFinalMax) {
  int seed = 100;
  std::uint64_t skipped_elements = 0;
  for (const auto& c : cases()) {
    auto spec = make_spec(c.lq, c.lk, c.hq, c.hkv, c.d, c.br, c.bc);
    spec.mask = c.mask;
    spec.col_order = c.order;
    spec.threshold = ThresholdPolicy::fixed(c.lambda);
    auto in = random_qkv(spec, ++seed, c.sigma);
    const auto r = blasst_forward(in.q, in.k, in.v, spec);
    const auto q = in.q.to_f64(), k = in.k.to_f64();
    const double scale = spec.effective_scale();
    for (std::uint64_t h = 0; h < spec.num_q_heads; ++h)
      for (std::uint64_t i = 0; i < spec.seq_len_q; ++i)
        for (std::uint64_t j = 0; j < spec.seq_len_kv; ++j) {
          if (!spec.element_live(i, j)) continue;
          if (r.mask.at(h, i / spec.block_rows, j / spec.block_cols) != BlockState::skipped) continue;
          double dot = 0;
          for (std::uint64_t e = 0; e < spec.head_dim; ++e)
            dot += q[(h * spec.seq_len_q + i) * spec.head_dim + e] *
                   k[(spec.kv_head(h) * spec.seq_len_kv + j) * spec.head_dim + e];
          const float s = static_cast<float>(scale * dot);
          const double m = r.row_max[h * spec.seq_len_q + i];
          ASSERT_LT(std::exp(static_cast<double>(s) - m), c.lambda);
          ++skipped_elements;
        }
  }
  EXPECT_GT(skipped_elements, 1000u);
}

TEST(BlasstForward, DenominatorLossIsBoundedBySkippedKeys) {
  auto spec = make_spec(128, 128, 1, 1, 16, 16, 16);
  spec.threshold = ThresholdPolicy::fixed(0.05);
  SyntheticWorkloadSpec ws;
  ws.seq_len = 128;
  ws.head_dim = 16;
  ws.seed = 77;
  ws.distribution = Salience{};
  const auto in = generate_workload(ws);
  const auto r = blasst_forward(in.q, in.k, in.v, spec);
  ASSERT_GT(r.mask.count(BlockState::skipped), 0u);
  const auto q = in.q.to_f64(), k = in.k.to_f64();
  for (std::uint64_t i = 0; i < 128; ++i) {
    const double m = r.row_max[i];
    double dense = 0, sparse = 0;
    std::uint64_t skipped_keys = 0;
    for (std::uint64_t j = 0; j < 128; ++j) {
      double dot = 0;
      for (int e = 0; e < 16; ++e) dot += q[i * 16 + e] * k[j * 16 + e];
      const double w = std::exp(static_cast<double>(static_cast<float>(dot / 4.0)) - m);
      dense += w;
      if (r.mask.at(0, i / 16, j / 16) == BlockState::skipped) {
        ++skipped_keys;
      } else {
        sparse += w;
      }
    }
    if (skipped_keys == 0) {
      EXPECT_EQ(dense, sparse);
    } else {
      EXPECT_LT(dense - sparse, 0.05 * static_cast<double>(skipped_keys));
    }
  }
}

TEST(BlasstForward, SkipSetsAreNestedInLambda) {
  auto spec = make_spec(96, 160, 2, 1, 16, 16, 16);
  spec.mask = MaskMode::causal();
  auto in = random_qkv(spec, 12, 2.5);
  SkipMask prev;
  double prev_sparsity = -1;
  for (double lam : {0.0, 1e-5, 1e-4, 1e-3, 1e-2, 0.05, 0.1, 0.3, 0.6, 0.95}) {
    spec.threshold = ThresholdPolicy::fixed(lam);
    const auto r = blasst_forward(in.q, in.k, in.v, spec);
    if (prev_sparsity >= 0) {
      for (std::size_t n = 0; n < r.mask.size(); ++n) {
        if (prev.states()[n] == BlockState::skipped) {
          EXPECT_EQ(r.mask.states()[n], BlockState::skipped);
        }
      }
    }
    EXPECT_GE(r.report.global_sparsity, prev_sparsity);
    prev = r.mask;
    prev_sparsity = r.report.global_sparsity;
  }
  EXPECT_GT(prev_sparsity, 0.0);
}

TEST(BlasstForward, IsBitDeterministic) {
  auto spec = make_spec(50, 80, 2, 2, 8, 16, 16);
  spec.threshold = ThresholdPolicy::fixed(0.01);
  auto in = random_qkv(spec, 4, 2.0);
  const auto a = blasst_forward(in.q, in.k, in.v, spec);
  const auto b = blasst_forward(in.q, in.k, in.v, spec);
  EXPECT_TRUE(a.output.bit_equal(b.output));
  EXPECT_EQ(a.mask, b.mask);
  EXPECT_EQ(a.report.to_csv(), b.report.to_csv());
}

TEST(BlasstForward, PaddedRowsDoNotInfluenceDecisions) {
  // With 3 query rows and B_r = 2 the second tile holds only row 2; its
  // decisions must equal those of a B_r = 1 grid for the same row.
  auto spec = make_spec(3, 64, 1, 1, 8, 2, 8);
  spec.threshold = ThresholdPolicy::fixed(0.1);
  auto in = random_qkv(spec, 31, 3.0);
  const auto two = blasst_forward(in.q, in.k, in.v, spec);
  spec.block_rows = 1;
  const auto one = blasst_forward(in.q, in.k, in.v, spec);
  for (std::uint64_t j = 0; j < spec.tiles_kv(); ++j) EXPECT_EQ(two.mask.at(0, 1, j), one.mask.at(0, 2, j));
  EXPECT_GT(one.mask.count(BlockState::skipped), 0u);
}

TEST(BlasstForward, RowsWithoutLiveKeysAreZeroWithDiagnostic) {
  auto spec = make_spec(8, 4, 1, 1, 4, 4, 4);
  spec.mask = MaskMode::causal();
  auto in = random_qkv(spec, 1);
  const auto r = blasst_forward(in.q, in.k, in.v, spec);
  ASSERT_EQ(r.diagnostics.size(), 4u);
  const auto o = r.output.f32();
  for (int n = 0; n < 16; ++n) EXPECT_EQ(o[n], 0.0f);
  for (float x : o) EXPECT_TRUE(std::isfinite(x));
}

TEST(BlasstForward, LambdaAboveOneWarns) {
  auto spec = make_spec(8, 16, 1, 1, 4, 4, 4);
  spec.threshold = ThresholdPolicy::fixed(2.0);
  auto in = random_qkv(spec, 1);
  const auto r = blasst_forward(in.q, in.k, in.v, spec);
  EXPECT_EQ(r.warnings.size(), 1u);
  EXPECT_LT(max_relative_deviation(r.output, masked_oracle_attention(in.q, in.k, in.v, spec, r.mask).output),
            1e-6);
}

TEST(BlasstForward, CalibratedThresholdUsesKvLength) {
  auto spec = make_spec(1, 256, 1, 1, 16, 1, 16);
  spec.threshold = ThresholdPolicy::calibrated(2.56);
  auto in = random_qkv(spec, 2, 3.0);
  const auto cal = blasst_forward(in.q, in.k, in.v, spec);
  spec.threshold = ThresholdPolicy::fixed(0.01);
  EXPECT_EQ(cal.mask, blasst_forward(in.q, in.k, in.v, spec).mask);
}

TEST(DecisionProfile, ReproducesForwardMasksAtEveryLambda) {
  auto spec = make_spec(80, 120, 2, 1, 16, 16, 8);
  spec.mask = MaskMode::sliding_window(50);
  auto in = random_qkv(spec, 44, 2.5);
  const auto profile = decision_profile(in.q, in.k, in.v, spec);
  for (double lam : {0.0, 1e-4, 1e-2, 0.1, 0.5}) {
    spec.threshold = ThresholdPolicy::fixed(lam);
    const auto r = blasst_forward(in.q, in.k, in.v, spec);
    EXPECT_EQ(profile.mask_at(lam), r.mask);
    EXPECT_EQ(profile.sparsity_at(lam), r.report.global_sparsity);
  }
}

TEST(SparsityReport, Arithmetic) {
  SkipMask all_kept(1, 2, 3);
  EXPECT_EQ(sparsity_report(all_kept, ReportLayout::global).global_sparsity, 0.0);

  SkipMask half(1, 2, 3);
  half.set(0, 0, 0, BlockState::skipped);
  half.set(0, 1, 1, BlockState::skipped);
  half.set(0, 1, 2, BlockState::skipped);
  EXPECT_DOUBLE_EQ(sparsity_report(half, ReportLayout::global).global_sparsity, 0.5);
}

TEST(SparsityReport, CausalMaskedBlocksLeaveTheDenominator) {
  auto spec = make_spec(64, 64, 1, 1, 8, 16, 16);
  spec.mask = MaskMode::causal();
  auto mask = SkipMask::for_spec(spec);
  mask.set(0, 3, 0, BlockState::skipped);
  const auto rep = sparsity_report(mask, ReportLayout::global);
  ASSERT_EQ(rep.rows.size(), 1u);
  EXPECT_EQ(rep.rows[0].masked, 6u);
  EXPECT_EQ(rep.rows[0].kept + rep.rows[0].skipped, 10u);
  EXPECT_DOUBLE_EQ(rep.global_sparsity, 0.1);
}

TEST(SparsityReport, LayoutsAndCsv) {
  SkipMask m(2, 2, 2);
  m.set(1, 0, 1, BlockState::skipped);
  m.set(1, 1, 1, BlockState::masked_out);
  EXPECT_EQ(sparsity_report(m, ReportLayout::global).to_csv(),
            "head,block_row,kept,skipped,masked,sparsity\nall,all,6,1,1,0.14285714285714285\n");
  EXPECT_EQ(sparsity_report(m, ReportLayout::per_head).to_csv(),
            "head,block_row,kept,skipped,masked,sparsity\n0,all,4,0,0,0\n1,all,2,1,1,0.3333333333333333\n");
  const auto rows = sparsity_report(m, ReportLayout::per_block_row).rows;
  ASSERT_EQ(rows.size(), 4u);
  EXPECT_DOUBLE_EQ(rows[2].sparsity, 0.5);
  EXPECT_EQ(rows[3].masked, 1u);
}

TEST(SparsityReport, NothingCountableIsZeroWithDiagnostic) {
  SkipMask m(1, 1, 2, BlockState::masked_out);
  const auto rep = sparsity_report(m, ReportLayout::global);
  EXPECT_EQ(rep.global_sparsity, 0.0);
  EXPECT_EQ(rep.diagnostics.size(), 1u);
}

}  // namespace
}  // namespace blasst
