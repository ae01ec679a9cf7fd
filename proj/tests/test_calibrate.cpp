// SPDX-FileCopyrightText: Copyright (c) 2026 blasst contributors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "blasst/calibrate.hpp"
#include "blasst/dense_oracle.hpp"
#include "blasst/error.hpp"

namespace blasst {
namespace {

CalibrationPoint pt(std::uint64_t L, double lambda) {
  return {L, 1.0 / static_cast<double>(L), lambda, 0.5, 0.0};
}

TEST(Fit, ExactInverseLaw) {
  const auto fit = fit_points({pt(1024, 0.01), pt(2048, 0.005)});
  EXPECT_EQ(fit.a, 10.24);
  EXPECT_LT(fit.max_abs_residual, 1e-15);
}

TEST(Fit, SinglePointIsLambdaTimesLength) {
  const auto fit = fit_points({pt(4096, 0.003)});
  EXPECT_NEAR(fit.a, 0.003 * 4096, 1e-12 * 0.003 * 4096);
}

TEST(Fit, NoisyPointsMatchTheClosedForm) {
  const std::vector<double> x{1e-3, 5e-4, 2.5e-4}, y{0.011, 0.0048, 0.0026};
  // Hand-expanded sums.
  const double sxy = 1e-3 * 0.011 + 5e-4 * 0.0048 + 2.5e-4 * 0.0026;
  const double sxx = 1e-6 + 2.5e-7 + 6.25e-8;
  const double want = sxy / sxx;
  const double got = fit_through_origin(x, y);
  EXPECT_NEAR(got, want, 1e-12 * want);
  EXPECT_NEAR(want, 10.7047619047619, 1e-9);
}

TEST(Fit, RecoversPlantedSlopes) {
  for (double a0 : {0.5, 4.0, 32.0}) {
    std::vector<CalibrationPoint> pts;
    for (std::uint64_t L : {1024u, 2048u, 4096u, 8192u}) pts.push_back(pt(L, a0 / static_cast<double>(L)));
    EXPECT_NEAR(fit_points(pts).a, a0, 1e-12 * a0);
  }
}

TEST(Fit, DegenerateInputsAreRejected) {
  EXPECT_THROW(fit_through_origin({}, {}), Error);
  EXPECT_THROW(fit_through_origin({0.0}, {1.0}), Error);
}

TEST(LogSpace, EndpointsAndSpacing) {
  const auto g = log_space(1e-6, 1e-1, 25);
  ASSERT_EQ(g.size(), 25u);
  EXPECT_EQ(g.front(), 1e-6);
  EXPECT_EQ(g.back(), 1e-1);
  for (std::size_t i = 1; i < g.size(); ++i) EXPECT_NEAR(g[i] / g[i - 1], std::pow(1e5, 1.0 / 24), 1e-9);
  EXPECT_EQ(default_lambda_grid(), g);
}

CalibrationConfig small_config() {
  CalibrationConfig c;
  c.target_sparsity = 0.5;
  c.lengths = {256, 512, 1024};
  c.lambda_grid = log_space(1e-4, 0.9, 30);
  c.tolerance = 0.05;
  c.samples_per_length = 2;
  c.workload.num_q_heads = 2;
  c.workload.num_kv_heads = 1;
  c.workload.head_dim = 16;
  c.workload.seed = 5;
  c.workload.distribution = Salience{};
  c.attention.block_rows = 16;
  c.attention.block_cols = 16;
  c.attention.mask = MaskMode::causal();
  return c;
}

TEST(Config, ValidationRules) {
  auto c = small_config();
  EXPECT_NO_THROW(c.validate());
  auto bad = c;
  bad.lambda_grid = {0.1, 0.01};
  EXPECT_THROW(bad.validate(), Error);
  bad = c;
  bad.lambda_grid.clear();
  EXPECT_THROW(bad.validate(), Error);
  bad = c;
  bad.tolerance = 0.5;
  EXPECT_THROW(bad.validate(), Error);
  bad = c;
  bad.lengths = {256, 256};
  EXPECT_THROW(bad.validate(), Error);
  bad = c;
  bad.lengths = {16};
  EXPECT_THROW(bad.validate(), Error);
  bad = c;
  bad.target_sparsity = 1.0;
  EXPECT_THROW(bad.validate(), Error);
}

TEST(Config, SamplesUseConsecutiveSeeds) {
  const auto c = small_config();
  EXPECT_EQ(c.workload_for(512, 0).seed, 5u);
  EXPECT_EQ(c.workload_for(512, 3).seed, 8u);
  EXPECT_EQ(c.workload_for(512, 3).seq_len, 512u);
  const auto a = c.attention_for(512);
  EXPECT_EQ(a.seq_len_q, 512u);
  EXPECT_EQ(a.seq_len_kv, 512u);
  EXPECT_EQ(a.num_q_heads, 2u);
}

TEST(MeasureSparsity, TinyLambdaSkipsNothing) {
  EXPECT_EQ(measure_sparsity(1e-300, 256, small_config()), 0.0);
}

TEST(MeasureSparsity, IsMonotoneAndAgreesWithProfiles) {
  const auto c = small_config();
  const auto prof = profile_length(c, 512);
  double prev = -1;
  for (double lam : {1e-4, 1e-3, 1e-2, 0.1, 0.5}) {
    const double s = measure_sparsity(lam, 512, c);
    EXPECT_GE(s, prev);
    EXPECT_DOUBLE_EQ(s, prof.mean_sparsity(lam));
    prev = s;
  }
  EXPECT_GT(prev, 0.2);
}

TEST(Calibrate, AcceptedPointsRespectTheTolerance) {
  const auto c = small_config();
  const auto fit = calibrate(c);
  EXPECT_GT(fit.a, 0.0);
  EXPECT_EQ(fit.points.size() + fit.rejected_lengths.size(), c.lengths.size());
  for (const auto& p : fit.points) {
    EXPECT_LT(p.gap, c.tolerance);
    EXPECT_DOUBLE_EQ(p.gap, std::abs(p.achieved_sparsity - c.target_sparsity));
  }
  for (const auto& p : fit.rejected) EXPECT_GE(p.gap, c.tolerance);
}

TEST(Calibrate, GridSearchPicksTheClosestAndSmallestOnTies) {
  auto c = small_config();
  c.lengths = {256};
  const auto profiles = profile_lengths(c, c.lengths);
  const auto& prof = profiles.at(256);
  const auto fit = calibrate(c, profiles);
  ASSERT_EQ(fit.points.size(), 1u);
  double best_gap = 1e300, best_lambda = 0;
  for (double lam : c.lambda_grid) {
    const double gap = std::abs(prof.mean_sparsity(lam) - c.target_sparsity);
    if (gap < best_gap) {
      best_gap = gap;
      best_lambda = lam;
    }
  }
  EXPECT_EQ(fit.points[0].lambda_best, best_lambda);
  // Duplicating a plateau: every grid value above the best reproduces its
  // sparsity only if ties keep the first (smallest) one.
  for (double lam : c.lambda_grid) {
    if (lam < best_lambda) {
      EXPECT_GT(std::abs(prof.mean_sparsity(lam) - c.target_sparsity), best_gap);
    }
  }
  EXPECT_NEAR(fit.a, best_lambda * 256, 1e-12 * best_lambda * 256);
}

TEST(Calibrate, FailsWithAGapTableWhenNothingIsAccepted) {
  auto c = small_config();
  c.lambda_grid = {1e-12, 1e-11};
  try {
    calibrate(c);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::calibration_failed);
    const std::string msg = e.what();
    EXPECT_NE(msg.find("length,lambda_best,achieved,gap"), std::string::npos);
    EXPECT_NE(msg.find("\n1024,"), std::string::npos);
  }
}

TEST(Stability, SingleLengthCalibratedEqualsMatchingFixed) {
  auto c = small_config();
  c.lengths = {512};
  const auto profiles = profile_lengths(c, c.lengths);
  const auto fit = calibrate(c, profiles);
  const auto rows = stability_eval(fit, fit.a / 512.0, profiles, c.target_sparsity);
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0].mode, "fixed");
  EXPECT_EQ(rows[1].mode, "calibrated");
  EXPECT_EQ(rows[0].achieved, rows[1].achieved);
  EXPECT_EQ(rows[0].lambda, rows[1].lambda);
}

TEST(Stability, CalibratedDeviationsStayWithinToleranceAndSpread) {
  const auto c = small_config();
  const auto profiles = profile_lengths(c, c.lengths);
  const auto fit = calibrate(c, profiles);
  const auto rows = stability_eval(fit, 0.01, profiles, c.target_sparsity);
  for (const auto& r : rows) {
    if (r.mode != "calibrated") continue;
    EXPECT_LT(std::abs(r.deviation), c.tolerance + r.spread + 0.02) << r.length;
  }
  const auto csv = stability_csv(rows);
  EXPECT_EQ(csv.rfind("length,mode,lambda,achieved,target,deviation\n", 0), 0u);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 1 + 2 * 3);
}

TEST(Stability, FixedThresholdSparsityGrowsWithLengthForGaussianInputs) {
  auto c = small_config();
  c.workload.distribution = IidGaussian{2.0};
  c.lengths = {256, 512, 1024, 2048};
  c.samples_per_length = 1;
  const auto profiles = profile_lengths(c, c.lengths);
  CalibrationFit dummy;
  dummy.a = 1.0;
  const auto rows = stability_eval(dummy, 0.02, profiles, c.target_sparsity);
  double prev = -1;
  for (const auto& r : rows) {
    if (r.mode != "fixed") continue;
    EXPECT_GT(r.deviation, prev) << r.length;
    prev = r.deviation;
  }
}

TEST(BestFixedLambda, MinimizesTheWorstCase) {
  const auto c = small_config();
  const auto profiles = profile_lengths(c, c.lengths);
  const auto [lam, worst] = best_fixed_lambda(profiles, c.target_sparsity, c.lambda_grid);
  for (double cand : c.lambda_grid) {
    double w = 0;
    for (const auto& [L, p] : profiles) w = std::max(w, std::abs(p.mean_sparsity(cand) - c.target_sparsity));
    EXPECT_GE(w, worst);
  }
  double at = 0;
  for (const auto& [L, p] : profiles) at = std::max(at, std::abs(p.mean_sparsity(lam) - c.target_sparsity));
  EXPECT_EQ(at, worst);
}


// Values recorded in golden/sweep_sink.csv, recomputed here from the full
// forward pass and checked by counting blocks.
TEST(GoldenSinkCurve, ForwardPassReproducesTheRecordedSparsity) {
  SyntheticWorkloadSpec ws;
  ws.seq_len = 2048;
  ws.num_q_heads = 2;
  ws.num_kv_heads = 1;
  ws.head_dim = 32;
  ws.seed = 11;
  ws.distribution = SinkBiased{1.0, {0, 1, 2, 3}, 12.0};
  const auto w = generate_workload(ws);
  AttentionSpec a;
  a.seq_len_q = a.seq_len_kv = 2048;
  a.num_q_heads = 2;
  a.num_kv_heads = 1;
  a.head_dim = 32;
  a.mask = MaskMode::causal();
  const std::pair<double, double> golden[] = {
      {0.000825404185268019, 0.0},
      {0.005623413251903491, 0.4081439393939394},
      {0.1, 0.9375},
  };
  for (const auto& [lam, want] : golden) {
    a.threshold = ThresholdPolicy::fixed(lam);
    const auto r = blasst_forward(w.q, w.k, w.v, a);
    // 2 heads x 32 * 33 / 2 causal tiles.
    EXPECT_EQ(r.mask.count(BlockState::kept) + r.mask.count(BlockState::skipped), 1056u);
    EXPECT_EQ(static_cast<double>(r.mask.count(BlockState::skipped)) / 1056.0, want);
    EXPECT_EQ(r.report.global_sparsity, want);
    if (lam == 0.1) {
      const auto oracle = masked_oracle_attention(w.q, w.k, w.v, a, r.mask).output;
      EXPECT_LE(max_relative_deviation(r.output, oracle), 1e-6);
    }
  }
}

}  // namespace
}  // namespace blasst
