// SPDX-FileCopyrightText: Copyright (c) 2026 blasst contributors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <functional>

#include "blasst/error.hpp"
#include "blasst/json_io.hpp"

namespace blasst {
namespace {

ErrorKind kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no error raised";
  return ErrorKind::io;
}

TEST(Json, InvalidTextIsAFormatError) {
  EXPECT_EQ(kind_of([] { parse_json("{\"a\": ", "cfg.json"); }), ErrorKind::format);
}

TEST(Json, WorkloadRoundTrip) {
  const auto j = parse_json(R"({"seq_len": 64, "num_q_heads": 4, "num_kv_heads": 2, "head_dim": 16,
      "seed": 9, "distribution": {"kind": "sink_biased", "sigma": 0.5, "sink_cols": [0, 3],
      "sink_boost": 12}})",
                            "w");
  const auto s = workload_spec_from_json(j);
  EXPECT_EQ(s.seq_len, 64u);
  EXPECT_EQ(s.num_kv_heads, 2u);
  const auto& b = std::get<SinkBiased>(s.distribution);
  EXPECT_EQ(b.sink_cols, (std::vector<std::uint64_t>{0, 3}));
  EXPECT_EQ(b.sink_boost, 12.0);
  EXPECT_EQ(to_json(workload_spec_from_json(to_json(s))), to_json(s));
}

TEST(Json, SalienceDefaults) {
  const auto s = workload_spec_from_json(parse_json(R"({"head_dim": 8, "distribution": {"kind": "salience"}})", "w"));
  const auto& x = std::get<Salience>(s.distribution);
  EXPECT_EQ(x.segment, 64u);
  EXPECT_EQ(x.tail_scale, 1.0);
}

TEST(Json, AttentionSpecFields) {
  const auto a = attention_spec_from_json(parse_json(
      R"({"block_rows": 32, "block_cols": 16, "mask": {"kind": "sliding_window", "window": 100},
          "scale": 0.25, "threshold": {"kind": "calibrated", "a": 20.48}, "col_order": [2, 0, 1]})",
      "a"));
  EXPECT_EQ(a.block_rows, 32u);
  EXPECT_EQ(a.mask.kind, MaskMode::Kind::sliding_window);
  EXPECT_EQ(a.mask.window, 100u);
  EXPECT_EQ(*a.scale, 0.25);
  EXPECT_EQ(a.threshold.kind, ThresholdPolicy::Kind::calibrated);
  EXPECT_EQ(a.col_order.permutation, (std::vector<std::uint64_t>{2, 0, 1}));
  EXPECT_EQ(to_json(attention_spec_from_json(to_json(a))), to_json(a));

  const auto b = attention_spec_from_json(parse_json(R"({"mask": "causal", "col_order": "reverse"})", "a"));
  EXPECT_EQ(b.mask.kind, MaskMode::Kind::causal);
  EXPECT_EQ(b.col_order.kind, ColOrder::Kind::reverse);
  EXPECT_FALSE(b.scale.has_value());
}

TEST(Json, BadFieldsAreRejected) {
  EXPECT_EQ(kind_of([] { attention_spec_from_json(parse_json(R"({"block_rows": "x"})", "a")); }),
            ErrorKind::format);
  EXPECT_EQ(kind_of([] { attention_spec_from_json(parse_json(R"({"mask": "diagonal"})", "a")); }),
            ErrorKind::validation);
  EXPECT_EQ(kind_of([] { attention_spec_from_json(parse_json(R"({"threshold": {"kind": "fixed"}})", "a")); }),
            ErrorKind::format);
  EXPECT_EQ(kind_of([] { workload_spec_from_json(parse_json(R"({"head_dim": 8})", "w")); }), ErrorKind::format);
  EXPECT_EQ(kind_of([] { workload_spec_from_json(parse_json(R"({"head_dim": -8, "distribution": {"kind": "iid_gaussian"}})", "w")); }),
            ErrorKind::validation);
}

TEST(Json, CalibrationConfigGrids) {
  const auto base = R"("target_sparsity": 0.5, "lengths": [1024, 2048],
      "workload": {"head_dim": 16, "distribution": {"kind": "iid_gaussian"}})";
  const auto c1 = calibration_config_from_json(parse_json(std::string("{") + base + "}", "c"));
  EXPECT_EQ(c1.lambda_grid, default_lambda_grid());
  const auto c2 =
      calibration_config_from_json(parse_json(std::string("{") + base + R"(, "lambda_grid": {"log_space": [1e-3, 1e-1, 3]}})", "c"));
  ASSERT_EQ(c2.lambda_grid.size(), 3u);
  EXPECT_NEAR(c2.lambda_grid[1], 1e-2, 1e-15);
  const auto c3 = calibration_config_from_json(parse_json(std::string("{") + base + R"(, "lambda_grid": [0.1, 0.2]})", "c"));
  EXPECT_EQ(c3.lambda_grid, (std::vector<double>{0.1, 0.2}));
}

TEST(Json, FitRoundTrip) {
  CalibrationFit f;
  f.a = 10.24;
  f.target_sparsity = 0.5;
  f.tolerance = 0.03;
  f.points = {{1024, 1.0 / 1024, 0.01, 0.49, 0.01}};
  f.rejected = {{4096, 1.0 / 4096, 0.1, 0.3, 0.2}};
  f.rejected_lengths = {4096};
  const auto back = calibration_fit_from_json(to_json(f));
  EXPECT_EQ(back.a, f.a);
  EXPECT_EQ(back.points.size(), 1u);
  EXPECT_EQ(back.rejected_lengths, f.rejected_lengths);
  EXPECT_EQ(to_json(back), to_json(f));
  EXPECT_EQ(kind_of([] { calibration_fit_from_json(parse_json(R"({"a": 0})", "f")); }), ErrorKind::validation);
}

TEST(Json, PhaseModelRoundTrip) {
  for (auto p : {pipeline::Phase::prefill, pipeline::Phase::decode}) {
    const auto m = pipeline::default_phase_model(p);
    const auto back = phase_model_from_json(to_json(m));
    EXPECT_EQ(back.durations, m.durations);
    EXPECT_EQ(back.metric, m.metric);
    EXPECT_EQ(back.num_loops, m.num_loops);
  }
  EXPECT_EQ(kind_of([] {
              phase_model_from_json(parse_json(R"({"phase": "prefill", "num_loops": 4, "durations": {"BMM3": 1}})", "m"));
            }),
            ErrorKind::validation);
}

TEST(Json, FormatDoubleIsShortestRoundTrip) {
  EXPECT_EQ(format_double(0.5), "0.5");
  EXPECT_EQ(format_double(1.0 / 7), "0.14285714285714285");
  EXPECT_EQ(format_double(1e-6), "1e-06");
  EXPECT_EQ(format_double(0.0), "0");
}

}  // namespace
}  // namespace blasst
