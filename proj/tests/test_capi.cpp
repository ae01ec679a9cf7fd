// SPDX-FileCopyrightText: Copyright (c) 2026 blasst contributors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include "blasst/blasst.h"

namespace {

std::string take(char* s) {
  std::string out = s ? s : "";
  blasst_string_free(s);
  return out;
}

struct Inputs {
  blasst_tensor* q = nullptr;
  blasst_tensor* k = nullptr;
  blasst_tensor* v = nullptr;
  ~Inputs() {
    blasst_tensor_free(q);
    blasst_tensor_free(k);
    blasst_tensor_free(v);
  }
};

void generate(Inputs& in, const char* distribution = R"({"kind":"iid_gaussian","sigma":1.5})") {
  const std::string w = std::string(R"({"seq_len":96,"num_q_heads":2,"num_kv_heads":1,"head_dim":16,"seed":3,)") +
                        "\"distribution\":" + distribution + "}";
  ASSERT_EQ(blasst_workload_generate(w.c_str(), &in.q, &in.k, &in.v), BLASST_OK) << blasst_last_error();
}

constexpr const char* kAttn =
    R"({"block_rows":16,"block_cols":16,"mask":"causal","threshold":{"kind":"fixed","lambda":0.05}})";

TEST(CApi, VersionAndStatusStrings) {
  EXPECT_STRNE(blasst_version(), "");
  EXPECT_STREQ(blasst_status_string(BLASST_OK), "ok");
  EXPECT_STREQ(blasst_status_string(BLASST_ERR_GEOMETRY), "geometry");
}

TEST(CApi, TensorLifecycle) {
  const uint64_t shape[2] = {2, 3};
  const float data[6] = {1, 2, 3, 4, 5, 6};
  blasst_tensor* t = nullptr;
  ASSERT_EQ(blasst_tensor_create_f32(shape, 2, data, &t), BLASST_OK);
  EXPECT_EQ(blasst_tensor_dtype(t), BLASST_F32);
  EXPECT_EQ(blasst_tensor_rank(t), 2u);
  EXPECT_EQ(blasst_tensor_dim(t, 1), 3u);
  EXPECT_EQ(blasst_tensor_numel(t), 6u);
  const auto path = (std::filesystem::temp_directory_path() / "blasst_capi_t.btsr").string();
  ASSERT_EQ(blasst_tensor_write(t, path.c_str()), BLASST_OK);
  blasst_tensor* back = nullptr;
  ASSERT_EQ(blasst_tensor_read(path.c_str(), &back), BLASST_OK);
  double out[6];
  ASSERT_EQ(blasst_tensor_copy_f64(back, out, 6), BLASST_OK);
  EXPECT_EQ(out[5], 6.0);
  blasst_tensor_free(t);
  blasst_tensor_free(back);
  std::remove(path.c_str());
}

TEST(CApi, ErrorsCarryStatusAndMessage) {
  blasst_tensor* t = nullptr;
  EXPECT_EQ(blasst_tensor_read("/nonexistent/q.btsr", &t), BLASST_ERR_IO);
  EXPECT_EQ(t, nullptr);
  EXPECT_NE(std::string(blasst_last_error()).find("/nonexistent/q.btsr"), std::string::npos);
  const uint64_t zero[1] = {0};
  EXPECT_EQ(blasst_tensor_create_f64(zero, 1, nullptr, &t), BLASST_ERR_VALIDATION);
  char* out = nullptr;
  EXPECT_EQ(blasst_calibrate("{not json", &out), BLASST_ERR_FORMAT);
  EXPECT_EQ(blasst_forward(nullptr, nullptr, nullptr, kAttn, nullptr), BLASST_ERR_VALIDATION);
}

TEST(CApi, ForwardMatchesTheMaskedOracle) {
  Inputs in;
  generate(in);
  blasst_forward_result* r = nullptr;
  ASSERT_EQ(blasst_forward(in.q, in.k, in.v, kAttn, &r), BLASST_OK) << blasst_last_error();
  const double s = blasst_forward_sparsity(r);
  EXPECT_GE(s, 0.0);
  EXPECT_LE(s, 1.0);
  char* mask = nullptr;
  ASSERT_EQ(blasst_forward_mask_json(r, &mask), BLASST_OK);
  const std::string mask_json = take(mask);
  EXPECT_NE(mask_json.find("\"dims\":[2,6,6]"), std::string::npos);
  blasst_tensor* oracle = nullptr;
  ASSERT_EQ(blasst_masked_oracle(in.q, in.k, in.v, kAttn, mask_json.c_str(), &oracle), BLASST_OK);
  double dev = 1;
  ASSERT_EQ(blasst_max_relative_deviation(blasst_forward_output(r), oracle, &dev), BLASST_OK);
  EXPECT_LE(dev, 1e-6);
  char* csv = nullptr;
  ASSERT_EQ(blasst_forward_report_csv(r, "per_head", &csv), BLASST_OK);
  EXPECT_EQ(take(csv).rfind("head,block_row,kept,skipped,masked,sparsity\n0,all,", 0), 0u);
  EXPECT_EQ(blasst_forward_report_csv(r, "diagonal", &csv), BLASST_ERR_VALIDATION);
  char* diag = nullptr;
  ASSERT_EQ(blasst_forward_diagnostics_json(r, &diag), BLASST_OK);
  EXPECT_NE(take(diag).find("\"warnings\""), std::string::npos);
  blasst_tensor_free(oracle);
  blasst_forward_free(r);
}

TEST(CApi, GeometryMismatchIsReported) {
  Inputs in;
  generate(in);
  blasst_forward_result* r = nullptr;
  EXPECT_EQ(blasst_forward(in.q, in.k, in.v, R"({"head_dim": 32})", &r), BLASST_ERR_GEOMETRY);
  EXPECT_EQ(r, nullptr);
}

TEST(CApi, SweepIsNonDecreasing) {
  Inputs in;
  generate(in);
  const double lambdas[4] = {1e-4, 1e-3, 1e-2, 1e-1};
  char* csv = nullptr;
  ASSERT_EQ(blasst_sweep(in.q, in.k, in.v, kAttn, lambdas, 4, &csv), BLASST_OK);
  const std::string text = take(csv);
  EXPECT_EQ(text.rfind("lambda,sparsity\n1e-04,", 0), 0u);
  double prev = -1, lam = 0, sp = 0;
  std::size_t pos = text.find('\n') + 1;
  int rows = 0;
  while (pos < text.size()) {
    ASSERT_EQ(std::sscanf(text.c_str() + pos, "%lf,%lf", &lam, &sp), 2);
    EXPECT_GE(sp, prev);
    prev = sp;
    ++rows;
    pos = text.find('\n', pos) + 1;
  }
  EXPECT_EQ(rows, 4);
}

TEST(CApi, GradcheckPasses) {
  Inputs in;
  generate(in);
  char* report = nullptr;
  double err = 1;
  ASSERT_EQ(blasst_gradcheck(in.q, in.k, in.v, kAttn, 5, 50, 1e-5, 6, &report, &err), BLASST_OK);
  EXPECT_LT(err, 1e-5);
  EXPECT_NE(take(report).find("\"max_rel_error\""), std::string::npos);
}

TEST(CApi, PipelineModel) {
  char* model = nullptr;
  ASSERT_EQ(blasst_default_phase_model("prefill", &model), BLASST_OK);
  const std::string m = take(model);
  const uint32_t skips[2] = {1, 3};
  char* trace = nullptr;
  int64_t rt = 0;
  ASSERT_EQ(blasst_simulate(m.c_str(), nullptr, 0, &trace, &rt), BLASST_OK);
  take(trace);
  EXPECT_EQ(rt, 18);
  ASSERT_EQ(blasst_simulate(m.c_str(), skips, 2, &trace, &rt), BLASST_OK);
  EXPECT_EQ(take(trace).rfind("op,resource,start,end\n", 0), 0u);
  EXPECT_EQ(rt, 14);
  const double s[2] = {0.0, 0.5};
  char* csv = nullptr;
  ASSERT_EQ(blasst_speedup_curve(m.c_str(), s, 2, 4, 1, &csv), BLASST_OK);
  EXPECT_EQ(take(csv).rfind("sparsity,skipped_loops,baseline_runtime,mean_runtime,speedup\n0,0,18,18,1\n", 0), 0u);
  EXPECT_EQ(blasst_default_phase_model("train", &model), BLASST_ERR_VALIDATION);
  const uint32_t bad[1] = {9};
  EXPECT_NE(blasst_simulate(m.c_str(), bad, 1, &trace, &rt), BLASST_OK);
}

}  // namespace
