// SPDX-FileCopyrightText: Copyright (c) 2026 blasst contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace blasst::pipeline {

enum class Phase { prefill, decode };

enum class ResourceKind : std::uint8_t {
  tma_load,
  mma,
  softmax_warpgroup_0,
  softmax_warpgroup_1,
  correction,
};

// Declaration order is the tie-break priority within one (loop, tile row).
enum class OpKind : std::uint8_t {
  load_k,
  load_v,
  bmm1,
  skip_check,
  ex2_softmax,
  row_sum_scale,
  bmm2,
};

enum class RuntimeMetric {
  makespan,      // end of the last op
  memory_drain,  // end of the last TMA load
};

const char* to_string(Phase p);
const char* to_string(ResourceKind r);
const char* to_string(OpKind k);
const char* to_string(RuntimeMetric m);
Phase phase_from_string(const std::string& s);
OpKind op_kind_from_string(const std::string& s);
RuntimeMetric metric_from_string(const std::string& s);

struct PhaseModel {
  Phase phase = Phase::prefill;
  std::uint32_t num_loops = 4;
  std::uint32_t num_tile_rows = 2;
  std::uint32_t tma_pipeline_stages = 2;
  RuntimeMetric metric = RuntimeMetric::makespan;
  // Compute-bound decode variant: skipped loops also drop their EX2 ops.
  bool skip_softmax_on_skip = false;
  std::map<OpKind, std::int64_t> durations;
  std::vector<std::string> notes;

  void validate() const;
  std::int64_t duration(OpKind k) const;
};

struct PipelineOp {
  std::uint32_t id = 0;
  OpKind kind = OpKind::load_k;
  std::uint32_t loop_index = 0;
  std::uint32_t tile_row = 0;
  std::int64_t duration = 1;
  ResourceKind resource = ResourceKind::tma_load;
  std::vector<std::uint32_t> deps;

  std::string name() const;  // e.g. "BMM1.L1.T0"
};

struct ScheduledOp {
  PipelineOp op;
  std::int64_t start = 0;
  std::int64_t end = 0;
};

struct ScheduleTrace {
  std::vector<ScheduledOp> ops;  // sorted by (start, id)

  std::int64_t total_runtime() const;
  // End of the last op on resource r; 0 when r ran nothing.
  std::int64_t resource_finish(ResourceKind r) const;
  std::map<ResourceKind, double> utilization() const;
  std::int64_t runtime(RuntimeMetric m) const;
  const ScheduledOp* find(OpKind kind, std::uint32_t loop, std::uint32_t tile_row = 0) const;
  std::size_t count(OpKind kind) const;

  // op,resource,start,end
  std::string to_csv() const;
};

/// Dense op graph of one phase. Dependencies per loop l and tile row t:
///
/// prefill: load_K(l) <- load_K(l-1); load_V(l) <- load_K(l);
///   BMM1(l,t) <- load_K(l); skip_check(l,t) <- BMM1(l,t);
///   EX2(l,t) <- BMM1(l,t), EX2(l-1,t); row_sum_scale(l,t) <- EX2(l,t);
///   BMM2(l,t) <- EX2(l,t), load_V(l), BMM2(l-1,t), row_sum_scale(l-1,t)
/// decode: load_K(l) <- BMM1(l - stages); BMM1(l) <- load_K(l);
///   skip_check(l) <- BMM1(l); load_V(l) <- skip_check(l);
///   EX2(l) <- skip_check(l); row_sum_scale(l) <- EX2(l);
///   BMM2(l) <- load_V(l), skip_check(l), EX2(l), BMM2(l-1)
std::vector<PipelineOp> build_ops(const PhaseModel& model);

/// Ops removed for a skipped loop: prefill drops EX2, row_sum_scale, BMM2
/// (V loads stay); decode drops load_V, row_sum_scale, BMM2 (plus EX2 when
/// skip_softmax_on_skip). Dependents inherit the removed ops' dependencies.
std::vector<PipelineOp> remove_skipped(const std::vector<PipelineOp>& ops, const PhaseModel& model,
                                       const std::set<std::uint32_t>& skipped_loops);

/// Deterministic list scheduling: at each event time every idle resource
/// starts its ready op with the smallest (loop_index, tile_row, kind, id).
/// Throws ErrorKind::model on unknown or cyclic dependencies.
ScheduleTrace simulate(const std::vector<PipelineOp>& ops);

ScheduleTrace build_schedule(const PhaseModel& model, const std::set<std::uint32_t>& skipped_loops);

struct SpeedupPoint {
  double sparsity = 0.0;
  std::uint32_t skipped_loops = 0;
  double baseline_runtime = 0.0;
  double mean_runtime = 0.0;
  double speedup = 1.0;  // baseline / mean runtime
};

/// For each sparsity s, skip round(s * num_loops) loops in `trials` random
/// draws and report baseline / mean runtime under the model's metric. Trial t
/// uses one random permutation of the loops for every s and skips its first
/// k entries, so skip sets are nested across sparsities.
std::vector<SpeedupPoint> speedup_curve(const PhaseModel& model, const std::vector<double>& sparsities,
                                        std::uint32_t trials, std::uint64_t seed);

PhaseModel default_phase_model(Phase phase);
const char* default_phase_model_json(Phase phase);

}  // namespace blasst::pipeline
