// SPDX-FileCopyrightText: Copyright (c) 2026 blasst contributors
// SPDX-License-Identifier: Apache-2.0

#include "blasst/pipeline_sim.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <sstream>
#include <tuple>
#include <unordered_map>

#include "blasst/error.hpp"
#include "blasst/json_io.hpp"
#include "blasst/rng.hpp"

namespace blasst::pipeline {

namespace {

constexpr std::uint64_t kStreamSkipSets = 7;

constexpr OpKind kAllKinds[] = {OpKind::load_k,      OpKind::load_v,        OpKind::bmm1, OpKind::skip_check,
                                OpKind::ex2_softmax, OpKind::row_sum_scale, OpKind::bmm2};

[[noreturn]] void model_error(const std::string& what) { throw Error(ErrorKind::model, what); }

template <typename E, std::size_t N>
E from_table(const std::string& s, const E (&values)[N], const char* what) {
  for (E v : values)
    if (s == to_string(v)) return v;
  throw Error(ErrorKind::validation, std::string("unknown ") + what + " \"" + s + "\"");
}

}  // namespace

const char* to_string(Phase p) { return p == Phase::prefill ? "prefill" : "decode"; }

const char* to_string(ResourceKind r) {
  switch (r) {
    case ResourceKind::tma_load: return "TMA_load";
    case ResourceKind::mma: return "MMA";
    case ResourceKind::softmax_warpgroup_0: return "softmax_warpgroup_0";
    case ResourceKind::softmax_warpgroup_1: return "softmax_warpgroup_1";
    case ResourceKind::correction: return "correction";
  }
  return "?";
}

const char* to_string(OpKind k) {
  switch (k) {
    case OpKind::load_k: return "load_K";
    case OpKind::load_v: return "load_V";
    case OpKind::bmm1: return "BMM1";
    case OpKind::skip_check: return "skip_check";
    case OpKind::ex2_softmax: return "EX2_softmax";
    case OpKind::row_sum_scale: return "row_sum_scale";
    case OpKind::bmm2: return "BMM2";
  }
  return "?";
}

const char* to_string(RuntimeMetric m) { return m == RuntimeMetric::makespan ? "makespan" : "memory_drain"; }

Phase phase_from_string(const std::string& s) {
  constexpr Phase all[] = {Phase::prefill, Phase::decode};
  return from_table(s, all, "phase");
}

OpKind op_kind_from_string(const std::string& s) { return from_table(s, kAllKinds, "op kind"); }

RuntimeMetric metric_from_string(const std::string& s) {
  constexpr RuntimeMetric all[] = {RuntimeMetric::makespan, RuntimeMetric::memory_drain};
  return from_table(s, all, "runtime metric");
}

void PhaseModel::validate() const {
  if (num_loops < 1) throw Error(ErrorKind::validation, "model.num_loops must be >= 1");
  if (num_tile_rows < 1 || num_tile_rows > 2) {
    throw Error(ErrorKind::validation, "model.num_tile_rows must be 1 or 2");
  }
  if (phase == Phase::decode && num_tile_rows != 1) {
    throw Error(ErrorKind::validation, "decode models have exactly one tile row");
  }
  if (tma_pipeline_stages < 1) throw Error(ErrorKind::validation, "model.tma_pipeline_stages must be >= 1");
  for (OpKind k : kAllKinds) {
    auto it = durations.find(k);
    if (it == durations.end()) {
      throw Error(ErrorKind::validation, std::string("model.durations is missing ") + to_string(k));
    }
    if (it->second < 1) {
      throw Error(ErrorKind::validation, std::string("model.durations.") + to_string(k) + " must be >= 1");
    }
  }
}

std::int64_t PhaseModel::duration(OpKind k) const {
  auto it = durations.find(k);
  if (it == durations.end()) model_error(std::string("no duration for ") + to_string(k));
  return it->second;
}

std::string PipelineOp::name() const {
  return std::string(to_string(kind)) + ".L" + std::to_string(loop_index) + ".T" + std::to_string(tile_row);
}

std::int64_t ScheduleTrace::total_runtime() const {
  std::int64_t t = 0;
  for (const auto& s : ops) t = std::max(t, s.end);
  return t;
}

std::int64_t ScheduleTrace::resource_finish(ResourceKind r) const {
  std::int64_t t = 0;
  for (const auto& s : ops)
    if (s.op.resource == r) t = std::max(t, s.end);
  return t;
}

std::map<ResourceKind, double> ScheduleTrace::utilization() const {
  std::map<ResourceKind, double> busy;
  const double total = static_cast<double>(total_runtime());
  for (const auto& s : ops) busy[s.op.resource] += static_cast<double>(s.end - s.start);
  for (auto& [r, b] : busy) b = total > 0 ? b / total : 0.0;
  return busy;
}

std::int64_t ScheduleTrace::runtime(RuntimeMetric m) const {
  return m == RuntimeMetric::makespan ? total_runtime() : resource_finish(ResourceKind::tma_load);
}

const ScheduledOp* ScheduleTrace::find(OpKind kind, std::uint32_t loop, std::uint32_t tile_row) const {
  for (const auto& s : ops)
    if (s.op.kind == kind && s.op.loop_index == loop && s.op.tile_row == tile_row) return &s;
  return nullptr;
}

std::size_t ScheduleTrace::count(OpKind kind) const {
  return static_cast<std::size_t>(
      std::count_if(ops.begin(), ops.end(), [&](const ScheduledOp& s) { return s.op.kind == kind; }));
}

std::string ScheduleTrace::to_csv() const {
  std::ostringstream os;
  os << "op,resource,start,end\n";
  for (const auto& s : ops) os << s.op.name() << ',' << to_string(s.op.resource) << ',' << s.start << ',' << s.end << '\n';
  return os.str();
}

std::vector<PipelineOp> build_ops(const PhaseModel& model) {
  model.validate();
  std::vector<PipelineOp> ops;
  std::map<std::tuple<OpKind, std::uint32_t, std::uint32_t>, std::uint32_t> ids;
  const auto add = [&](OpKind kind, std::uint32_t l, std::uint32_t t, ResourceKind res,
                       std::vector<std::uint32_t> deps) {
    PipelineOp op;
    op.id = static_cast<std::uint32_t>(ops.size());
    op.kind = kind;
    op.loop_index = l;
    op.tile_row = t;
    op.duration = model.duration(kind);
    op.resource = res;
    op.deps = std::move(deps);
    ids[{kind, l, t}] = op.id;
    ops.push_back(std::move(op));
  };
  const auto id = [&](OpKind kind, std::uint32_t l, std::uint32_t t = 0) { return ids.at({kind, l, t}); };

  if (model.phase == Phase::prefill) {
    for (std::uint32_t l = 0; l < model.num_loops; ++l) {
      add(OpKind::load_k, l, 0, ResourceKind::tma_load,
          l > 0 ? std::vector<std::uint32_t>{id(OpKind::load_k, l - 1)} : std::vector<std::uint32_t>{});
      add(OpKind::load_v, l, 0, ResourceKind::tma_load, {id(OpKind::load_k, l)});
      for (std::uint32_t t = 0; t < model.num_tile_rows; ++t) {
        const auto softmax = t == 0 ? ResourceKind::softmax_warpgroup_0 : ResourceKind::softmax_warpgroup_1;
        add(OpKind::bmm1, l, t, ResourceKind::mma, {id(OpKind::load_k, l)});
        add(OpKind::skip_check, l, t, ResourceKind::correction, {id(OpKind::bmm1, l, t)});
        std::vector<std::uint32_t> ex2_deps{id(OpKind::bmm1, l, t)};
        if (l > 0) ex2_deps.push_back(id(OpKind::ex2_softmax, l - 1, t));
        add(OpKind::ex2_softmax, l, t, softmax, ex2_deps);
        add(OpKind::row_sum_scale, l, t, ResourceKind::correction, {id(OpKind::ex2_softmax, l, t)});
        std::vector<std::uint32_t> bmm2_deps{id(OpKind::ex2_softmax, l, t), id(OpKind::load_v, l)};
        if (l > 0) {
          bmm2_deps.push_back(id(OpKind::bmm2, l - 1, t));
          bmm2_deps.push_back(id(OpKind::row_sum_scale, l - 1, t));
        }
        add(OpKind::bmm2, l, t, ResourceKind::mma, bmm2_deps);
      }
    }
  } else {
    const std::uint32_t stages = model.tma_pipeline_stages;
    for (std::uint32_t l = 0; l < model.num_loops; ++l) {
      // Stage buffer reuse: K(l) overwrites the buffer consumed by BMM1(l - stages).
      add(OpKind::load_k, l, 0, ResourceKind::tma_load,
          l >= stages ? std::vector<std::uint32_t>{id(OpKind::bmm1, l - stages)} : std::vector<std::uint32_t>{});
      add(OpKind::bmm1, l, 0, ResourceKind::mma, {id(OpKind::load_k, l)});
      add(OpKind::skip_check, l, 0, ResourceKind::correction, {id(OpKind::bmm1, l)});
      add(OpKind::load_v, l, 0, ResourceKind::tma_load, {id(OpKind::skip_check, l)});
      add(OpKind::ex2_softmax, l, 0, ResourceKind::softmax_warpgroup_0, {id(OpKind::skip_check, l)});
      add(OpKind::row_sum_scale, l, 0, ResourceKind::correction, {id(OpKind::ex2_softmax, l)});
      std::vector<std::uint32_t> bmm2_deps{id(OpKind::load_v, l), id(OpKind::skip_check, l),
                                           id(OpKind::ex2_softmax, l)};
      if (l > 0) bmm2_deps.push_back(id(OpKind::bmm2, l - 1));
      add(OpKind::bmm2, l, 0, ResourceKind::mma, bmm2_deps);
    }
  }
  return ops;
}

std::vector<PipelineOp> remove_skipped(const std::vector<PipelineOp>& ops, const PhaseModel& model,
                                       const std::set<std::uint32_t>& skipped_loops) {
  for (auto l : skipped_loops) {
    if (l >= model.num_loops) {
      throw Error(ErrorKind::validation, "skipped loop " + std::to_string(l) + " is out of range");
    }
  }
  const auto removed_kind = [&](OpKind k) {
    if (model.phase == Phase::prefill) {
      return k == OpKind::ex2_softmax || k == OpKind::row_sum_scale || k == OpKind::bmm2;
    }
    return k == OpKind::load_v || k == OpKind::row_sum_scale || k == OpKind::bmm2 ||
           (model.skip_softmax_on_skip && k == OpKind::ex2_softmax);
  };

  std::unordered_map<std::uint32_t, const PipelineOp*> by_id;
  for (const auto& op : ops) by_id[op.id] = &op;
  const auto is_removed = [&](const PipelineOp& op) {
    return skipped_loops.count(op.loop_index) != 0 && removed_kind(op.kind);
  };

  // Resolve a dependency through removed ops to the surviving ancestors.
  std::unordered_map<std::uint32_t, std::vector<std::uint32_t>> memo;
  std::function<const std::vector<std::uint32_t>&(std::uint32_t, int)> resolve =
      [&](std::uint32_t dep, int depth) -> const std::vector<std::uint32_t>& {
    if (auto it = memo.find(dep); it != memo.end()) return it->second;
    if (depth > static_cast<int>(ops.size())) model_error("cyclic dependency through removed ops");
    auto it = by_id.find(dep);
    if (it == by_id.end()) model_error("unknown dependency id " + std::to_string(dep));
    std::vector<std::uint32_t> out;
    if (!is_removed(*it->second)) {
      out.push_back(dep);
    } else {
      for (auto d : it->second->deps)
        for (auto x : resolve(d, depth + 1))
          if (std::find(out.begin(), out.end(), x) == out.end()) out.push_back(x);
    }
    return memo.emplace(dep, std::move(out)).first->second;
  };

  std::vector<PipelineOp> out;
  for (const auto& op : ops) {
    if (is_removed(op)) continue;
    PipelineOp copy = op;
    copy.deps.clear();
    for (auto d : op.deps)
      for (auto x : resolve(d, 0))
        if (std::find(copy.deps.begin(), copy.deps.end(), x) == copy.deps.end()) copy.deps.push_back(x);
    out.push_back(std::move(copy));
  }
  return out;
}

ScheduleTrace simulate(const std::vector<PipelineOp>& ops) {
  const std::size_t n = ops.size();
  std::unordered_map<std::uint32_t, std::size_t> pos;
  for (std::size_t i = 0; i < n; ++i) {
    if (ops[i].duration < 1) model_error("op " + ops[i].name() + " has non-positive duration");
    if (!pos.emplace(ops[i].id, i).second) model_error("duplicate op id " + std::to_string(ops[i].id));
  }
  std::vector<std::vector<std::size_t>> deps(n);
  std::vector<std::size_t> indegree(n, 0);
  std::vector<std::vector<std::size_t>> users(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (auto d : ops[i].deps) {
      auto it = pos.find(d);
      if (it == pos.end()) model_error("op " + ops[i].name() + " depends on unknown id " + std::to_string(d));
      deps[i].push_back(it->second);
      users[it->second].push_back(i);
      ++indegree[i];
    }
  }
  {  // Kahn's algorithm: reject cycles up front.
    std::vector<std::size_t> deg = indegree, queue;
    for (std::size_t i = 0; i < n; ++i)
      if (deg[i] == 0) queue.push_back(i);
    std::size_t seen = 0;
    while (!queue.empty()) {
      auto i = queue.back();
      queue.pop_back();
      ++seen;
      for (auto u : users[i])
        if (--deg[u] == 0) queue.push_back(u);
    }
    if (seen != n) model_error("dependency graph has a cycle");
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const auto& x = ops[a];
    const auto& y = ops[b];
    return std::tuple(x.loop_index, x.tile_row, static_cast<int>(x.kind), x.id) <
           std::tuple(y.loop_index, y.tile_row, static_cast<int>(y.kind), y.id);
  });

  constexpr std::int64_t kUnset = std::numeric_limits<std::int64_t>::min();
  std::vector<std::int64_t> start(n, kUnset), end(n, kUnset);
  std::map<ResourceKind, std::int64_t> busy_until;
  std::size_t done = 0;
  std::int64_t t = 0;
  while (done < n) {
    for (std::size_t i : order) {
      if (start[i] != kUnset) continue;
      bool ready = true;
      for (auto d : deps[i])
        if (end[d] == kUnset || end[d] > t) {
          ready = false;
          break;
        }
      if (!ready) continue;
      auto& busy = busy_until[ops[i].resource];
      if (busy > t) continue;
      start[i] = t;
      end[i] = t + ops[i].duration;
      busy = end[i];
      ++done;
    }
    if (done == n) break;
    std::int64_t next = std::numeric_limits<std::int64_t>::max();
    for (std::size_t i = 0; i < n; ++i)
      if (end[i] != kUnset && end[i] > t) next = std::min(next, end[i]);
    if (next == std::numeric_limits<std::int64_t>::max()) model_error("schedule deadlocked");
    t = next;
  }

  ScheduleTrace trace;
  for (std::size_t i = 0; i < n; ++i) trace.ops.push_back({ops[i], start[i], end[i]});
  std::sort(trace.ops.begin(), trace.ops.end(), [](const ScheduledOp& a, const ScheduledOp& b) {
    return std::tie(a.start, a.op.id) < std::tie(b.start, b.op.id);
  });
  return trace;
}

ScheduleTrace build_schedule(const PhaseModel& model, const std::set<std::uint32_t>& skipped_loops) {
  return simulate(remove_skipped(build_ops(model), model, skipped_loops));
}

std::vector<SpeedupPoint> speedup_curve(const PhaseModel& model, const std::vector<double>& sparsities,
                                        std::uint32_t trials, std::uint64_t seed) {
  model.validate();
  if (trials < 1) throw Error(ErrorKind::validation, "speedup trials must be >= 1");
  for (double s : sparsities) {
    if (!(s >= 0.0 && s < 1.0)) throw Error(ErrorKind::validation, "sparsities must lie in [0, 1)");
  }
  const auto dense_ops = build_ops(model);
  const double baseline = static_cast<double>(simulate(dense_ops).runtime(model.metric));

  const CounterRng rng(seed, kStreamSkipSets);
  std::vector<std::vector<std::uint32_t>> perms(trials);
  for (std::uint32_t t = 0; t < trials; ++t) {
    auto& p = perms[t];
    p.resize(model.num_loops);
    std::iota(p.begin(), p.end(), 0u);
    for (std::uint32_t i = model.num_loops; i > 1; --i) {  // Fisher-Yates
      const auto j = static_cast<std::uint32_t>(rng.bits(std::uint64_t{t} * model.num_loops + i) % i);
      std::swap(p[i - 1], p[j]);
    }
  }

  std::vector<SpeedupPoint> out;
  for (double s : sparsities) {
    const auto k = static_cast<std::uint32_t>(std::llround(s * model.num_loops));
    double sum = 0.0;
    for (const auto& p : perms) {
      const std::set<std::uint32_t> skipped(p.begin(), p.begin() + k);
      sum += static_cast<double>(simulate(remove_skipped(dense_ops, model, skipped)).runtime(model.metric));
    }
    const double mean = sum / trials;
    out.push_back({s, k, baseline, mean, baseline / mean});
  }
  return out;
}

PhaseModel default_phase_model(Phase phase) {
  return phase_model_from_json(parse_json(default_phase_model_json(phase),
                                          std::string("built-in ") + to_string(phase) + " model"));
}

}  // namespace blasst::pipeline
