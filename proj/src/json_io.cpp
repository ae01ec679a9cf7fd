// SPDX-FileCopyrightText: Copyright (c) 2026 blasst contributors
// SPDX-License-Identifier: Apache-2.0

#include "blasst/json_io.hpp"

#include <charconv>
#include <cmath>

#include "blasst/error.hpp"

namespace blasst {

namespace {

[[noreturn]] void format_error(const std::string& what) { throw Error(ErrorKind::format, what); }

const Json& field(const Json& j, const char* key) {
  if (!j.is_object()) format_error(std::string("expected an object holding \"") + key + "\"");
  auto it = j.find(key);
  if (it == j.end()) format_error(std::string("missing field \"") + key + "\"");
  return *it;
}

template <typename T>
T as(const Json& v, const char* key) {
  try {
    if constexpr (std::is_same_v<T, double>) {
      if (!v.is_number()) format_error(std::string("field \"") + key + "\" must be a number");
    } else if constexpr (std::is_integral_v<T> && !std::is_same_v<T, bool>) {
      if (!v.is_number_integer()) format_error(std::string("field \"") + key + "\" must be an integer");
      if (v.is_number_integer() && !v.is_number_unsigned() && v.get<std::int64_t>() < 0 &&
          std::is_unsigned_v<T>) {
        throw Error(ErrorKind::validation, std::string("field \"") + key + "\" must be non-negative");
      }
    }
    return v.get<T>();
  } catch (const nlohmann::json::exception& e) {
    format_error(std::string("field \"") + key + "\" has the wrong type: " + e.what());
  }
}

template <typename T>
T get(const Json& j, const char* key) {
  return as<T>(field(j, key), key);
}

template <typename T>
T get_or(const Json& j, const char* key, T fallback) {
  if (!j.is_object()) format_error(std::string("expected an object holding \"") + key + "\"");
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return fallback;
  return as<T>(*it, key);
}

template <typename T>
std::vector<T> get_list(const Json& j, const char* key) {
  const Json& v = field(j, key);
  if (!v.is_array()) format_error(std::string("field \"") + key + "\" must be an array");
  std::vector<T> out;
  for (const auto& x : v) out.push_back(as<T>(x, key));
  return out;
}

CalibrationPoint point_from_json(const Json& j) {
  CalibrationPoint p;
  p.length = get<std::uint64_t>(j, "length");
  p.inv_length = get_or<double>(j, "inv_length", 1.0 / static_cast<double>(p.length));
  p.lambda_best = get<double>(j, "lambda_best");
  p.achieved_sparsity = get<double>(j, "achieved_sparsity");
  p.gap = get<double>(j, "gap");
  return p;
}

Json to_json(const CalibrationPoint& p) {
  return Json{{"length", p.length},
              {"inv_length", p.inv_length},
              {"lambda_best", p.lambda_best},
              {"achieved_sparsity", p.achieved_sparsity},
              {"gap", p.gap}};
}

}  // namespace

Json parse_json(const std::string& text, const std::string& origin) {
  try {
    return Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    format_error(origin + ": invalid JSON: " + e.what());
  }
}

SyntheticWorkloadSpec workload_spec_from_json(const Json& j) {
  SyntheticWorkloadSpec s;
  s.seq_len = get_or<std::uint64_t>(j, "seq_len", 0);
  s.num_q_heads = get_or<std::uint64_t>(j, "num_q_heads", 1);
  s.num_kv_heads = get_or<std::uint64_t>(j, "num_kv_heads", 1);
  s.head_dim = get<std::uint64_t>(j, "head_dim");
  s.seed = get_or<std::uint64_t>(j, "seed", 0);
  const Json& d = field(j, "distribution");
  const auto kind = get<std::string>(d, "kind");
  if (kind == "iid_gaussian") {
    s.distribution = IidGaussian{get_or<double>(d, "sigma", 1.0)};
  } else if (kind == "sink_biased") {
    SinkBiased b;
    b.sigma = get_or<double>(d, "sigma", b.sigma);
    b.sink_cols = get_list<std::uint64_t>(d, "sink_cols");
    b.sink_boost = get<double>(d, "sink_boost");
    s.distribution = b;
  } else if (kind == "needle") {
    Needle n;
    n.sigma = get_or<double>(d, "sigma", n.sigma);
    n.needle_positions = get_list<std::uint64_t>(d, "needle_positions");
    n.needle_boost = get<double>(d, "needle_boost");
    s.distribution = n;
  } else if (kind == "salience") {
    Salience x;
    x.sigma = get_or<double>(d, "sigma", x.sigma);
    x.tail_scale = get_or<double>(d, "tail_scale", x.tail_scale);
    x.segment = get_or<std::uint64_t>(d, "segment", x.segment);
    s.distribution = x;
  } else {
    throw Error(ErrorKind::validation, "unknown distribution kind \"" + kind + "\"");
  }
  return s;
}

Json to_json(const SyntheticWorkloadSpec& s) {
  Json d = std::visit(
      [](const auto& x) -> Json {
        using T = std::decay_t<decltype(x)>;
        if constexpr (std::is_same_v<T, IidGaussian>) {
          return Json{{"kind", "iid_gaussian"}, {"sigma", x.sigma}};
        } else if constexpr (std::is_same_v<T, SinkBiased>) {
          return Json{{"kind", "sink_biased"}, {"sigma", x.sigma}, {"sink_cols", x.sink_cols},
                      {"sink_boost", x.sink_boost}};
        } else if constexpr (std::is_same_v<T, Needle>) {
          return Json{{"kind", "needle"}, {"sigma", x.sigma}, {"needle_positions", x.needle_positions},
                      {"needle_boost", x.needle_boost}};
        } else {
          return Json{{"kind", "salience"}, {"sigma", x.sigma}, {"tail_scale", x.tail_scale},
                      {"segment", x.segment}};
        }
      },
      s.distribution);
  return Json{{"seq_len", s.seq_len},         {"num_q_heads", s.num_q_heads}, {"num_kv_heads", s.num_kv_heads},
              {"head_dim", s.head_dim},       {"seed", s.seed},               {"distribution", d}};
}

AttentionSpec attention_spec_from_json(const Json& j) {
  AttentionSpec a;
  a.seq_len_q = get_or<std::uint64_t>(j, "seq_len_q", 0);
  a.seq_len_kv = get_or<std::uint64_t>(j, "seq_len_kv", 0);
  a.num_q_heads = get_or<std::uint64_t>(j, "num_q_heads", 0);
  a.num_kv_heads = get_or<std::uint64_t>(j, "num_kv_heads", 0);
  a.head_dim = get_or<std::uint64_t>(j, "head_dim", 0);
  a.block_rows = get_or<std::uint64_t>(j, "block_rows", a.block_rows);
  a.block_cols = get_or<std::uint64_t>(j, "block_cols", a.block_cols);

  if (auto it = j.find("mask"); it != j.end()) {
    const Json& m = *it;
    const std::string kind = m.is_string() ? m.get<std::string>() : get<std::string>(m, "kind");
    if (kind == "none") {
      a.mask = MaskMode::none();
    } else if (kind == "causal") {
      a.mask = MaskMode::causal();
    } else if (kind == "sliding_window") {
      if (!m.is_object()) format_error("sliding_window mask needs {\"kind\", \"window\"}");
      a.mask = MaskMode::sliding_window(get<std::uint64_t>(m, "window"));
    } else {
      throw Error(ErrorKind::validation, "unknown mask kind \"" + kind + "\"");
    }
  }

  if (auto it = j.find("scale"); it != j.end() && !it->is_null()) a.scale = as<double>(*it, "scale");

  if (auto it = j.find("threshold"); it != j.end()) {
    const Json& t = *it;
    const auto kind = get<std::string>(t, "kind");
    if (kind == "fixed") {
      a.threshold = ThresholdPolicy::fixed(get<double>(t, "lambda"));
    } else if (kind == "calibrated") {
      a.threshold = ThresholdPolicy::calibrated(get<double>(t, "a"));
    } else {
      throw Error(ErrorKind::validation, "unknown threshold kind \"" + kind + "\"");
    }
  }

  if (auto it = j.find("col_order"); it != j.end()) {
    const Json& c = *it;
    if (c.is_array()) {
      a.col_order = ColOrder::custom(get_list<std::uint64_t>(j, "col_order"));
    } else {
      const auto kind = as<std::string>(c, "col_order");
      if (kind == "sequential") {
        a.col_order = ColOrder::sequential();
      } else if (kind == "reverse") {
        a.col_order = ColOrder::reverse();
      } else {
        throw Error(ErrorKind::validation, "unknown col_order \"" + kind + "\"");
      }
    }
  }
  return a;
}

Json to_json(const AttentionSpec& a) {
  Json j{{"seq_len_q", a.seq_len_q},       {"seq_len_kv", a.seq_len_kv}, {"num_q_heads", a.num_q_heads},
         {"num_kv_heads", a.num_kv_heads}, {"head_dim", a.head_dim},     {"block_rows", a.block_rows},
         {"block_cols", a.block_cols}};
  switch (a.mask.kind) {
    case MaskMode::Kind::none: j["mask"] = Json{{"kind", "none"}}; break;
    case MaskMode::Kind::causal: j["mask"] = Json{{"kind", "causal"}}; break;
    case MaskMode::Kind::sliding_window:
      j["mask"] = Json{{"kind", "sliding_window"}, {"window", a.mask.window}};
      break;
  }
  j["scale"] = a.scale ? Json(*a.scale) : Json(nullptr);
  j["threshold"] = a.threshold.kind == ThresholdPolicy::Kind::fixed
                       ? Json{{"kind", "fixed"}, {"lambda", a.threshold.value}}
                       : Json{{"kind", "calibrated"}, {"a", a.threshold.value}};
  switch (a.col_order.kind) {
    case ColOrder::Kind::sequential: j["col_order"] = "sequential"; break;
    case ColOrder::Kind::reverse: j["col_order"] = "reverse"; break;
    case ColOrder::Kind::permutation: j["col_order"] = a.col_order.permutation; break;
  }
  return j;
}

CalibrationConfig calibration_config_from_json(const Json& j) {
  CalibrationConfig c;
  c.target_sparsity = get<double>(j, "target_sparsity");
  c.lengths = get_list<std::uint64_t>(j, "lengths");
  if (auto it = j.find("lambda_grid"); it == j.end() || it->is_null()) {
    c.lambda_grid = default_lambda_grid();
  } else if (it->is_object()) {
    const auto& ls = field(*it, "log_space");
    if (!ls.is_array() || ls.size() != 3) format_error("lambda_grid.log_space must be [lo, hi, count]");
    c.lambda_grid = log_space(as<double>(ls[0], "log_space"), as<double>(ls[1], "log_space"),
                              as<std::uint64_t>(ls[2], "log_space"));
  } else {
    c.lambda_grid = get_list<double>(j, "lambda_grid");
  }
  c.tolerance = get_or<double>(j, "tolerance", c.tolerance);
  c.samples_per_length = get_or<std::uint64_t>(j, "samples_per_length", c.samples_per_length);
  c.workload = workload_spec_from_json(field(j, "workload"));
  if (auto it = j.find("attention"); it != j.end()) c.attention = attention_spec_from_json(*it);
  return c;
}

Json to_json(const CalibrationConfig& c) {
  return Json{{"target_sparsity", c.target_sparsity},
              {"lengths", c.lengths},
              {"lambda_grid", c.lambda_grid},
              {"tolerance", c.tolerance},
              {"samples_per_length", c.samples_per_length},
              {"workload", to_json(c.workload)},
              {"attention", to_json(c.attention)}};
}

CalibrationFit calibration_fit_from_json(const Json& j) {
  CalibrationFit f;
  f.a = get<double>(j, "a");
  f.target_sparsity = get_or<double>(j, "target_sparsity", 0.0);
  f.tolerance = get_or<double>(j, "tolerance", 0.0);
  if (auto it = j.find("points"); it != j.end()) {
    for (const auto& p : *it) f.points.push_back(point_from_json(p));
  }
  if (auto it = j.find("rejected"); it != j.end()) {
    for (const auto& p : *it) f.rejected.push_back(point_from_json(p));
  }
  if (j.contains("rejected_lengths")) f.rejected_lengths = get_list<std::uint64_t>(j, "rejected_lengths");
  f.max_abs_residual = get_or<double>(j, "max_abs_residual", 0.0);
  if (!(f.a > 0.0) || !std::isfinite(f.a)) throw Error(ErrorKind::validation, "fit.a must be finite and > 0");
  return f;
}

Json to_json(const CalibrationFit& f) {
  Json points = Json::array(), rejected = Json::array();
  for (const auto& p : f.points) points.push_back(to_json(p));
  for (const auto& p : f.rejected) rejected.push_back(to_json(p));
  return Json{{"a", f.a},
              {"target_sparsity", f.target_sparsity},
              {"tolerance", f.tolerance},
              {"points", points},
              {"rejected", rejected},
              {"rejected_lengths", f.rejected_lengths},
              {"max_abs_residual", f.max_abs_residual}};
}

pipeline::PhaseModel phase_model_from_json(const Json& j) {
  using namespace pipeline;
  PhaseModel m;
  m.phase = phase_from_string(get<std::string>(j, "phase"));
  m.num_loops = get<std::uint32_t>(j, "num_loops");
  m.num_tile_rows = get_or<std::uint32_t>(j, "num_tile_rows", m.phase == Phase::prefill ? 2u : 1u);
  m.tma_pipeline_stages = get_or<std::uint32_t>(j, "tma_pipeline_stages", m.tma_pipeline_stages);
  m.metric = metric_from_string(
      get_or<std::string>(j, "metric", m.phase == Phase::prefill ? "makespan" : "memory_drain"));
  m.skip_softmax_on_skip = get_or<bool>(j, "skip_softmax_on_skip", false);
  const Json& d = field(j, "durations");
  if (!d.is_object()) format_error("field \"durations\" must be an object");
  for (const auto& [key, value] : d.items()) {
    m.durations[op_kind_from_string(key)] = as<std::int64_t>(value, "durations");
  }
  if (auto it = j.find("notes"); it != j.end()) m.notes = get_list<std::string>(j, "notes");
  m.validate();
  return m;
}

Json to_json(const pipeline::PhaseModel& m) {
  Json d = Json::object();
  for (const auto& [k, v] : m.durations) d[pipeline::to_string(k)] = v;
  return Json{{"phase", pipeline::to_string(m.phase)},
              {"num_loops", m.num_loops},
              {"num_tile_rows", m.num_tile_rows},
              {"tma_pipeline_stages", m.tma_pipeline_stages},
              {"metric", pipeline::to_string(m.metric)},
              {"skip_softmax_on_skip", m.skip_softmax_on_skip},
              {"durations", d},
              {"notes", m.notes}};
}

std::string format_double(double x) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

}  // namespace blasst
