// SPDX-FileCopyrightText: Copyright (c) 2026 blasst contributors
// SPDX-License-Identifier: Apache-2.0

#include "blasst/blasst.h"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <new>
#include <sstream>
#include <string>

#include "blasst/blasst_core.hpp"
#include "blasst/calibrate.hpp"
#include "blasst/dense_oracle.hpp"
#include "blasst/error.hpp"
#include "blasst/json_io.hpp"
#include "blasst/pipeline_sim.hpp"
#include "blasst/sparse_grad.hpp"
#include "blasst/workload.hpp"

struct blasst_tensor {
  blasst::Tensor value;
};

struct blasst_forward_result {
  blasst::ForwardResult value;
  blasst_tensor output;
};

namespace {

thread_local std::string g_last_error;

blasst_status status_for(blasst::ErrorKind kind) {
  using blasst::ErrorKind;
  switch (kind) {
    case ErrorKind::io: return BLASST_ERR_IO;
    case ErrorKind::format:
    case ErrorKind::length:
    case ErrorKind::unsupported_dtype: return BLASST_ERR_FORMAT;
    case ErrorKind::validation: return BLASST_ERR_VALIDATION;
    case ErrorKind::geometry: return BLASST_ERR_GEOMETRY;
    case ErrorKind::calibration_failed: return BLASST_ERR_CALIBRATION;
    case ErrorKind::model: return BLASST_ERR_MODEL;
  }
  return BLASST_ERR_INTERNAL;
}

// Runs body, translating exceptions into a status and the thread-local message.
template <typename F>
blasst_status guarded(F&& body) {
  try {
    body();
    g_last_error.clear();
    return BLASST_OK;
  } catch (const blasst::Error& e) {
    g_last_error = std::string(blasst::to_string(e.kind())) + " error: " + e.what();
    return status_for(e.kind());
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
  } catch (const std::exception& e) {
    g_last_error = std::string("internal error: ") + e.what();
  }
  return BLASST_ERR_INTERNAL;
}

void require(bool ok, const char* what) {
  if (!ok) throw blasst::Error(blasst::ErrorKind::validation, what);
}

char* dup_string(const std::string& s) {
  char* out = new char[s.size() + 1];
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

std::string text(const char* s, const char* what) {
  require(s != nullptr, what);
  return s;
}

blasst::AttentionSpec bound_spec(const char* attention_json, const blasst_tensor* q, const blasst_tensor* k,
                                 const blasst_tensor* v) {
  require(q && k && v, "Q, K and V must be non-null");
  const auto j = blasst::parse_json(text(attention_json, "attention_json must be non-null"), "attention");
  return blasst::bind_geometry(blasst::attention_spec_from_json(j), q->value, k->value, v->value);
}

blasst::pipeline::PhaseModel model_from(const char* model_json) {
  return blasst::phase_model_from_json(
      blasst::parse_json(text(model_json, "model_json must be non-null"), "pipeline model"));
}

}  // namespace

extern "C" {

const char* blasst_version(void) { return "1.0.0"; }

const char* blasst_status_string(blasst_status status) {
  switch (status) {
    case BLASST_OK: return "ok";
    case BLASST_ERR_IO: return "io";
    case BLASST_ERR_FORMAT: return "format";
    case BLASST_ERR_VALIDATION: return "validation";
    case BLASST_ERR_GEOMETRY: return "geometry";
    case BLASST_ERR_CALIBRATION: return "calibration_failed";
    case BLASST_ERR_MODEL: return "model";
    case BLASST_ERR_INTERNAL: return "internal";
  }
  return "unknown";
}

const char* blasst_last_error(void) { return g_last_error.c_str(); }

void blasst_string_free(char* s) { delete[] s; }

blasst_status blasst_tensor_create_f32(const uint64_t* shape, size_t rank, const float* data,
                                       blasst_tensor** out) {
  return guarded([&] {
    require(shape && data && out, "null argument");
    blasst::Shape s(shape, shape + rank);
    const auto n = blasst::shape_numel(s);
    *out = new blasst_tensor{blasst::Tensor(s, std::vector<float>(data, data + n))};
  });
}

blasst_status blasst_tensor_create_f64(const uint64_t* shape, size_t rank, const double* data,
                                       blasst_tensor** out) {
  return guarded([&] {
    require(shape && data && out, "null argument");
    blasst::Shape s(shape, shape + rank);
    const auto n = blasst::shape_numel(s);
    *out = new blasst_tensor{blasst::Tensor(s, std::vector<double>(data, data + n))};
  });
}

blasst_status blasst_tensor_read(const char* path, blasst_tensor** out) {
  return guarded([&] {
    require(out != nullptr, "null argument");
    *out = new blasst_tensor{blasst::read_tensor(text(path, "path must be non-null"))};
  });
}

blasst_status blasst_tensor_write(const blasst_tensor* t, const char* path) {
  return guarded([&] {
    require(t != nullptr, "null tensor");
    blasst::write_tensor(t->value, text(path, "path must be non-null"));
  });
}

void blasst_tensor_free(blasst_tensor* t) { delete t; }

blasst_dtype blasst_tensor_dtype(const blasst_tensor* t) {
  return t->value.dtype() == blasst::DType::f32 ? BLASST_F32 : BLASST_F64;
}

size_t blasst_tensor_rank(const blasst_tensor* t) { return t->value.rank(); }

uint64_t blasst_tensor_dim(const blasst_tensor* t, size_t axis) {
  return axis < t->value.rank() ? t->value.dim(axis) : 0;
}

uint64_t blasst_tensor_numel(const blasst_tensor* t) { return t->value.numel(); }

blasst_status blasst_tensor_copy_f64(const blasst_tensor* t, double* out, size_t n) {
  return guarded([&] {
    require(t && out, "null argument");
    const auto data = t->value.to_f64();
    std::memcpy(out, data.data(), std::min(n, data.size()) * sizeof(double));
  });
}

blasst_status blasst_workload_generate(const char* workload_json, blasst_tensor** q, blasst_tensor** k,
                                       blasst_tensor** v) {
  return guarded([&] {
    require(q && k && v, "null output argument");
    const auto spec = blasst::workload_spec_from_json(
        blasst::parse_json(text(workload_json, "workload_json must be non-null"), "workload"));
    auto w = blasst::generate_workload(spec);
    *q = new blasst_tensor{std::move(w.q)};
    *k = new blasst_tensor{std::move(w.k)};
    *v = new blasst_tensor{std::move(w.v)};
  });
}

blasst_status blasst_forward(const blasst_tensor* q, const blasst_tensor* k, const blasst_tensor* v,
                             const char* attention_json, blasst_forward_result** out) {
  return guarded([&] {
    require(out != nullptr, "null output argument");
    const auto spec = bound_spec(attention_json, q, k, v);
    auto res = blasst::blasst_forward(q->value, k->value, v->value, spec);
    auto output = res.output;
    *out = new blasst_forward_result{std::move(res), blasst_tensor{std::move(output)}};
  });
}

void blasst_forward_free(blasst_forward_result* r) { delete r; }

const blasst_tensor* blasst_forward_output(const blasst_forward_result* r) { return &r->output; }

double blasst_forward_sparsity(const blasst_forward_result* r) { return r->value.report.global_sparsity; }

blasst_status blasst_forward_mask_json(const blasst_forward_result* r, char** out) {
  return guarded([&] {
    require(r && out, "null argument");
    *out = dup_string(r->value.mask.to_json());
  });
}

blasst_status blasst_forward_report_csv(const blasst_forward_result* r, const char* layout, char** out) {
  return guarded([&] {
    require(r && out, "null argument");
    const std::string l = layout ? layout : "global";
    blasst::ReportLayout rl;
    if (l == "global") {
      rl = blasst::ReportLayout::global;
    } else if (l == "per_head") {
      rl = blasst::ReportLayout::per_head;
    } else if (l == "per_block_row") {
      rl = blasst::ReportLayout::per_block_row;
    } else {
      throw blasst::Error(blasst::ErrorKind::validation, "unknown report layout \"" + l + "\"");
    }
    *out = dup_string(blasst::sparsity_report(r->value.mask, rl).to_csv());
  });
}

blasst_status blasst_forward_diagnostics_json(const blasst_forward_result* r, char** out) {
  return guarded([&] {
    require(r && out, "null argument");
    blasst::Json diags = blasst::Json::array();
    for (const auto& d : r->value.diagnostics) {
      diags.push_back({{"head", d.head}, {"row", d.row}, {"message", d.message}});
    }
    blasst::Json j{{"diagnostics", diags}, {"warnings", r->value.warnings}};
    *out = dup_string(j.dump());
  });
}

blasst_status blasst_dense_attention(const blasst_tensor* q, const blasst_tensor* k, const blasst_tensor* v,
                                     const char* attention_json, blasst_tensor** out) {
  return guarded([&] {
    require(out != nullptr, "null output argument");
    const auto spec = bound_spec(attention_json, q, k, v);
    *out = new blasst_tensor{blasst::dense_attention(q->value, k->value, v->value, spec).output};
  });
}

blasst_status blasst_masked_oracle(const blasst_tensor* q, const blasst_tensor* k, const blasst_tensor* v,
                                   const char* attention_json, const char* mask_json, blasst_tensor** out) {
  return guarded([&] {
    require(out != nullptr, "null output argument");
    const auto spec = bound_spec(attention_json, q, k, v);
    const auto mask = blasst::SkipMask::from_json(text(mask_json, "mask_json must be non-null"));
    *out = new blasst_tensor{blasst::masked_oracle_attention(q->value, k->value, v->value, spec, mask).output};
  });
}

blasst_status blasst_max_relative_deviation(const blasst_tensor* a, const blasst_tensor* ref, double* out) {
  return guarded([&] {
    require(a && ref && out, "null argument");
    *out = blasst::max_relative_deviation(a->value, ref->value);
  });
}

blasst_status blasst_sweep(const blasst_tensor* q, const blasst_tensor* k, const blasst_tensor* v,
                           const char* attention_json, const double* lambdas, size_t count, char** csv) {
  return guarded([&] {
    require(csv != nullptr, "null output argument");
    require(lambdas != nullptr && count > 0, "the lambda list must not be empty");
    for (size_t n = 0; n < count; ++n) {
      require(lambdas[n] >= 0.0 && std::isfinite(lambdas[n]), "lambdas must be finite and >= 0");
    }
    const auto spec = bound_spec(attention_json, q, k, v);
    // One decision pass yields the mask for every threshold.
    const auto profile = blasst::decision_profile(q->value, k->value, v->value, spec);
    std::ostringstream os;
    os << "lambda,sparsity\n";
    for (size_t n = 0; n < count; ++n) {
      os << blasst::format_double(lambdas[n]) << ',' << blasst::format_double(profile.sparsity_at(lambdas[n]))
         << '\n';
    }
    *csv = dup_string(os.str());
  });
}

blasst_status blasst_calibrate(const char* config_json, char** fit_json) {
  return guarded([&] {
    require(fit_json != nullptr, "null output argument");
    const auto cfg = blasst::calibration_config_from_json(
        blasst::parse_json(text(config_json, "config_json must be non-null"), "calibration config"));
    *fit_json = dup_string(blasst::to_json(blasst::calibrate(cfg)).dump(2) + "\n");
  });
}

blasst_status blasst_stability(const char* config_json, const char* fit_json, double fixed_lambda, char** csv) {
  return guarded([&] {
    require(csv != nullptr, "null output argument");
    require(fixed_lambda >= 0.0 && std::isfinite(fixed_lambda), "fixed lambda must be finite and >= 0");
    const auto cfg = blasst::calibration_config_from_json(
        blasst::parse_json(text(config_json, "config_json must be non-null"), "calibration config"));
    cfg.validate();
    const auto fit = blasst::calibration_fit_from_json(
        blasst::parse_json(text(fit_json, "fit_json must be non-null"), "calibration fit"));
    *csv = dup_string(blasst::stability_csv(blasst::stability_eval(fit, fixed_lambda, cfg.lengths, cfg)));
  });
}

blasst_status blasst_gradcheck(const blasst_tensor* q, const blasst_tensor* k, const blasst_tensor* v,
                               const char* attention_json, uint64_t upstream_seed, uint64_t num_coords,
                               double step, uint64_t coord_seed, char** report_json, double* max_rel_error) {
  return guarded([&] {
    require(report_json && max_rel_error, "null output argument");
    require(num_coords > 0, "num_coords must be > 0");
    const auto spec = bound_spec(attention_json, q, k, v);
    const auto d_out = blasst::random_upstream_gradient(spec, upstream_seed);
    const auto rep = blasst::gradient_check(q->value, k->value, v->value, spec, d_out, num_coords, step, coord_seed);
    static constexpr const char* kInputs[] = {"Q", "K", "V"};
    blasst::Json entries = blasst::Json::array();
    for (const auto& e : rep.entries) {
      entries.push_back({{"input", kInputs[static_cast<int>(e.input)]},
                         {"index", e.index},
                         {"analytic", e.analytic},
                         {"finite_difference", e.finite_difference},
                         {"rel_error", e.rel_error},
                         {"excluded", e.excluded}});
    }
    blasst::Json j{{"max_rel_error", rep.max_rel_error}, {"checked", rep.checked},
                   {"excluded", rep.excluded},           {"step", step},
                   {"forward_deviation", rep.forward_deviation},
                   {"masks_agree", rep.masks_agree},     {"entries", entries}};
    *report_json = dup_string(j.dump(2) + "\n");
    *max_rel_error = rep.max_rel_error;
  });
}

blasst_status blasst_default_phase_model(const char* phase, char** model_json) {
  return guarded([&] {
    require(model_json != nullptr, "null output argument");
    const auto p = blasst::pipeline::phase_from_string(text(phase, "phase must be non-null"));
    *model_json = dup_string(blasst::pipeline::default_phase_model_json(p));
  });
}

blasst_status blasst_simulate(const char* model_json, const uint32_t* skipped_loops, size_t count,
                              char** trace_csv, int64_t* runtime) {
  return guarded([&] {
    require(trace_csv && runtime, "null output argument");
    require(count == 0 || skipped_loops != nullptr, "null skip list");
    const auto model = model_from(model_json);
    const std::set<std::uint32_t> skipped(skipped_loops, skipped_loops + count);
    const auto trace = blasst::pipeline::build_schedule(model, skipped);
    *runtime = trace.runtime(model.metric);
    *trace_csv = dup_string(trace.to_csv());
  });
}

blasst_status blasst_speedup_curve(const char* model_json, const double* sparsities, size_t count,
                                   uint32_t trials, uint64_t seed, char** csv) {
  return guarded([&] {
    require(csv != nullptr, "null output argument");
    require(sparsities != nullptr && count > 0, "the sparsity list must not be empty");
    const auto model = model_from(model_json);
    const auto curve =
        blasst::pipeline::speedup_curve(model, std::vector<double>(sparsities, sparsities + count), trials, seed);
    std::ostringstream os;
    os << "sparsity,skipped_loops,baseline_runtime,mean_runtime,speedup\n";
    for (const auto& p : curve) {
      os << blasst::format_double(p.sparsity) << ',' << p.skipped_loops << ','
         << blasst::format_double(p.baseline_runtime) << ',' << blasst::format_double(p.mean_runtime) << ','
         << blasst::format_double(p.speedup) << '\n';
    }
    *csv = dup_string(os.str());
  });
}

}  // extern "C"
