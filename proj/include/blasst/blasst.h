/*
 * SPDX-FileCopyrightText: Copyright (c) 2026 blasst contributors
 * SPDX-License-Identifier: Apache-2.0
 *
 * C interface to the blasst library. Every fallible call returns a
 * blasst_status; on failure blasst_last_error() describes the problem for the
 * calling thread. Strings returned through char** are owned by the caller and
 * released with blasst_string_free. Structured inputs (attention specs,
 * workloads, calibration configs, pipeline models) are JSON documents.
 */

#ifndef BLASST_BLASST_H_
#define BLASST_BLASST_H_

#include <stddef.h>
#include <stdint.h>

#if defined(BLASST_BUILDING_LIBRARY)
#define BLASST_API __attribute__((visibility("default")))
#else
#define BLASST_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum blasst_status {
  BLASST_OK = 0,
  BLASST_ERR_IO = 1,          /* file could not be opened, read or written */
  BLASST_ERR_FORMAT = 2,      /* malformed tensor file or JSON document */
  BLASST_ERR_VALIDATION = 3,  /* out-of-range value or invalid argument */
  BLASST_ERR_GEOMETRY = 4,    /* tensor shapes disagree with the spec */
  BLASST_ERR_CALIBRATION = 5, /* no length reached the target sparsity */
  BLASST_ERR_MODEL = 6,       /* malformed pipeline model (e.g. cyclic deps) */
  BLASST_ERR_INTERNAL = 7
} blasst_status;

typedef enum blasst_dtype { BLASST_F32 = 0, BLASST_F64 = 1 } blasst_dtype;

typedef struct blasst_tensor blasst_tensor;
typedef struct blasst_forward_result blasst_forward_result;

BLASST_API const char* blasst_version(void);
BLASST_API const char* blasst_status_string(blasst_status status);
/* Message of the last failed call on this thread; "" when none. */
BLASST_API const char* blasst_last_error(void);
BLASST_API void blasst_string_free(char* s);

/* Tensors */
BLASST_API blasst_status blasst_tensor_create_f32(const uint64_t* shape, size_t rank, const float* data,
                                                  blasst_tensor** out);
BLASST_API blasst_status blasst_tensor_create_f64(const uint64_t* shape, size_t rank, const double* data,
                                                  blasst_tensor** out);
BLASST_API blasst_status blasst_tensor_read(const char* path, blasst_tensor** out);
BLASST_API blasst_status blasst_tensor_write(const blasst_tensor* t, const char* path);
BLASST_API void blasst_tensor_free(blasst_tensor* t);
BLASST_API blasst_dtype blasst_tensor_dtype(const blasst_tensor* t);
BLASST_API size_t blasst_tensor_rank(const blasst_tensor* t);
BLASST_API uint64_t blasst_tensor_dim(const blasst_tensor* t, size_t axis);
BLASST_API uint64_t blasst_tensor_numel(const blasst_tensor* t);
/* Copies min(n, numel) elements converted to f64. */
BLASST_API blasst_status blasst_tensor_copy_f64(const blasst_tensor* t, double* out, size_t n);

/* Synthetic workloads: workload_json is a SyntheticWorkloadSpec document. */
BLASST_API blasst_status blasst_workload_generate(const char* workload_json, blasst_tensor** q,
                                                  blasst_tensor** k, blasst_tensor** v);

/*
 * Attention. attention_json is an AttentionSpec document; geometry fields may
 * be omitted and are then taken from the tensors.
 */
BLASST_API blasst_status blasst_forward(const blasst_tensor* q, const blasst_tensor* k,
                                        const blasst_tensor* v, const char* attention_json,
                                        blasst_forward_result** out);
BLASST_API void blasst_forward_free(blasst_forward_result* r);
/* Borrowed; valid until blasst_forward_free. */
BLASST_API const blasst_tensor* blasst_forward_output(const blasst_forward_result* r);
BLASST_API double blasst_forward_sparsity(const blasst_forward_result* r);
BLASST_API blasst_status blasst_forward_mask_json(const blasst_forward_result* r, char** out);
/* layout: "global", "per_head" or "per_block_row". */
BLASST_API blasst_status blasst_forward_report_csv(const blasst_forward_result* r, const char* layout,
                                                   char** out);
/* {"diagnostics":[{"head","row","message"}],"warnings":[...]} */
BLASST_API blasst_status blasst_forward_diagnostics_json(const blasst_forward_result* r, char** out);

BLASST_API blasst_status blasst_dense_attention(const blasst_tensor* q, const blasst_tensor* k,
                                                const blasst_tensor* v, const char* attention_json,
                                                blasst_tensor** out);
BLASST_API blasst_status blasst_masked_oracle(const blasst_tensor* q, const blasst_tensor* k,
                                              const blasst_tensor* v, const char* attention_json,
                                              const char* mask_json, blasst_tensor** out);
/* max |a - ref| / max |ref| */
BLASST_API blasst_status blasst_max_relative_deviation(const blasst_tensor* a, const blasst_tensor* ref,
                                                       double* out);

/* CSV "lambda,sparsity" with one row per lambda, fixed thresholds. */
BLASST_API blasst_status blasst_sweep(const blasst_tensor* q, const blasst_tensor* k, const blasst_tensor* v,
                                      const char* attention_json, const double* lambdas, size_t count,
                                      char** csv);

/* Calibration: config_json is a CalibrationConfig document. */
BLASST_API blasst_status blasst_calibrate(const char* config_json, char** fit_json);
/* CSV "length,mode,lambda,achieved,target,deviation" over the config's lengths. */
BLASST_API blasst_status blasst_stability(const char* config_json, const char* fit_json, double fixed_lambda,
                                          char** csv);

/*
 * Finite-difference gradient check of <O, dO> with dO ~ N(0, 1) drawn from
 * upstream_seed. Writes a JSON report and the max relative error over
 * non-excluded coordinates.
 */
BLASST_API blasst_status blasst_gradcheck(const blasst_tensor* q, const blasst_tensor* k,
                                          const blasst_tensor* v, const char* attention_json,
                                          uint64_t upstream_seed, uint64_t num_coords, double step,
                                          uint64_t coord_seed, char** report_json, double* max_rel_error);

/* Pipeline cost model. phase: "prefill" or "decode". */
BLASST_API blasst_status blasst_default_phase_model(const char* phase, char** model_json);
/* Trace CSV "op,resource,start,end"; runtime under the model's metric. */
BLASST_API blasst_status blasst_simulate(const char* model_json, const uint32_t* skipped_loops, size_t count,
                                         char** trace_csv, int64_t* runtime);
/* CSV "sparsity,skipped_loops,baseline_runtime,mean_runtime,speedup". */
BLASST_API blasst_status blasst_speedup_curve(const char* model_json, const double* sparsities, size_t count,
                                              uint32_t trials, uint64_t seed, char** csv);

#ifdef __cplusplus
}
#endif

#endif /* BLASST_BLASST_H_ */
