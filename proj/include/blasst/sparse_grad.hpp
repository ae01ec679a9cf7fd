// SPDX-FileCopyrightText: Copyright (c) 2026 blasst contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <vector>

#include "blasst/attention_spec.hpp"
#include "blasst/diagnostics.hpp"
#include "blasst/skip_mask.hpp"
#include "blasst/tensor.hpp"

namespace blasst {

struct GradBundle {
  Tensor dq;  // f64, shaped like Q
  Tensor dk;  // f64, shaped like K
  Tensor dv;  // f64, shaped like V
  SkipMask mask;
};

struct ForwardBackwardResult {
  Tensor output;  // f64
  GradBundle grads;
  std::vector<RowDiagnostic> diagnostics;
};

/// The skipping forward pass run entirely in f64 (decisions included). Used
/// as the differentiable loss for finite differences.
struct F64Forward {
  Tensor output;
  SkipMask mask;
  std::vector<RowDiagnostic> diagnostics;
};
F64Forward blasst_forward_f64(const Tensor& q, const Tensor& k, const Tensor& v,
                              const AttentionSpec& spec);

/// Analytic gradients of masked-softmax attention at a frozen mask.
GradBundle masked_attention_backward(const Tensor& q, const Tensor& k, const Tensor& v,
                                     const AttentionSpec& spec, const SkipMask& mask,
                                     const Tensor& d_out);

/// f64 forward with skipping, then gradients of <O, dO> w.r.t. Q, K, V with
/// the skip decisions held constant.
ForwardBackwardResult blasst_forward_backward(const Tensor& q, const Tensor& k, const Tensor& v,
                                              const AttentionSpec& spec, const Tensor& d_out);

enum class GradInput : std::uint8_t { q = 0, k = 1, v = 2 };

struct GradCheckEntry {
  GradInput input = GradInput::q;
  std::uint64_t index = 0;
  double analytic = 0.0;
  double finite_difference = 0.0;
  double rel_error = 0.0;
  bool excluded = false;  // perturbation flipped a skip decision
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  double max_rel_error = 0.0;  // over non-excluded entries
  std::uint64_t checked = 0;
  std::uint64_t excluded = 0;
  double forward_deviation = 0.0;  // f64 output vs blasst_forward (f32 engine)
  bool masks_agree = true;         // f64 and f32 forward chose the same mask
};

// |fd - analytic| / max(|fd|, |analytic|, floor).
inline constexpr double kGradRelFloor = 1e-3;
double grad_relative_error(double analytic, double fd);

/// Central differences of <O, dO> on num_coords distinct coordinates drawn
/// uniformly over Q, K, V with a CounterRng seeded by `seed`. A coordinate is
/// excluded when either perturbed forward records a different mask.
GradCheckReport gradient_check(const Tensor& q, const Tensor& k, const Tensor& v,
                               const AttentionSpec& spec, const Tensor& d_out,
                               std::uint64_t num_coords, double step, std::uint64_t seed);

/// N(0, 1) upstream gradient shaped [num_q_heads, seq_len_q, head_dim].
Tensor random_upstream_gradient(const AttentionSpec& spec, std::uint64_t seed);

}  // namespace blasst
