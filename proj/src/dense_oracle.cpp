// SPDX-FileCopyrightText: Copyright (c) 2026 blasst contributors
// SPDX-License-Identifier: Apache-2.0

#include "blasst/dense_oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "blasst/error.hpp"

namespace blasst {

namespace {

OracleResult reference_attention(const Tensor& q, const Tensor& k, const Tensor& v,
                                 const AttentionSpec& spec, const SkipMask* mask) {
  check_inputs(spec, q, k, v);
  if (mask && !mask->matches(spec)) {
    throw Error(ErrorKind::geometry, "skip mask grid does not match the attention block grid");
  }
  const auto qd = q.to_f64();
  const auto kd = k.to_f64();
  const auto vd = v.to_f64();
  const std::uint64_t Lq = spec.seq_len_q, Lk = spec.seq_len_kv, d = spec.head_dim;
  const double scale = spec.effective_scale();

  OracleResult res{Tensor::zeros({spec.num_q_heads, Lq, d}, DType::f64), {}};
  auto out = res.output.f64_mut();
  std::vector<double> scores(static_cast<std::size_t>(Lk));
  std::vector<char> allowed(static_cast<std::size_t>(Lk));

  for (std::uint64_t h = 0; h < spec.num_q_heads; ++h) {
    const std::uint64_t g = spec.kv_head(h);
    for (std::uint64_t i = 0; i < Lq; ++i) {
      const double* qi = &qd[(h * Lq + i) * d];
      double m = -std::numeric_limits<double>::infinity();
      for (std::uint64_t j = 0; j < Lk; ++j) {
        bool ok = spec.element_live(i, j);
        if (ok && mask) ok = mask->at(h, i / spec.block_rows, j / spec.block_cols) != BlockState::skipped;
        allowed[j] = ok;
        if (!ok) continue;
        const double* kj = &kd[(g * Lk + j) * d];
        double dot = 0.0;
        for (std::uint64_t c = 0; c < d; ++c) dot += qi[c] * kj[c];
        scores[j] = scale * dot;
        m = std::max(m, scores[j]);
      }
      double* oi = &out[(h * Lq + i) * d];
      if (m == -std::numeric_limits<double>::infinity()) {
        res.diagnostics.push_back({h, i, "all key positions masked or skipped; output row set to zero"});
        continue;
      }
      double l = 0.0;
      for (std::uint64_t j = 0; j < Lk; ++j) {
        if (!allowed[j]) continue;
        double w = std::exp(scores[j] - m);
        l += w;
        const double* vj = &vd[(g * Lk + j) * d];
        for (std::uint64_t c = 0; c < d; ++c) oi[c] += w * vj[c];
      }
      for (std::uint64_t c = 0; c < d; ++c) oi[c] /= l;
    }
  }
  return res;
}

}  // namespace

OracleResult dense_attention(const Tensor& q, const Tensor& k, const Tensor& v, const AttentionSpec& spec) {
  return reference_attention(q, k, v, spec, nullptr);
}

OracleResult masked_oracle_attention(const Tensor& q, const Tensor& k, const Tensor& v,
                                     const AttentionSpec& spec, const SkipMask& mask) {
  return reference_attention(q, k, v, spec, &mask);
}

double max_relative_deviation(const Tensor& a, const Tensor& ref) {
  if (a.shape() != ref.shape()) throw Error(ErrorKind::geometry, "deviation: tensor shapes differ");
  const auto x = a.to_f64();
  const auto y = ref.to_f64();
  double diff = 0.0, norm = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    diff = std::max(diff, std::abs(x[i] - y[i]));
    norm = std::max(norm, std::abs(y[i]));
  }
  if (diff == 0.0) return 0.0;
  return norm == 0.0 ? std::numeric_limits<double>::infinity() : diff / norm;
}

}  // namespace blasst
