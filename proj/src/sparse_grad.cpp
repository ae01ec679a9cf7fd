// SPDX-FileCopyrightText: Copyright (c) 2026 blasst contributors
// SPDX-License-Identifier: Apache-2.0

#include "blasst/sparse_grad.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <unordered_set>

#include "blasst/blasst_core.hpp"
#include "blasst/dense_oracle.hpp"
#include "blasst/error.hpp"
#include "blasst/rng.hpp"
#include "blocked_forward.hpp"

namespace blasst {

namespace {

constexpr std::uint64_t kStreamUpstream = 5;
constexpr std::uint64_t kStreamCoords = 6;

Shape out_shape(const AttentionSpec& spec) {
  return {spec.num_q_heads, spec.seq_len_q, spec.head_dim};
}

F64Forward forward_f64(const std::vector<double>& q, const std::vector<double>& k,
                       const std::vector<double>& v, const AttentionSpec& spec) {
  auto run = detail::blocked_forward<double>(q, k, v, spec, ln_lambda(spec.lambda()), true);
  return F64Forward{Tensor(out_shape(spec), std::move(run.out)), std::move(run.mask),
                    std::move(run.diagnostics)};
}

// <plus - minus, w> summed elementwise: outputs the perturbation did not touch
// cancel exactly instead of contributing summation noise.
double inner_difference(const Tensor& plus, const Tensor& minus, const std::vector<double>& w) {
  const auto a = plus.f64(), b = minus.f64();
  double s = 0.0;
  for (std::size_t n = 0; n < w.size(); ++n) s += (a[n] - b[n]) * w[n];
  return s;
}

struct Grads {
  std::vector<double> dq, dk, dv, out;
};

Grads backward(const std::vector<double>& q, const std::vector<double>& k, const std::vector<double>& v,
               const AttentionSpec& spec, const SkipMask& mask, const std::vector<double>& dout) {
  const std::uint64_t Lq = spec.seq_len_q, Lk = spec.seq_len_kv, d = spec.head_dim;
  const double scale = spec.effective_scale();
  Grads g;
  g.dq.assign(q.size(), 0.0);
  g.dk.assign(k.size(), 0.0);
  g.dv.assign(v.size(), 0.0);
  g.out.assign(q.size(), 0.0);
  std::vector<double> s(Lk), p(Lk);
  std::vector<char> allowed(Lk);

  for (std::uint64_t h = 0; h < spec.num_q_heads; ++h) {
    const std::uint64_t kvh = spec.kv_head(h);
    const double* kh = k.data() + kvh * Lk * d;
    const double* vh = v.data() + kvh * Lk * d;
    double* dkh = g.dk.data() + kvh * Lk * d;
    double* dvh = g.dv.data() + kvh * Lk * d;
    for (std::uint64_t i = 0; i < Lq; ++i) {
      const double* qi = q.data() + (h * Lq + i) * d;
      const double* doi = dout.data() + (h * Lq + i) * d;
      double* oi = g.out.data() + (h * Lq + i) * d;
      double* dqi = g.dq.data() + (h * Lq + i) * d;

      double mx = -std::numeric_limits<double>::infinity();
      for (std::uint64_t j = 0; j < Lk; ++j) {
        allowed[j] = spec.element_live(i, j) &&
                     mask.at(h, i / spec.block_rows, j / spec.block_cols) != BlockState::skipped;
        if (!allowed[j]) continue;
        s[j] = scale * detail::dot(qi, kh + j * d, d);
        mx = std::max(mx, s[j]);
      }
      if (mx == -std::numeric_limits<double>::infinity()) continue;
      double denom = 0.0;
      for (std::uint64_t j = 0; j < Lk; ++j) {
        p[j] = allowed[j] ? std::exp(s[j] - mx) : 0.0;
        denom += p[j];
      }
      for (std::uint64_t j = 0; j < Lk; ++j) {
        if (!allowed[j]) continue;
        p[j] /= denom;
        for (std::uint64_t e = 0; e < d; ++e) oi[e] += p[j] * vh[j * d + e];
      }
      const double Di = detail::dot(doi, oi, d);
      for (std::uint64_t j = 0; j < Lk; ++j) {
        if (!allowed[j]) continue;
        const double dp = detail::dot(doi, vh + j * d, d);
        const double ds = p[j] * (dp - Di) * scale;
        for (std::uint64_t e = 0; e < d; ++e) {
          dvh[j * d + e] += p[j] * doi[e];
          dqi[e] += ds * kh[j * d + e];
          dkh[j * d + e] += ds * qi[e];
        }
      }
    }
  }
  return g;
}

void check_upstream(const AttentionSpec& spec, const Tensor& d_out) {
  if (d_out.shape() != out_shape(spec)) {
    throw Error(ErrorKind::geometry, "dO shape does not match the attention output shape");
  }
  if (d_out.count_nonfinite() != 0) throw Error(ErrorKind::validation, "dO contains non-finite values");
}

}  // namespace

F64Forward blasst_forward_f64(const Tensor& q, const Tensor& k, const Tensor& v,
                              const AttentionSpec& spec) {
  check_inputs(spec, q, k, v);
  return forward_f64(q.to_f64(), k.to_f64(), v.to_f64(), spec);
}

GradBundle masked_attention_backward(const Tensor& q, const Tensor& k, const Tensor& v,
                                     const AttentionSpec& spec, const SkipMask& mask,
                                     const Tensor& d_out) {
  check_inputs(spec, q, k, v);
  check_upstream(spec, d_out);
  if (!mask.matches(spec)) throw Error(ErrorKind::geometry, "skip mask does not match the attention geometry");
  auto g = backward(q.to_f64(), k.to_f64(), v.to_f64(), spec, mask, d_out.to_f64());
  return GradBundle{Tensor(q.shape(), std::move(g.dq)), Tensor(k.shape(), std::move(g.dk)),
                    Tensor(v.shape(), std::move(g.dv)), mask};
}

ForwardBackwardResult blasst_forward_backward(const Tensor& q, const Tensor& k, const Tensor& v,
                                              const AttentionSpec& spec, const Tensor& d_out) {
  auto fwd = blasst_forward_f64(q, k, v, spec);
  auto grads = masked_attention_backward(q, k, v, spec, fwd.mask, d_out);
  return ForwardBackwardResult{std::move(fwd.output), std::move(grads), std::move(fwd.diagnostics)};
}

double grad_relative_error(double analytic, double fd) {
  const double denom = std::max({std::abs(fd), std::abs(analytic), kGradRelFloor});
  return std::abs(fd - analytic) / denom;
}

Tensor random_upstream_gradient(const AttentionSpec& spec, std::uint64_t seed) {
  const CounterRng rng(seed, kStreamUpstream);
  const Shape shape = out_shape(spec);
  std::vector<double> data(static_cast<std::size_t>(shape_numel(shape)));
  for (std::size_t n = 0; n < data.size(); ++n) data[n] = rng.normal(n);
  return Tensor(shape, std::move(data));
}

GradCheckReport gradient_check(const Tensor& q, const Tensor& k, const Tensor& v,
                               const AttentionSpec& spec, const Tensor& d_out,
                               std::uint64_t num_coords, double step, std::uint64_t seed) {
  if (!(step > 0.0) || !std::isfinite(step)) throw Error(ErrorKind::validation, "gradcheck step must be > 0");
  auto fb = blasst_forward_backward(q, k, v, spec, d_out);

  GradCheckReport rep;
  const auto f32 = blasst_forward(q, k, v, spec);
  rep.forward_deviation = max_relative_deviation(f32.output, fb.output);
  rep.masks_agree = f32.mask == fb.grads.mask;

  std::vector<double> inputs[3] = {q.to_f64(), k.to_f64(), v.to_f64()};
  const std::vector<double> grads[3] = {fb.grads.dq.to_f64(), fb.grads.dk.to_f64(), fb.grads.dv.to_f64()};
  const std::uint64_t total = inputs[0].size() + inputs[1].size() + inputs[2].size();
  const std::uint64_t want = std::min(num_coords, total);

  // Distinct flat indices over the concatenation Q | K | V.
  std::vector<std::uint64_t> picks;
  std::unordered_set<std::uint64_t> seen;
  const CounterRng rng(seed, kStreamCoords);
  for (std::uint64_t draw = 0; picks.size() < want; ++draw) {
    const std::uint64_t flat = want == total ? draw : rng.bits(draw) % total;
    if (seen.insert(flat).second) picks.push_back(flat);
  }

  const auto dO = d_out.to_f64();
  for (std::uint64_t flat : picks) {
    GradCheckEntry e;
    std::uint64_t local = flat;
    int which = 0;
    while (local >= inputs[which].size()) local -= inputs[which++].size();
    e.input = static_cast<GradInput>(which);
    e.index = local;
    e.analytic = grads[which][local];

    double& x = inputs[which][local];
    const double x0 = x;
    const double hi = x0 + step, lo = x0 - step;
    x = hi;
    const auto plus = forward_f64(inputs[0], inputs[1], inputs[2], spec);
    x = lo;
    const auto minus = forward_f64(inputs[0], inputs[1], inputs[2], spec);
    x = x0;

    e.finite_difference = inner_difference(plus.output, minus.output, dO) / (hi - lo);
    e.excluded = !(plus.mask == fb.grads.mask) || !(minus.mask == fb.grads.mask);
    e.rel_error = grad_relative_error(e.analytic, e.finite_difference);
    if (e.excluded) {
      ++rep.excluded;
    } else {
      ++rep.checked;
      rep.max_rel_error = std::max(rep.max_rel_error, e.rel_error);
    }
    rep.entries.push_back(e);
  }
  return rep;
}

}  // namespace blasst
