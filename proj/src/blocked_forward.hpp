// SPDX-FileCopyrightText: Copyright (c) 2026 blasst contributors
// SPDX-License-Identifier: Apache-2.0

// Blocked online-softmax forward pass with threshold skipping, shared by the
// f32 engine and the f64 verification path.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "blasst/attention_spec.hpp"
#include "blasst/diagnostics.hpp"
#include "blasst/skip_mask.hpp"

namespace blasst::detail {

// Four partial sums in a fixed order; accumulation is always f64.
template <typename T>
inline double dot(const T* a, const T* b, std::uint64_t n) {
  double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
  std::uint64_t c = 0;
  for (; c + 4 <= n; c += 4) {
    s0 += static_cast<double>(a[c]) * static_cast<double>(b[c]);
    s1 += static_cast<double>(a[c + 1]) * static_cast<double>(b[c + 1]);
    s2 += static_cast<double>(a[c + 2]) * static_cast<double>(b[c + 2]);
    s3 += static_cast<double>(a[c + 3]) * static_cast<double>(b[c + 3]);
  }
  for (; c < n; ++c) s0 += static_cast<double>(a[c]) * static_cast<double>(b[c]);
  return (s0 + s1) + (s2 + s3);
}

template <typename Score>
struct BlockedOutput {
  std::vector<double> out;  // [Hq, Lq, d]; empty in decisions-only mode
  SkipMask mask;
  std::vector<double> margins;
  std::vector<Score> row_max;  // [Hq, Lq]
  std::vector<RowDiagnostic> diagnostics;
};

/// Runs the blocked pass. Score is the precision of scores and P~; the row
/// denominator and output accumulators are f64. With accumulate == false only
/// the running maxes and decision margins are computed.
template <typename Score>
BlockedOutput<Score> blocked_forward(const std::vector<Score>& q, const std::vector<Score>& k,
                                     const std::vector<Score>& v, const AttentionSpec& spec,
                                     double ln_lam, bool accumulate) {
  constexpr Score kNegInf = -std::numeric_limits<Score>::infinity();
  const std::uint64_t Lq = spec.seq_len_q, Lk = spec.seq_len_kv, d = spec.head_dim;
  const std::uint64_t Br = spec.block_rows, Bc = spec.block_cols;
  const double scale = spec.effective_scale();
  const auto order = spec.column_sequence();

  BlockedOutput<Score> res;
  res.mask = SkipMask::for_spec(spec);
  res.margins.assign(res.mask.size(), std::numeric_limits<double>::quiet_NaN());
  res.row_max.assign(static_cast<std::size_t>(spec.num_q_heads * Lq), kNegInf);
  if (accumulate) res.out.assign(static_cast<std::size_t>(spec.num_q_heads * Lq * d), 0.0);

  std::vector<Score> m(Br), m_new(Br), block_max(Br);
  std::vector<Score> s(Br * Bc);
  std::vector<double> l(Br), o(Br * d);

  for (std::uint64_t h = 0; h < spec.num_q_heads; ++h) {
    const std::uint64_t g = spec.kv_head(h);
    const Score* kh = k.data() + g * Lk * d;
    const Score* vh = v.data() + g * Lk * d;
    for (std::uint64_t i = 0; i < spec.tiles_q(); ++i) {
      const std::uint64_t r0 = i * Br, nr = std::min(Br, Lq - r0);
      const Score* qt = q.data() + (h * Lq + r0) * d;
      std::fill(m.begin(), m.end(), kNegInf);
      std::fill(l.begin(), l.end(), 0.0);
      std::fill(o.begin(), o.end(), 0.0);

      for (std::uint64_t j : order) {
        if (res.mask.at(h, i, j) == BlockState::masked_out) continue;
        const std::uint64_t c0 = j * Bc, nc = std::min(Bc, Lk - c0);

        // Scores with element masking, block row maxes, running max update.
        double margin = -std::numeric_limits<double>::infinity();
        bool any_vote = false;
        for (std::uint64_t r = 0; r < nr; ++r) {
          Score row_best = kNegInf;
          for (std::uint64_t c = 0; c < nc; ++c) {
            Score val = kNegInf;
            if (spec.element_live(r0 + r, c0 + c)) {
              val = static_cast<Score>(scale * dot(qt + r * d, kh + (c0 + c) * d, d));
              row_best = std::max(row_best, val);
            }
            s[r * Bc + c] = val;
          }
          block_max[r] = row_best;
          m_new[r] = std::max(m[r], row_best);
          if (row_best != kNegInf) {
            any_vote = true;
            margin = std::max(margin, static_cast<double>(row_best) - static_cast<double>(m_new[r]));
          }
        }
        if (!any_vote) {
          res.mask.set(h, i, j, BlockState::masked_out);
          continue;
        }
        const auto cell = res.mask.index(h, i, j);
        res.margins[cell] = margin;
        const bool skip = margin < ln_lam;
        res.mask.set(h, i, j, skip ? BlockState::skipped : BlockState::kept);

        if (!skip && accumulate) {
          for (std::uint64_t r = 0; r < nr; ++r) {
            if (m_new[r] == kNegInf) continue;
            const double alpha = m[r] == kNegInf
                                     ? 0.0
                                     : std::exp(static_cast<double>(m[r]) - static_cast<double>(m_new[r]));
            double row_sum = 0.0;
            double* orow = &o[r * d];
            for (std::uint64_t c = 0; c < d; ++c) orow[c] *= alpha;
            for (std::uint64_t c = 0; c < nc; ++c) {
              const Score sv = s[r * Bc + c];
              if (sv == kNegInf) continue;
              const Score p =
                  static_cast<Score>(std::exp(static_cast<double>(sv) - static_cast<double>(m_new[r])));
              const double pd = static_cast<double>(p);
              row_sum += pd;
              const Score* vrow = vh + (c0 + c) * d;
              for (std::uint64_t e = 0; e < d; ++e) orow[e] += pd * static_cast<double>(vrow[e]);
            }
            l[r] = alpha * l[r] + row_sum;
          }
        }
        std::copy(m_new.begin(), m_new.begin() + static_cast<std::ptrdiff_t>(nr), m.begin());
      }

      for (std::uint64_t r = 0; r < nr; ++r) {
        res.row_max[h * Lq + r0 + r] = m[r];
        if (!accumulate) continue;
        double* dst = &res.out[(h * Lq + r0 + r) * d];
        if (l[r] > 0.0) {
          for (std::uint64_t e = 0; e < d; ++e) dst[e] = o[r * d + e] / l[r];
        } else {
          res.diagnostics.push_back(
              {h, r0 + r, "softmax denominator is zero (all blocks skipped or masked); output row set to zero"});
        }
      }
    }
  }
  return res;
}

}  // namespace blasst::detail
