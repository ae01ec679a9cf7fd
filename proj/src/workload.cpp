// SPDX-FileCopyrightText: Copyright (c) 2026 blasst contributors
// SPDX-License-Identifier: Apache-2.0

#include "blasst/workload.hpp"

#include <cmath>
#include <string>

#include "blasst/error.hpp"
#include "blasst/rng.hpp"

namespace blasst {

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw Error(ErrorKind::validation, "workload: " + what);
}

void check_positions(const std::vector<std::uint64_t>& pos, std::uint64_t seq_len, const char* field) {
  for (auto p : pos) {
    require(p < seq_len, std::string(field) + " entry " + std::to_string(p) + " is outside seq_len " +
                             std::to_string(seq_len));
  }
}

// Standard-normal fill of a [heads, seq_len, d] tensor scaled by sigma.
std::vector<double> gaussian(std::uint64_t seed, std::uint64_t stream, std::size_t n, double sigma) {
  CounterRng rng(seed, stream);
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = sigma * rng.normal(i);
  return out;
}

}  // namespace

void SyntheticWorkloadSpec::validate() const {
  require(seq_len >= 1, "seq_len must be >= 1");
  require(head_dim >= 1, "head_dim must be >= 1");
  require(num_kv_heads >= 1, "num_kv_heads must be >= 1");
  require(num_q_heads >= 1 && num_q_heads % num_kv_heads == 0,
          "num_q_heads must be a positive multiple of num_kv_heads");
  std::visit(
      [&](const auto& d) {
        using D = std::decay_t<decltype(d)>;
        require(std::isfinite(d.sigma) && d.sigma >= 0.0, "sigma must be finite and >= 0");
        if constexpr (std::is_same_v<D, SinkBiased>) {
          require(std::isfinite(d.sink_boost), "sink_boost must be finite");
          check_positions(d.sink_cols, seq_len, "sink_cols");
        } else if constexpr (std::is_same_v<D, Needle>) {
          require(std::isfinite(d.needle_boost), "needle_boost must be finite");
          check_positions(d.needle_positions, seq_len, "needle_positions");
        } else if constexpr (std::is_same_v<D, Salience>) {
          require(std::isfinite(d.tail_scale) && d.tail_scale >= 0.0, "tail_scale must be finite and >= 0");
          require(d.segment >= 1, "segment must be >= 1");
        }
      },
      distribution);
}

Workload generate_workload(const SyntheticWorkloadSpec& spec) {
  spec.validate();
  const std::uint64_t L = spec.seq_len;
  const std::uint64_t d = spec.head_dim;
  const auto nq = static_cast<std::size_t>(spec.num_q_heads * L * d);
  const auto nkv = static_cast<std::size_t>(spec.num_kv_heads * L * d);
  const double sigma = std::visit([](const auto& x) { return x.sigma; }, spec.distribution);
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(d));

  auto q = gaussian(spec.seed, kStreamQ, nq, sigma);
  auto k = gaussian(spec.seed, kStreamK, nkv, sigma);
  auto v = gaussian(spec.seed, kStreamV, nkv, sigma);

  // Adds `boost * dir` to the listed K rows and sqrt(d) * dir to every Q row.
  auto plant = [&](const std::vector<std::uint64_t>& rows, double boost, auto dir) {
    for (std::size_t i = 0; i < nq; ++i) q[i] += std::sqrt(static_cast<double>(d)) * dir(i % d);
    for (std::uint64_t g = 0; g < spec.num_kv_heads; ++g) {
      for (auto r : rows) {
        for (std::uint64_t c = 0; c < d; ++c) k[(g * L + r) * d + c] += boost * dir(c);
      }
    }
  };

  std::visit(
      [&](const auto& dist) {
        using D = std::decay_t<decltype(dist)>;
        if constexpr (std::is_same_v<D, SinkBiased>) {
          plant(dist.sink_cols, dist.sink_boost, [&](std::uint64_t) { return inv_sqrt_d; });
        } else if constexpr (std::is_same_v<D, Needle>) {
          plant(dist.needle_positions, dist.needle_boost,
                [&](std::uint64_t c) { return (c % 2 == 0 ? 1.0 : -1.0) * inv_sqrt_d; });
        } else if constexpr (std::is_same_v<D, Salience>) {
          const double lift = std::sqrt(static_cast<double>(d));
          for (std::uint64_t h = 0; h < spec.num_q_heads; ++h) {
            for (std::uint64_t i = 0; i < L; ++i) {
              std::uint64_t axis = (i / dist.segment + h) % d;
              q[(h * L + i) * d + axis] += lift;
            }
          }
          CounterRng rng(spec.seed, kStreamSalience);
          for (std::size_t i = 0; i < nkv; ++i) k[i] += dist.tail_scale * rng.exponential(i);
        }
      },
      spec.distribution);

  auto to_f32 = [](const std::vector<double>& x) { return std::vector<float>(x.begin(), x.end()); };
  return Workload{Tensor({spec.num_q_heads, L, d}, to_f32(q)), Tensor({spec.num_kv_heads, L, d}, to_f32(k)),
                  Tensor({spec.num_kv_heads, L, d}, to_f32(v))};
}

}  // namespace blasst
