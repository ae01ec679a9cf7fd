// SPDX-FileCopyrightText: Copyright (c) 2026 blasst contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <variant>
#include <vector>

#include "blasst/tensor.hpp"

namespace blasst {

/// Q, K, V entries iid N(0, sigma^2).
struct IidGaussian {
  double sigma = 1.0;
};

/// Gaussian base plus attention sinks: the K rows listed in sink_cols get
/// sink_boost along u = (1, ..., 1) / sqrt(d), and every Q row gets a shared
/// sqrt(d) * u component so the sink scores dominate for all queries.
struct SinkBiased {
  double sigma = 1.0;
  std::vector<std::uint64_t> sink_cols;
  double sink_boost = 0.0;
};

/// Like SinkBiased but along the alternating-sign direction
/// w = (+1, -1, +1, ...) / sqrt(d), at arbitrary positions.
struct Needle {
  double sigma = 1.0;
  std::vector<std::uint64_t> needle_positions;
  double needle_boost = 0.0;
};

/// Heavy-tailed key salience. Each key carries an Exp(1) salience per
/// coordinate scaled by tail_scale; query rows are grouped into contiguous
/// segments and each segment attends along one coordinate axis
/// ((position / segment + head) mod d). Scaled scores then have an exponential
/// upper tail of rate 1 / tail_scale, shared by all rows of a segment.
struct Salience {
  double sigma = 0.25;
  double tail_scale = 1.0;
  std::uint64_t segment = 64;
};

using Distribution = std::variant<IidGaussian, SinkBiased, Needle, Salience>;

struct SyntheticWorkloadSpec {
  std::uint64_t seq_len = 0;
  std::uint64_t num_q_heads = 1;
  std::uint64_t num_kv_heads = 1;
  std::uint64_t head_dim = 0;
  std::uint64_t seed = 0;
  Distribution distribution = IidGaussian{};

  void validate() const;
};

struct Workload {
  Tensor q;  // [num_q_heads, seq_len, head_dim]
  Tensor k;  // [num_kv_heads, seq_len, head_dim]
  Tensor v;  // [num_kv_heads, seq_len, head_dim]
};

// PRNG streams used by the generator.
inline constexpr std::uint64_t kStreamQ = 1;
inline constexpr std::uint64_t kStreamK = 2;
inline constexpr std::uint64_t kStreamV = 3;
inline constexpr std::uint64_t kStreamSalience = 4;

/// Deterministic in the spec (seed included); emits f32 tensors.
Workload generate_workload(const SyntheticWorkloadSpec& spec);

}  // namespace blasst
