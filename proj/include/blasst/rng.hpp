// SPDX-FileCopyrightText: Copyright (c) 2026 blasst contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>

namespace blasst {

// Counter-based generator: every draw is a pure function of
// (seed, stream, index), so any element can be regenerated independently and
// results never depend on call order.
//
//   x = seed + (stream * 2^40 + index + 1) * 0x9E3779B97F4A7C15   (mod 2^64)
//   z = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9
//   z = (z ^ (z >> 27)) * 0x94D049BB133111EB
//   bits = z ^ (z >> 31)
//
// This is the SplitMix64 finalizer applied to a Weyl sequence position.
class CounterRng {
 public:
  CounterRng(std::uint64_t seed, std::uint64_t stream) : seed_(seed), stream_(stream) {}

  std::uint64_t bits(std::uint64_t index) const noexcept;

  // (bits >> 11) * 2^-53, in [0, 1).
  double uniform(std::uint64_t index) const noexcept;

  // Box-Muller on draws 2i and 2i+1: sqrt(-2 ln(1 - u0)) * cos(2 pi u1).
  double normal(std::uint64_t index) const noexcept;

  // -ln(1 - u), rate 1.
  double exponential(std::uint64_t index) const noexcept;

 private:
  std::uint64_t seed_;
  std::uint64_t stream_;
};

std::uint64_t splitmix64_mix(std::uint64_t x) noexcept;

}  // namespace blasst
