// SPDX-FileCopyrightText: Copyright (c) 2026 blasst contributors
// SPDX-License-Identifier: Apache-2.0

#include "blasst/rng.hpp"

#include <cmath>
#include <numbers>

namespace blasst {

namespace {
constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;
constexpr int kStreamShift = 40;
}  // namespace

std::uint64_t splitmix64_mix(std::uint64_t x) noexcept {
  std::uint64_t z = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::uint64_t CounterRng::bits(std::uint64_t index) const noexcept {
  std::uint64_t counter = (stream_ << kStreamShift) + index + 1;
  return splitmix64_mix(seed_ + counter * kGolden);
}

double CounterRng::uniform(std::uint64_t index) const noexcept {
  return static_cast<double>(bits(index) >> 11) * 0x1.0p-53;
}

double CounterRng::normal(std::uint64_t index) const noexcept {
  double u0 = uniform(2 * index);
  double u1 = uniform(2 * index + 1);
  return std::sqrt(-2.0 * std::log(1.0 - u0)) * std::cos(2.0 * std::numbers::pi * u1);
}

double CounterRng::exponential(std::uint64_t index) const noexcept {
  return -std::log(1.0 - uniform(index));
}

}  // namespace blasst
