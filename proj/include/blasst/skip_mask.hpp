// SPDX-FileCopyrightText: Copyright (c) 2026 blasst contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "blasst/attention_spec.hpp"

namespace blasst {

enum class BlockState : std::uint8_t { kept, skipped, masked_out };

/// Keep/skip decision per (head, query tile, key tile).
class SkipMask {
 public:
  SkipMask() = default;
  SkipMask(std::uint64_t heads, std::uint64_t tiles_q, std::uint64_t tiles_kv,
           BlockState fill = BlockState::kept);

  /// Fresh grid for spec: masked_out where the element mask kills the whole
  /// tile, `fill` elsewhere.
  static SkipMask for_spec(const AttentionSpec& spec, BlockState fill = BlockState::kept);

  std::uint64_t heads() const { return heads_; }
  std::uint64_t tiles_q() const { return tiles_q_; }
  std::uint64_t tiles_kv() const { return tiles_kv_; }
  std::size_t size() const { return states_.size(); }

  BlockState at(std::uint64_t head, std::uint64_t row, std::uint64_t col) const {
    return states_[index(head, row, col)];
  }
  void set(std::uint64_t head, std::uint64_t row, std::uint64_t col, BlockState s) {
    states_[index(head, row, col)] = s;
  }
  std::size_t index(std::uint64_t head, std::uint64_t row, std::uint64_t col) const {
    return static_cast<std::size_t>((head * tiles_q_ + row) * tiles_kv_ + col);
  }
  const std::vector<BlockState>& states() const { return states_; }

  std::uint64_t count(BlockState s) const;
  // skipped / (kept + skipped); 0 when nothing is countable.
  double sparsity() const;

  bool matches(const AttentionSpec& spec) const;

  // {"dims":[H,Tr,Tc],"order":"head,block_row,block_col","states":"<rle>"}
  // where <rle> is runs like "12K3S5M" (K kept, S skipped, M masked_out).
  std::string to_json() const;
  static SkipMask from_json(const std::string& text);

  bool operator==(const SkipMask&) const = default;

 private:
  std::uint64_t heads_ = 0;
  std::uint64_t tiles_q_ = 0;
  std::uint64_t tiles_kv_ = 0;
  std::vector<BlockState> states_;
};

std::string encode_rle(const std::vector<BlockState>& states);
std::vector<BlockState> decode_rle(const std::string& rle);

}  // namespace blasst
