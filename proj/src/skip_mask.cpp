// SPDX-FileCopyrightText: Copyright (c) 2026 blasst contributors
// SPDX-License-Identifier: Apache-2.0

#include "blasst/skip_mask.hpp"

#include <algorithm>
#include <cctype>

#include "blasst/error.hpp"
#include "blasst/json_io.hpp"

namespace blasst {

namespace {

char state_char(BlockState s) {
  switch (s) {
    case BlockState::kept: return 'K';
    case BlockState::skipped: return 'S';
    case BlockState::masked_out: return 'M';
  }
  return '?';
}

constexpr const char* kMaskOrder = "head,block_row,block_col";

}  // namespace

SkipMask::SkipMask(std::uint64_t heads, std::uint64_t tiles_q, std::uint64_t tiles_kv, BlockState fill)
    : heads_(heads), tiles_q_(tiles_q), tiles_kv_(tiles_kv),
      states_(static_cast<std::size_t>(heads * tiles_q * tiles_kv), fill) {}

SkipMask SkipMask::for_spec(const AttentionSpec& spec, BlockState fill) {
  SkipMask m(spec.num_q_heads, spec.tiles_q(), spec.tiles_kv(), fill);
  for (std::uint64_t i = 0; i < m.tiles_q_; ++i) {
    for (std::uint64_t j = 0; j < m.tiles_kv_; ++j) {
      if (!spec.block_masked_out(i, j)) continue;
      for (std::uint64_t h = 0; h < m.heads_; ++h) m.set(h, i, j, BlockState::masked_out);
    }
  }
  return m;
}

std::uint64_t SkipMask::count(BlockState s) const {
  return static_cast<std::uint64_t>(std::count(states_.begin(), states_.end(), s));
}

double SkipMask::sparsity() const {
  auto skipped = count(BlockState::skipped);
  auto countable = skipped + count(BlockState::kept);
  return countable == 0 ? 0.0 : static_cast<double>(skipped) / static_cast<double>(countable);
}

bool SkipMask::matches(const AttentionSpec& spec) const {
  return heads_ == spec.num_q_heads && tiles_q_ == spec.tiles_q() && tiles_kv_ == spec.tiles_kv();
}

std::string encode_rle(const std::vector<BlockState>& states) {
  std::string out;
  std::size_t i = 0;
  while (i < states.size()) {
    std::size_t j = i;
    while (j < states.size() && states[j] == states[i]) ++j;
    out += std::to_string(j - i);
    out += state_char(states[i]);
    i = j;
  }
  return out;
}

std::vector<BlockState> decode_rle(const std::string& rle) {
  std::vector<BlockState> out;
  std::size_t i = 0;
  while (i < rle.size()) {
    std::size_t j = i;
    while (j < rle.size() && std::isdigit(static_cast<unsigned char>(rle[j]))) ++j;
    if (j == i || j == rle.size()) throw Error(ErrorKind::format, "skip mask: malformed run-length string");
    std::uint64_t n = std::stoull(rle.substr(i, j - i));
    BlockState s;
    switch (rle[j]) {
      case 'K': s = BlockState::kept; break;
      case 'S': s = BlockState::skipped; break;
      case 'M': s = BlockState::masked_out; break;
      default: throw Error(ErrorKind::format, std::string("skip mask: unknown state '") + rle[j] + "'");
    }
    out.insert(out.end(), static_cast<std::size_t>(n), s);
    i = j + 1;
  }
  return out;
}

std::string SkipMask::to_json() const {
  Json j;
  j["dims"] = {heads_, tiles_q_, tiles_kv_};
  j["order"] = kMaskOrder;
  j["states"] = encode_rle(states_);
  return j.dump();
}

SkipMask SkipMask::from_json(const std::string& text) {
  auto j = parse_json(text, "skip mask");
  try {
    auto dims = j.at("dims").get<std::vector<std::uint64_t>>();
    if (dims.size() != 3) throw Error(ErrorKind::format, "skip mask: dims must have 3 entries");
    if (j.at("order").get<std::string>() != kMaskOrder) {
      throw Error(ErrorKind::format, "skip mask: unsupported order");
    }
    SkipMask m(dims[0], dims[1], dims[2]);
    m.states_ = decode_rle(j.at("states").get<std::string>());
    if (m.states_.size() != dims[0] * dims[1] * dims[2]) {
      throw Error(ErrorKind::format, "skip mask: state count does not match dims");
    }
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::format, std::string("skip mask: ") + e.what());
  }
}

}  // namespace blasst
