// SPDX-FileCopyrightText: Copyright (c) 2026 blasst contributors
// SPDX-License-Identifier: Apache-2.0

#include "blasst/blasst_core.hpp"

#include <array>
#include <cmath>
#include <limits>
#include <sstream>

#include "blasst/error.hpp"
#include "blasst/json_io.hpp"
#include "blocked_forward.hpp"

namespace blasst {

SkipDecision block_skip_decision(std::span<const double> block_row_maxes,
                                 std::span<const double> running_maxes, double ln_lam) {
  if (block_row_maxes.size() != running_maxes.size()) {
    throw Error(ErrorKind::validation, "block_skip_decision: row count mismatch");
  }
  for (std::size_t r = 0; r < block_row_maxes.size(); ++r) {
    const double bm = block_row_maxes[r];
    if (bm == -std::numeric_limits<double>::infinity()) continue;
    if (!(bm - running_maxes[r] < ln_lam)) return SkipDecision::keep;
  }
  return SkipDecision::skip;
}

namespace {

SparsityRow make_row(std::optional<std::uint64_t> head, std::optional<std::uint64_t> block_row,
                     std::uint64_t kept, std::uint64_t skipped, std::uint64_t masked) {
  SparsityRow r{head, block_row, kept, skipped, masked, 0.0};
  const auto countable = kept + skipped;
  r.sparsity = countable == 0 ? 0.0 : static_cast<double>(skipped) / static_cast<double>(countable);
  return r;
}

std::string field(const std::optional<std::uint64_t>& v) {
  return v ? std::to_string(*v) : std::string("all");
}

}  // namespace

SparsityReport sparsity_report(const SkipMask& mask, ReportLayout layout) {
  SparsityReport rep;
  rep.layout = layout;
  const auto H = mask.heads(), Tq = mask.tiles_q(), Tk = mask.tiles_kv();
  // counts[h][i][state]
  std::vector<std::array<std::uint64_t, 3>> counts(static_cast<std::size_t>(H * Tq), {0, 0, 0});
  for (std::uint64_t h = 0; h < H; ++h)
    for (std::uint64_t i = 0; i < Tq; ++i)
      for (std::uint64_t j = 0; j < Tk; ++j)
        ++counts[h * Tq + i][static_cast<std::size_t>(mask.at(h, i, j))];

  std::array<std::uint64_t, 3> total{0, 0, 0};
  for (const auto& c : counts)
    for (int s = 0; s < 3; ++s) total[s] += c[s];

  switch (layout) {
    case ReportLayout::global:
      rep.rows.push_back(make_row(std::nullopt, std::nullopt, total[0], total[1], total[2]));
      break;
    case ReportLayout::per_head:
      for (std::uint64_t h = 0; h < H; ++h) {
        std::array<std::uint64_t, 3> t{0, 0, 0};
        for (std::uint64_t i = 0; i < Tq; ++i)
          for (int s = 0; s < 3; ++s) t[s] += counts[h * Tq + i][s];
        rep.rows.push_back(make_row(h, std::nullopt, t[0], t[1], t[2]));
      }
      break;
    case ReportLayout::per_block_row:
      for (std::uint64_t h = 0; h < H; ++h)
        for (std::uint64_t i = 0; i < Tq; ++i) {
          const auto& c = counts[h * Tq + i];
          rep.rows.push_back(make_row(h, i, c[0], c[1], c[2]));
        }
      break;
  }
  rep.global_sparsity = make_row(std::nullopt, std::nullopt, total[0], total[1], total[2]).sparsity;
  if (total[0] + total[1] == 0) {
    rep.diagnostics.push_back("no countable blocks; sparsity reported as 0");
  }
  return rep;
}

std::string SparsityReport::to_csv() const {
  std::ostringstream os;
  os << "head,block_row,kept,skipped,masked,sparsity\n";
  for (const auto& r : rows) {
    os << field(r.head) << ',' << field(r.block_row) << ',' << r.kept << ',' << r.skipped << ','
       << r.masked << ',' << format_double(r.sparsity) << '\n';
  }
  return os.str();
}

ForwardResult blasst_forward(const Tensor& q, const Tensor& k, const Tensor& v,
                             const AttentionSpec& spec) {
  check_inputs(spec, q, k, v);
  const auto qf = q.to_f32(), kf = k.to_f32(), vf = v.to_f32();
  auto run = detail::blocked_forward<float>(qf, kf, vf, spec, ln_lambda(spec.lambda()), true);

  std::vector<float> out(run.out.size());
  for (std::size_t n = 0; n < out.size(); ++n) out[n] = static_cast<float>(run.out[n]);

  auto report = sparsity_report(run.mask, ReportLayout::global);
  return ForwardResult{Tensor({spec.num_q_heads, spec.seq_len_q, spec.head_dim}, std::move(out)),
                       std::move(run.mask),
                       std::move(report),
                       std::move(run.margins),
                       std::move(run.row_max),
                       std::move(run.diagnostics),
                       spec.warnings()};
}

std::uint64_t DecisionProfile::countable() const {
  return geometry.size() - geometry.count(BlockState::masked_out);
}

std::uint64_t DecisionProfile::skipped_at(double lambda) const {
  const double t = ln_lambda(lambda);
  std::uint64_t n = 0;
  for (double m : margins)
    if (m < t) ++n;  // NaN (masked) never compares less
  return n;
}

double DecisionProfile::sparsity_at(double lambda) const {
  const auto c = countable();
  return c == 0 ? 0.0 : static_cast<double>(skipped_at(lambda)) / static_cast<double>(c);
}

SkipMask DecisionProfile::mask_at(double lambda) const {
  const double t = ln_lambda(lambda);
  SkipMask out = geometry;
  for (std::uint64_t h = 0; h < out.heads(); ++h)
    for (std::uint64_t i = 0; i < out.tiles_q(); ++i)
      for (std::uint64_t j = 0; j < out.tiles_kv(); ++j)
        if (margins[out.index(h, i, j)] < t) out.set(h, i, j, BlockState::skipped);
  return out;
}

DecisionProfile decision_profile(const Tensor& q, const Tensor& k, const Tensor& v,
                                 const AttentionSpec& spec) {
  check_inputs(spec, q, k, v);
  const auto qf = q.to_f32(), kf = k.to_f32(), vf = v.to_f32();
  // ln(0) = -inf: nothing is skipped, so the mask holds kept / masked_out only.
  auto run = detail::blocked_forward<float>(qf, kf, vf, spec, ln_lambda(0.0), false);
  return DecisionProfile{std::move(run.mask), std::move(run.margins)};
}

}  // namespace blasst
