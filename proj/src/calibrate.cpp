// SPDX-FileCopyrightText: Copyright (c) 2026 blasst contributors
// SPDX-License-Identifier: Apache-2.0

#include "blasst/calibrate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <sstream>

#include "blasst/error.hpp"
#include "blasst/json_io.hpp"

namespace blasst {

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw Error(ErrorKind::validation, what);
}

}  // namespace

void CalibrationConfig::validate() const {
  require(target_sparsity > 0.0 && target_sparsity < 1.0,
          "calibration.target_sparsity must be in (0, 1)");
  require(tolerance > 0.0 && tolerance < 0.5, "calibration.tolerance must be in (0, 0.5)");
  require(!lambda_grid.empty(), "calibration.lambda_grid must not be empty");
  for (std::size_t n = 0; n < lambda_grid.size(); ++n) {
    require(std::isfinite(lambda_grid[n]) && lambda_grid[n] > 0.0,
            "calibration.lambda_grid values must be finite and > 0");
    require(n == 0 || lambda_grid[n - 1] < lambda_grid[n],
            "calibration.lambda_grid must be sorted strictly ascending");
  }
  require(!lengths.empty(), "calibration.lengths must not be empty");
  require(std::set<std::uint64_t>(lengths.begin(), lengths.end()).size() == lengths.size(),
          "calibration.lengths must be distinct");
  for (auto L : lengths) {
    require(L >= 2 * attention.block_cols,
            "calibration.lengths must be >= 2 * block_cols (got " + std::to_string(L) + ")");
  }
  require(samples_per_length >= 1, "calibration.samples_per_length must be >= 1");
  workload_for(lengths.front(), 0).validate();
  attention_for(lengths.front()).validate();
}

SyntheticWorkloadSpec CalibrationConfig::workload_for(std::uint64_t length, std::uint64_t sample) const {
  SyntheticWorkloadSpec w = workload;
  w.seq_len = length;
  w.seed = workload.seed + sample;
  return w;
}

AttentionSpec CalibrationConfig::attention_for(std::uint64_t length) const {
  AttentionSpec a = attention;
  a.seq_len_q = length;
  a.seq_len_kv = length;
  a.num_q_heads = workload.num_q_heads;
  a.num_kv_heads = workload.num_kv_heads;
  a.head_dim = workload.head_dim;
  return a;
}

std::vector<double> log_space(double lo, double hi, std::size_t count) {
  if (count == 0) return {};
  if (count == 1) return {lo};
  std::vector<double> out(count);
  const double a = std::log10(lo), b = std::log10(hi);
  for (std::size_t n = 0; n < count; ++n) {
    out[n] = std::pow(10.0, a + (b - a) * static_cast<double>(n) / static_cast<double>(count - 1));
  }
  out.front() = lo;
  out.back() = hi;
  return out;
}

std::vector<double> default_lambda_grid() { return log_space(1e-6, 1e-1, 25); }

LengthProfile::LengthProfile(std::uint64_t length, std::vector<DecisionProfile> samples)
    : length_(length), samples_(std::move(samples)) {}

double LengthProfile::mean_sparsity(double lambda) const {
  double sum = 0.0;
  for (const auto& s : samples_) sum += s.sparsity_at(lambda);
  return samples_.empty() ? 0.0 : sum / static_cast<double>(samples_.size());
}

double LengthProfile::sparsity_spread(double lambda) const {
  if (samples_.size() < 2) return 0.0;
  const double mean = mean_sparsity(lambda);
  double ss = 0.0;
  for (const auto& s : samples_) {
    const double d = s.sparsity_at(lambda) - mean;
    ss += d * d;
  }
  return std::sqrt(ss / static_cast<double>(samples_.size()));
}

LengthProfile profile_length(const CalibrationConfig& cfg, std::uint64_t length) {
  const auto spec = cfg.attention_for(length);
  std::vector<DecisionProfile> samples;
  samples.reserve(cfg.samples_per_length);
  for (std::uint64_t s = 0; s < cfg.samples_per_length; ++s) {
    const auto w = generate_workload(cfg.workload_for(length, s));
    samples.push_back(decision_profile(w.q, w.k, w.v, spec));
  }
  return LengthProfile(length, std::move(samples));
}

std::map<std::uint64_t, LengthProfile> profile_lengths(const CalibrationConfig& cfg,
                                                       const std::vector<std::uint64_t>& lengths) {
  std::map<std::uint64_t, LengthProfile> out;
  for (auto L : lengths) out.emplace(L, profile_length(cfg, L));
  return out;
}

double measure_sparsity(double lambda, std::uint64_t length, const CalibrationConfig& cfg) {
  auto spec = cfg.attention_for(length);
  spec.threshold = ThresholdPolicy::fixed(lambda);
  double sum = 0.0;
  for (std::uint64_t s = 0; s < cfg.samples_per_length; ++s) {
    const auto w = generate_workload(cfg.workload_for(length, s));
    sum += blasst_forward(w.q, w.k, w.v, spec).report.global_sparsity;
  }
  return sum / static_cast<double>(cfg.samples_per_length);
}

double fit_through_origin(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.empty()) {
    throw Error(ErrorKind::validation, "fit_through_origin needs equal, non-empty x and y");
  }
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t n = 0; n < x.size(); ++n) {
    sxy += x[n] * y[n];
    sxx += x[n] * x[n];
  }
  if (sxx == 0.0) throw Error(ErrorKind::validation, "fit_through_origin: all x are zero");
  return sxy / sxx;
}

CalibrationFit fit_points(const std::vector<CalibrationPoint>& points) {
  CalibrationFit fit;
  fit.points = points;
  std::sort(fit.points.begin(), fit.points.end(),
            [](const auto& a, const auto& b) { return a.length < b.length; });
  std::vector<double> x, y;
  for (const auto& p : fit.points) {
    x.push_back(p.inv_length);
    y.push_back(p.lambda_best);
  }
  fit.a = fit_through_origin(x, y);
  for (const auto& p : fit.points) {
    fit.max_abs_residual = std::max(fit.max_abs_residual, std::abs(p.lambda_best - fit.a * p.inv_length));
  }
  return fit;
}

CalibrationFit calibrate(const CalibrationConfig& cfg,
                         const std::map<std::uint64_t, LengthProfile>& profiles) {
  cfg.validate();
  std::vector<CalibrationPoint> accepted, rejected;
  for (auto L : cfg.lengths) {
    const auto it = profiles.find(L);
    if (it == profiles.end()) {
      throw Error(ErrorKind::validation, "no decision profile for length " + std::to_string(L));
    }
    CalibrationPoint best{L, 1.0 / static_cast<double>(L), 0.0, 0.0,
                          std::numeric_limits<double>::infinity()};
    for (double lam : cfg.lambda_grid) {
      const double s = it->second.mean_sparsity(lam);
      const double gap = std::abs(s - cfg.target_sparsity);
      if (gap < best.gap) {  // strict: ties keep the smaller lambda
        best.lambda_best = lam;
        best.achieved_sparsity = s;
        best.gap = gap;
      }
    }
    (best.gap < cfg.tolerance ? accepted : rejected).push_back(best);
  }

  if (accepted.empty()) {
    std::ostringstream os;
    os << "calibration failed: no length reached |sparsity - " << format_double(cfg.target_sparsity)
       << "| < " << format_double(cfg.tolerance) << "\nlength,lambda_best,achieved,gap\n";
    for (const auto& p : rejected) {
      os << p.length << ',' << format_double(p.lambda_best) << ',' << format_double(p.achieved_sparsity)
         << ',' << format_double(p.gap) << '\n';
    }
    throw Error(ErrorKind::calibration_failed, os.str());
  }

  CalibrationFit fit = fit_points(accepted);
  fit.target_sparsity = cfg.target_sparsity;
  fit.tolerance = cfg.tolerance;
  fit.rejected = rejected;
  for (const auto& p : rejected) fit.rejected_lengths.push_back(p.length);
  std::sort(fit.rejected_lengths.begin(), fit.rejected_lengths.end());
  return fit;
}

CalibrationFit calibrate(const CalibrationConfig& cfg) {
  cfg.validate();
  return calibrate(cfg, profile_lengths(cfg, cfg.lengths));
}

std::vector<StabilityRow> stability_eval(const CalibrationFit& fit, double fixed_lambda,
                                         const std::map<std::uint64_t, LengthProfile>& profiles,
                                         double target) {
  std::vector<StabilityRow> rows;
  for (const auto& [L, prof] : profiles) {
    const double cal_lambda = ThresholdPolicy::calibrated(fit.a).resolve(L);
    for (auto [mode, lam] : {std::pair{"fixed", fixed_lambda}, std::pair{"calibrated", cal_lambda}}) {
      StabilityRow r;
      r.length = L;
      r.mode = mode;
      r.lambda = lam;
      r.achieved = prof.mean_sparsity(lam);
      r.target = target;
      r.deviation = r.achieved - target;
      r.spread = prof.sparsity_spread(lam);
      rows.push_back(r);
    }
  }
  return rows;
}

std::vector<StabilityRow> stability_eval(const CalibrationFit& fit, double fixed_lambda,
                                         const std::vector<std::uint64_t>& lengths,
                                         const CalibrationConfig& cfg) {
  for (auto L : lengths) {
    require(L >= 1, "stability lengths must be >= 1");
  }
  return stability_eval(fit, fixed_lambda, profile_lengths(cfg, lengths), cfg.target_sparsity);
}

std::string stability_csv(const std::vector<StabilityRow>& rows) {
  std::ostringstream os;
  os << "length,mode,lambda,achieved,target,deviation\n";
  for (const auto& r : rows) {
    os << r.length << ',' << r.mode << ',' << format_double(r.lambda) << ',' << format_double(r.achieved)
       << ',' << format_double(r.target) << ',' << format_double(r.deviation) << '\n';
  }
  return os.str();
}

std::pair<double, double> best_fixed_lambda(const std::map<std::uint64_t, LengthProfile>& profiles,
                                            double target, const std::vector<double>& candidates) {
  if (candidates.empty()) throw Error(ErrorKind::validation, "best_fixed_lambda: no candidates");
  std::pair<double, double> best{candidates.front(), std::numeric_limits<double>::infinity()};
  for (double lam : candidates) {
    double worst = 0.0;
    for (const auto& [L, prof] : profiles) worst = std::max(worst, std::abs(prof.mean_sparsity(lam) - target));
    if (worst < best.second) best = {lam, worst};
  }
  return best;
}

}  // namespace blasst
