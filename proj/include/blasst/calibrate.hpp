// SPDX-FileCopyrightText: Copyright (c) 2026 blasst contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "blasst/attention_spec.hpp"
#include "blasst/blasst_core.hpp"
#include "blasst/workload.hpp"

namespace blasst {

struct CalibrationConfig {
  double target_sparsity = 0.5;
  std::vector<std::uint64_t> lengths;
  std::vector<double> lambda_grid;  // ascending, all > 0
  double tolerance = 0.03;
  std::uint64_t samples_per_length = 1;
  SyntheticWorkloadSpec workload;  // seq_len overridden per length
  AttentionSpec attention;         // geometry overridden per length

  void validate() const;

  // Workload for sample s at length L uses seed workload.seed + s.
  SyntheticWorkloadSpec workload_for(std::uint64_t length, std::uint64_t sample) const;
  AttentionSpec attention_for(std::uint64_t length) const;
};

// 1e-6 ... 1e-1, 25 log-spaced points.
std::vector<double> default_lambda_grid();
std::vector<double> log_space(double lo, double hi, std::size_t count);

struct CalibrationPoint {
  std::uint64_t length = 0;
  double inv_length = 0.0;
  double lambda_best = 0.0;
  double achieved_sparsity = 0.0;
  double gap = 0.0;
};

struct CalibrationFit {
  double a = 0.0;
  double target_sparsity = 0.0;
  double tolerance = 0.0;
  std::vector<CalibrationPoint> points;    // accepted, gap < tolerance
  std::vector<CalibrationPoint> rejected;  // min gap >= tolerance
  std::vector<std::uint64_t> rejected_lengths;
  double max_abs_residual = 0.0;  // max |lambda_best - a / L| over points
};

/// Decision profiles of every sample at one length; evaluates mean global
/// sparsity for any lambda without re-running the forward pass.
class LengthProfile {
 public:
  LengthProfile(std::uint64_t length, std::vector<DecisionProfile> samples);

  std::uint64_t length() const { return length_; }
  double mean_sparsity(double lambda) const;
  double sparsity_spread(double lambda) const;  // population std across samples

 private:
  std::uint64_t length_;
  std::vector<DecisionProfile> samples_;
};

LengthProfile profile_length(const CalibrationConfig& cfg, std::uint64_t length);
std::map<std::uint64_t, LengthProfile> profile_lengths(const CalibrationConfig& cfg,
                                                       const std::vector<std::uint64_t>& lengths);

/// Mean global sparsity of blasst_forward over cfg.samples_per_length seeded
/// workloads of length L, threshold fixed(lambda).
double measure_sparsity(double lambda, std::uint64_t length, const CalibrationConfig& cfg);

/// Through-origin least squares a = sum(x y) / sum(x^2).
double fit_through_origin(const std::vector<double>& x, const std::vector<double>& y);

CalibrationFit calibrate(const CalibrationConfig& cfg);
CalibrationFit calibrate(const CalibrationConfig& cfg,
                         const std::map<std::uint64_t, LengthProfile>& profiles);

/// Fit from already chosen (1/L, lambda) points; all are treated as accepted.
CalibrationFit fit_points(const std::vector<CalibrationPoint>& points);

struct StabilityRow {
  std::uint64_t length = 0;
  std::string mode;  // "fixed" or "calibrated"
  double lambda = 0.0;
  double achieved = 0.0;
  double target = 0.0;
  double deviation = 0.0;  // achieved - target
  double spread = 0.0;     // cross-sample std of achieved
};

std::vector<StabilityRow> stability_eval(const CalibrationFit& fit, double fixed_lambda,
                                         const std::vector<std::uint64_t>& lengths,
                                         const CalibrationConfig& cfg);
std::vector<StabilityRow> stability_eval(const CalibrationFit& fit, double fixed_lambda,
                                         const std::map<std::uint64_t, LengthProfile>& profiles,
                                         double target);

// length,mode,lambda,achieved,target,deviation
std::string stability_csv(const std::vector<StabilityRow>& rows);

/// The single lambda among candidates minimizing the worst-case
/// |sparsity - target| across profiles. Returns {lambda, worst deviation}.
std::pair<double, double> best_fixed_lambda(const std::map<std::uint64_t, LengthProfile>& profiles,
                                            double target, const std::vector<double>& candidates);

}  // namespace blasst
