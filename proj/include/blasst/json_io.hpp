// SPDX-FileCopyrightText: Copyright (c) 2026 blasst contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>

#include <json.hpp>

#include "blasst/attention_spec.hpp"
#include "blasst/calibrate.hpp"
#include "blasst/pipeline_sim.hpp"
#include "blasst/workload.hpp"

namespace blasst {

using Json = nlohmann::ordered_json;

// Parse failures and missing or ill-typed fields raise ErrorKind::format;
// out-of-range values raise ErrorKind::validation.
Json parse_json(const std::string& text, const std::string& origin);

SyntheticWorkloadSpec workload_spec_from_json(const Json& j);
Json to_json(const SyntheticWorkloadSpec& spec);

// Geometry fields are optional and default to 0 (filled by bind_geometry).
AttentionSpec attention_spec_from_json(const Json& j);
Json to_json(const AttentionSpec& spec);

CalibrationConfig calibration_config_from_json(const Json& j);
Json to_json(const CalibrationConfig& cfg);

CalibrationFit calibration_fit_from_json(const Json& j);
Json to_json(const CalibrationFit& fit);

pipeline::PhaseModel phase_model_from_json(const Json& j);
Json to_json(const pipeline::PhaseModel& model);

// Shortest round-trip decimal for a double; used by every CSV writer.
std::string format_double(double x);

}  // namespace blasst
