// Copyright 2026 The specsim Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <json.hpp>
#include <string>

#include "specsim/clustersim.hpp"
#include "specsim/experiment.hpp"

namespace specsim {

inline constexpr const char* kCsvVersion = "# specsim-csv v1";

/// Per-instance time series: t_sim,instance,samples,tokens_per_s,chosen_n,cache_hit_rate.
std::string instance_csv(const RunReport& report, int instance);
/// Per-step telemetry: step,chosen_n,predicted_al,realized_al,predicted_t,realized_t,cache_hit.
std::string telemetry_csv(const RunReport& report, int instance);

nlohmann::json run_summary(const RunReport& report);
/// Summary with a config snapshot and calibration hash; `per_mode` holds one
/// summary per run passed in.
nlohmann::json summary_json(const std::vector<RunReport>& runs, const ExperimentConfig& cfg,
                            const std::string& calibration_hash);

std::string sweep_csv(const SweepTable& table, bool normalized);
nlohmann::json sweep_json(const SweepTable& table);

/// Writes instance_<k>.csv, telemetry_<k>.csv, summary.json and
/// config.json under `dir` (created if missing).
void write_run_outputs(const std::string& dir, const std::vector<RunReport>& runs, const ExperimentConfig& cfg,
                       const std::string& calibration_hash);

std::string format_double(double v);
void write_text(const std::string& path, const std::string& text);

}  // namespace specsim
