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

#include <cstdint>
#include <json.hpp>
#include <string>
#include <vector>

#include "specsim/calibration.hpp"
#include "specsim/clustersim.hpp"
#include "specsim/workload.hpp"

namespace specsim {

/// Workload shapes the driver can build.
///   long_tail  lognormal lengths, round-robin placement
///   uniform    equal lengths (`uniform_output_len`), round-robin placement
///   rebalance  two instances, one long-heavy and one short-heavy
struct ExperimentConfig {
  SimConfig sim;
  WorkloadSpec workload;
  std::string scenario = "long_tail";
  int uniform_output_len = 256;
  int uniform_prompt_len = 128;
  int rebalance_heavy = 64;
  int rebalance_light = 24;
  int rebalance_long_len = 1600;
  int rebalance_short_len = 24;
  std::string output_dir = "out";
  std::string calibration_path;

  void validate() const;
};

/// Every field, in a fixed key order.
nlohmann::json to_json(const ExperimentConfig& cfg);
/// Missing keys keep their defaults; unknown keys are rejected.
ExperimentConfig experiment_from_json(const nlohmann::json& j);
ExperimentConfig load_experiment(const std::string& path);

/// Workload and placement for the configured scenario.
std::vector<Sample> build_workload(const ExperimentConfig& cfg, std::vector<int>& placement);

RunReport run_experiment(const ExperimentConfig& cfg, const Calibration& cal);

/// Sets one field addressed by a sweep axis name (`fixed_n`, `mode`,
/// `samples`, `instances`, `seed`, `cooldown`, `scale`, `output_len`).
/// Throws ConfigError on unknown axes or unparsable values.
void apply_axis(ExperimentConfig& cfg, const std::string& axis, const std::string& value);
bool is_known_axis(const std::string& axis);

struct SweepTable {
  std::string row_axis;
  std::string col_axis;
  std::vector<std::string> rows;
  std::vector<std::string> cols;
  std::vector<std::vector<double>> throughput;  // tokens/s
  std::vector<std::vector<double>> completion;  // s
  std::vector<std::vector<double>> normalized;  // row-max normalized throughput
};

/// Runs every (row, col) cell from `base`; cells run concurrently and share
/// the base seed.
SweepTable run_sweep(const ExperimentConfig& base, const Calibration& cal, const std::string& col_axis,
                     const std::vector<std::string>& col_values, const std::string& row_axis = {},
                     const std::vector<std::string>& row_values = {});

}  // namespace specsim
