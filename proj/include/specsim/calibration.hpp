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

// Offline profiling against the simulator's ground truth: acceptance
// outcomes for the F fit, timed verification and autoregressive passes for
// the cost regression, and steady-state throughput per resident sample
// count for the roofline threshold.

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "specsim/clustersim.hpp"

namespace specsim {

struct CalibrationSpec {
  HardwareProfile hardware;
  GroundTruth truth;
  TreeShape tree;
  SelectorConfig selector;
  std::uint64_t seed = 7;

  int acceptance_trees = 2000;
  std::vector<int> cost_batches{1, 2, 4, 8, 12, 16, 24, 32, 48, 64};
  std::vector<int> cost_lengths{256, 768, 1536};
  std::vector<int> cost_n{1, 2, 4, 8, 12, 16, 24, 32, 48};
  std::vector<int> profile_counts{1, 2, 3, 4, 6, 8, 12, 16, 24, 32, 48, 64};
  int profile_output_len = 192;
  int profile_prompt_len = 512;
  double knee_fraction = 0.1;

  BucketWidths buckets;
  AcceptanceFitOptions acceptance_fit;
  CostFitOptions cost_fit;
};

struct CalibrationData {
  std::vector<AcceptanceObservation> acceptance;
  std::vector<CostObservation> verify;
  std::vector<ArObservation> autoregressive;
  double c_draft = 0.0;
};

/// Profiling observations only (no fitting).
CalibrationData collect_calibration_data(const CalibrationSpec& spec);

/// Steady-state tokens/s of one instance in adaptive mode for each count.
std::vector<ThroughputPoint> profile_throughput(const CalibrationSpec& spec, const AcceptanceModel& acceptance,
                                                const CostModel& cost);

Calibration calibrate(const CalibrationSpec& spec);

std::string calibration_to_json(const Calibration& cal);
Calibration calibration_from_json(std::string_view text);
void save_calibration(const std::string& path, const Calibration& cal);
Calibration load_calibration(const std::string& path);

/// FNV-1a 64 of a byte string.
std::uint64_t fnv1a64(std::string_view bytes) noexcept;
std::string hex64(std::uint64_t v);

}  // namespace specsim
