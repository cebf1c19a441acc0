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

// Discrete-event simulation of generation instances running batched
// speculative decoding over a fixed set of samples.
//
// Events are step completions. When instance i finishes a step at time t the
// step's tokens are applied, finished samples leave, migrations waiting for a
// source boundary detach, the reallocator may decide, and i starts its next
// step with whatever is resident. Randomness is keyed by (seed, sample,
// sample step) for trees and acceptance and by (seed, instance, instance
// step) for timing noise, so a sample sees the same trees under every mode
// and on every instance.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "specsim/acceptance_model.hpp"
#include "specsim/cost_model.hpp"
#include "specsim/hardware.hpp"
#include "specsim/kernels.hpp"
#include "specsim/migration.hpp"
#include "specsim/predictor.hpp"
#include "specsim/reallocator.hpp"
#include "specsim/selector.hpp"
#include "specsim/tree_generator.hpp"
#include "specsim/workload.hpp"

namespace specsim {

enum class Mode { Autoregressive, FixedN, Adaptive, AdaptiveRealloc };
const char* to_string(Mode m) noexcept;
/// Accepts "autoregressive", "fixed-n", "fixed-n:<k>", "adaptive",
/// "adaptive+realloc". A "fixed-n:<k>" spelling stores k in `fixed_n`.
std::optional<Mode> parse_mode(const std::string& text, int* fixed_n = nullptr);

/// Fitted predictor state and roofline threshold from offline profiling.
struct Calibration {
  AcceptanceModel acceptance = AcceptanceModel::identity(16);
  CostModel cost;
  BucketWidths buckets;
  ThresholdEstimate threshold;
};

struct SimConfig {
  int instances = 4;
  Mode mode = Mode::Adaptive;
  int fixed_n = 8;
  SelectorConfig selector;
  TreeShape tree;
  HardwareProfile hardware;
  GroundTruth truth;
  ReallocConfig realloc;  // `enabled` follows the mode
  LinkModel link;
  KvFootprint kv;
  MigrationMode migration = MigrationMode::Overlapped;
  std::int64_t migration_buffer_bytes = std::int64_t{4} << 30;  // per destination
  RefitConfig refit;
  bool online_refit = true;
  std::uint64_t seed = 1;
  /// Instance of each sample, by workload index; empty means round-robin.
  std::vector<int> placement;
  Exec exec = Exec::Parallel;
  /// Stop after this many steps per instance (0 = run to completion).
  std::int64_t step_limit = 0;

  void validate() const;
};

struct StepRecord {
  int instance = 0;
  std::int64_t step = 0;
  double t_start = 0.0;
  double t_end = 0.0;
  int samples = 0;
  int chosen_n = 0;
  double predicted_accepted = 0.0;  // summed over the batch, bonus included
  double realized_accepted = 0.0;
  double predicted_t = 0.0;
  double realized_t = 0.0;
  bool cache_hit = false;
  double cache_hit_rate = 0.0;  // cumulative for the instance
  int tokens = 0;               // after truncation at sample ends
  double ar_equivalent_t = 0.0;  // noiseless single-token step on the same batch

  double tokens_per_s() const noexcept { return realized_t > 0.0 ? tokens / realized_t : 0.0; }
};

struct MigrationRecord {
  std::uint64_t job = 0;
  SampleId sample = 0;
  int src = 0;
  int dst = 0;
  std::int64_t bytes = 0;
  std::int64_t residual_tokens = 0;
  double request_t = 0.0;
  double stage1_end_t = 0.0;
  double detach_t = 0.0;
  double resume_t = 0.0;
  double join_t = 0.0;
  double complete_t = 0.0;
  double stall_s = 0.0;
  std::string outcome;
};

struct RunReport {
  Mode mode = Mode::Adaptive;
  int fixed_n = 0;
  int instances = 0;
  double completion_s = 0.0;
  std::int64_t total_tokens = 0;
  std::vector<std::vector<StepRecord>> steps;  // per instance
  std::vector<double> finish_t;                // per workload index
  std::vector<DecisionRecord> decisions;
  std::vector<MigrationRecord> migrations;
  int threshold = 0;
  int realloc_count = 0;
  double stall_s_total = 0.0;
  double mean_speedup = 0.0;

  /// Tokens emitted in [t0, t1) per second, prorating steps that straddle
  /// the window.
  double system_throughput(double t0, double t1) const;
  double instance_throughput(int instance, double t0, double t1) const;
  std::int64_t completed_migrations() const;
};

RunReport run_generation(const SimConfig& cfg, const Calibration& cal, std::vector<Sample> workload);

/// Two instances: the first holds `heavy` long samples; the second holds
/// one long sample and `light - 1` short ones that finish early.
struct RebalanceScenario {
  std::vector<Sample> workload;
  std::vector<int> placement;
};
RebalanceScenario make_rebalance_scenario(int heavy = 64, int light = 24, int long_len = 1600, int short_len = 24,
                                          int prompt_len = 128);

}  // namespace specsim
