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
#include <map>
#include <span>
#include <string>
#include <vector>

#include "specsim/workload.hpp"

namespace specsim {

struct ThroughputPoint {
  int count = 0;
  double throughput = 0.0;
};

struct ThresholdEstimate {
  int threshold = 1;
  std::vector<ThroughputPoint> curve;
  std::int64_t last_update = 0;

  /// Piecewise-linear interpolation of the curve, flat outside its range.
  double throughput_at(double count) const noexcept;
};

/// Knee of a (count, throughput) profile: the right end of the first segment
/// whose gain per added sample is below `knee_fraction` of the first
/// segment's gain. A profile that never drops below that yields its largest
/// count; one that is flat from the start yields its first count. Throws
/// DegenerateProfile when throughput falls on the first segment, or
/// std::invalid_argument with fewer than 3 points or non-increasing counts.
ThresholdEstimate estimate_threshold(std::span<const ThroughputPoint> profile, double knee_fraction = 0.1);

enum class LoadRole { Source, Destination, Neutral };

struct InstanceLoad {
  int instance = 0;
  int current = 0;
  LoadRole role = LoadRole::Neutral;
};

/// Roles relative to the threshold.
std::vector<InstanceLoad> classify_loads(std::span<const int> counts, int threshold);

struct SampleMeta {
  SampleId id = 0;
  std::int64_t seq_len = 0;
  double avg_accepted = 0.0;
};

struct InstanceSamples {
  int instance = 0;
  std::vector<SampleMeta> samples;  // migratable residents
};

struct Transfer {
  int src = 0;
  int dst = 0;
  int count = 0;
  std::vector<SampleId> samples;
};

struct ReallocationPlan {
  std::vector<Transfer> transfers;
  std::map<int, int> migration_count;  // transfers each instance takes part in

  bool empty() const noexcept { return transfers.empty(); }
  int moved() const noexcept;
};

/// Greedy pairing: sources by load descending, destinations by load
/// ascending, the k-th source paired with the k-th destination, each moving
/// min(s - threshold, threshold - d) samples. Without `samples` only counts
/// are filled in.
ReallocationPlan plan_reallocation(std::span<const InstanceLoad> loads, int threshold);
ReallocationPlan plan_reallocation(std::span<const InstanceLoad> loads, int threshold,
                                   std::span<const InstanceSamples> samples);

/// Shortest sequence first, then lower average acceptance, then lower id.
std::vector<SampleId> choose_samples(std::span<const SampleMeta> residents, int count);

struct CooldownState {
  int steps_since_decision = 0;
  int cooldown = 32;
};

bool should_trigger(std::span<const InstanceLoad> loads, int threshold, const CooldownState& state);

/// Sum of min(s - threshold, threshold - d) over the plan's pairs, the
/// quantity the pairing maximizes.
int plan_total(const ReallocationPlan& plan);

struct DecisionRecord {
  std::int64_t step = 0;
  double t_sim = 0.0;
  bool triggered = false;
  std::vector<int> loads;
  std::string summary;
  double predicted_gain = 0.0;  // tokens/s, from the threshold curve
};

struct ReallocConfig {
  bool enabled = false;
  int cooldown = 32;
};

/// Decision controller: tracks the cooldown and logs every decision point.
class Reallocator {
 public:
  Reallocator(ThresholdEstimate threshold, ReallocConfig cfg);

  /// Records one completed step on `instance`; true when a decision is due.
  bool on_step(int instance);

  /// Decides at a due point. The plan is empty when not triggered.
  ReallocationPlan decide(std::int64_t step, double t_sim, std::span<const int> counts,
                          std::span<const InstanceSamples> samples);

  const ThresholdEstimate& threshold() const noexcept { return threshold_; }
  const std::vector<DecisionRecord>& log() const noexcept { return log_; }
  int triggered_count() const noexcept { return triggered_; }

 private:
  ThresholdEstimate threshold_;
  ReallocConfig cfg_;
  std::map<int, int> steps_;
  std::vector<DecisionRecord> log_;
  int triggered_ = 0;
};

}  // namespace specsim
