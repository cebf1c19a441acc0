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

#include <cmath>
#include <cstdint>
#include <vector>

namespace specsim {

using SampleId = std::uint32_t;

struct Sample {
  SampleId id = 0;
  int prompt_len = 0;
  int generated = 0;
  int true_total = 0;  // hidden from the schedulers
  std::int64_t kv_ssm = 0;
  std::int64_t kv_llm = 0;
  double avg_accepted = 0.0;
  int steps = 0;

  int remaining() const noexcept { return true_total - generated; }
  bool finished() const noexcept { return generated >= true_total; }
  std::int64_t seq_len() const noexcept { return static_cast<std::int64_t>(prompt_len) + generated; }
  /// Appends `tokens` (truncated at true_total) and updates the running mean.
  int advance(int tokens) noexcept;
};

/// Output lengths ~ lognormal(mu, sigma), clamped to [1, max_new_tokens].
/// Prompt lengths ~ lognormal(prompt_mu, prompt_sigma), clamped to
/// [prompt_min, prompt_max].
struct WorkloadSpec {
  int sample_count = 256;
  double length_mu = std::log(378.0);
  double length_sigma = std::log(1373.0 / 378.0) / 1.6448536269514722;
  int max_new_tokens = 2048;
  double prompt_mu = std::log(128.0);
  double prompt_sigma = 0.5;
  int prompt_min = 16;
  int prompt_max = 1024;
  std::uint64_t seed = 1;

  /// mu and sigma matching a target median and 95th percentile.
  static WorkloadSpec from_quantiles(double median, double p95, int sample_count, std::uint64_t seed);
  void validate() const;
};

/// Deterministic per seed; sample i only depends on (seed, i).
std::vector<Sample> generate_workload(const WorkloadSpec& spec);

/// n samples with identical output length and prompt length.
std::vector<Sample> uniform_workload(int n, int output_len, int prompt_len, SampleId first_id = 0);

}  // namespace specsim
