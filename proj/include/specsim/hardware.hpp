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

// Hidden ground truth of the simulated accelerator and of token acceptance.
// The predictor never reads these; it only sees realized step times and
// acceptance outcomes.

#include <algorithm>
#include <cstdint>

namespace specsim {

/// Roofline-style forward-pass time:
///   mem  = weight_s + kv_s_per_token * N_seq
///   comp = compute_s_per_token * N_tokens / scale
///   t    = mem + s * log(1 + exp((comp - mem) / s))
/// a smooth max of the memory-bound and compute-bound regimes.
struct HardwareProfile {
  double weight_s = 0.020;
  double kv_s_per_token = 1.5e-7;
  double compute_s_per_token = 0.020 / 64.0;
  double draft_s = 0.004;
  double smoothing_s = 0.001;
  double scale = 1.0;  // compute capability multiplier
  double noise_sigma = 0.03;
  double prefill_s_per_sample = 0.002;

  void validate() const;

  double forward_time(std::int64_t n_seq, std::int64_t n_tokens) const noexcept;
  /// Draft plus one verification pass over N_draft + batch tokens.
  double spec_step_time(std::int64_t n_seq, std::int64_t n_draft, int batch) const noexcept {
    return draft_s + forward_time(n_seq, n_draft + batch);
  }
  double verify_time(std::int64_t n_seq, std::int64_t n_draft, int batch) const noexcept {
    return forward_time(n_seq, n_draft + batch);
  }
  double ar_step_time(std::int64_t n_seq, int batch) const noexcept { return forward_time(n_seq, batch); }
  /// Multiplicative lognormal noise factor from a standard normal draw.
  double noise_factor(double z) const noexcept;
};

/// Per-node acceptance probability as a function of the draft logit:
/// clamp(intercept + slope * dl, 0, 1).
struct GroundTruth {
  double intercept = 0.2;
  double slope = 0.9;

  double operator()(double dl) const noexcept { return std::clamp(intercept + slope * dl, 0.0, 1.0); }

  static GroundTruth always() { return {1.0, 0.0}; }
  static GroundTruth never() { return {0.0, 0.0}; }
  static GroundTruth identity() { return {0.0, 1.0}; }
};

}  // namespace specsim
