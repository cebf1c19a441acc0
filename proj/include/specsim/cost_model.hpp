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

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <unordered_map>

namespace specsim {

/// Batch-level verification features: cumulative sequence length (KV that
/// attention has to read) and cumulative draft tokens (FFN work).
struct VerifyBatchFeatures {
  std::int64_t n_seq = 0;
  std::int64_t n_draft = 0;
};

struct CostObservation {
  std::int64_t n_seq = 0;
  std::int64_t n_draft = 0;
  double verify_s = 0.0;
};

struct ArObservation {
  std::int64_t n_seq = 0;
  int batch = 0;
  double step_s = 0.0;
};

/// Step-time regression.
///
///   t_sd     = c_draft + t_verify
///   t_verify = scale * (b0 + b1*N_seq + b2*N_draft + b3*max(0, N_draft - k_sat))
///   t_ar     = a0 + a1*N_seq + a2*batch
///
/// All slopes are constrained non-negative, so predictions are monotone in
/// every feature.
struct CostModel {
  double c_draft = 0.0;
  std::array<double, 4> beta{0.0, 0.0, 0.0, 0.0};
  double k_sat = 0.0;
  std::array<double, 3> ar{0.0, 0.0, 0.0};
  double hardware_scale = 1.0;

  // Regularizer for online refits: per-point Gram matrix of the offline
  // design and its weight in points. A refit minimizes
  //   |y - X b|^2 + w * (b - b_prior)' G (b - b_prior).
  std::array<double, 16> prior_gram{};
  double prior_weight = 0.0;

  double verify_time(const VerifyBatchFeatures& f) const noexcept;
  double step_time(const VerifyBatchFeatures& f) const noexcept { return c_draft + verify_time(f); }
  double autoregressive_step_time(int batch, std::int64_t n_seq) const noexcept;
  bool is_valid() const noexcept;
};

struct CostFitOptions {
  int k_sat_candidates = 96;
  double prior_weight = 256.0;
};

/// Fits the verification and autoregressive regressions. k_sat is chosen by
/// grid search over the observed N_draft range; the slopes by non-negative
/// least squares (exhaustive active sets, four unknowns).
CostModel fit_cost_model(std::span<const CostObservation> verify, std::span<const ArObservation> autoregressive,
                         double c_draft, const CostFitOptions& options = {});

/// Least-squares update of the verification coefficients from recent data,
/// regularized toward the current model. k_sat, c_draft and t_ar are kept.
CostModel refit_cost_model(const CostModel& current, std::span<const CostObservation> recent);

struct BucketWidths {
  std::int64_t seq = 256;
  std::int64_t draft = 4;
};

/// Cache of t_sd predictions keyed by (N_seq bucket, N_draft bucket). The
/// first prediction stored for a bucket is returned for every later query in
/// that bucket.
class BucketCache {
 public:
  explicit BucketCache(BucketWidths widths = {}) : widths_(widths) {}

  std::optional<double> lookup(const VerifyBatchFeatures& f) const;
  void store(const VerifyBatchFeatures& f, double seconds);
  void clear() noexcept { entries_.clear(); }

  const BucketWidths& widths() const noexcept { return widths_; }
  std::size_t size() const noexcept { return entries_.size(); }

 private:
  std::uint64_t key(const VerifyBatchFeatures& f) const noexcept;

  BucketWidths widths_;
  std::unordered_map<std::uint64_t, double> entries_;
};

struct TimePrediction {
  double seconds = 0.0;
  bool cache_hit = false;
};

/// Closed-form t_sd with bucket caching.
TimePrediction predict_t_sd(const VerifyBatchFeatures& features, const CostModel& cost, BucketCache& cache);

}  // namespace specsim
