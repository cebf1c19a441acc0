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
#include <optional>
#include <span>
#include <vector>

#include "specsim/acceptance_model.hpp"
#include "specsim/cost_model.hpp"
#include "specsim/spectree.hpp"

namespace specsim {

/// al = sum of F(dl(u)) over the selection.
double predict_al(const SpecTree& tree, const SelectionSet& selection, const AcceptanceModel& model);

/// What one realized step feeds back into the predictors.
struct StepTelemetry {
  std::vector<AcceptanceObservation> node_outcomes;
  std::optional<CostObservation> verify;
  bool empty() const noexcept { return node_outcomes.empty() && !verify; }
};

struct RefitConfig {
  int interval = 64;               // steps between refits
  std::size_t reservoir = 8192;    // most recent acceptance observations kept
  std::size_t cost_window = 512;   // most recent timing observations kept
  bool refit_acceptance = true;
  bool refit_cost = true;
};

template <class T>
class RingBuffer {
 public:
  explicit RingBuffer(std::size_t capacity = 0) : capacity_(capacity) { data_.reserve(capacity); }
  void push(const T& v) {
    if (capacity_ == 0) return;
    if (data_.size() < capacity_) {
      data_.push_back(v);
    } else {
      data_[head_] = v;
      head_ = (head_ + 1) % capacity_;
    }
  }
  std::span<const T> items() const noexcept { return data_; }
  std::size_t size() const noexcept { return data_.size(); }

 private:
  std::size_t capacity_;
  std::size_t head_ = 0;
  std::vector<T> data_;
};

/// Per-instance predictor state: acceptance map, step-time regression, the
/// bucket cache and the online refit buffers. Not shared across instances.
class Predictor {
 public:
  Predictor(AcceptanceModel acceptance, CostModel cost, BucketWidths buckets = {}, RefitConfig refit = {});

  double weight(double draft_logit) const noexcept { return acceptance_(draft_logit); }
  /// w(u) = F(dl(u)) for every node, in id order.
  std::vector<double> weights(const SpecTree& tree) const;
  void weights_into(const SpecTree& tree, std::vector<double>& out) const;

  TimePrediction predict_t_sd(const VerifyBatchFeatures& features);
  double predict_t_ar(int batch, std::int64_t n_seq) const noexcept {
    return cost_.autoregressive_step_time(batch, n_seq);
  }

  /// Appends the step's observations; every `interval` non-empty steps refits
  /// F on the acceptance buffer and the verification coefficients on the
  /// timing buffer, then clears the cache.
  void observe_step(const StepTelemetry& telemetry);

  const AcceptanceModel& acceptance() const noexcept { return acceptance_; }
  const CostModel& cost() const noexcept { return cost_; }
  const BucketCache& cache() const noexcept { return cache_; }
  std::uint64_t lookups() const noexcept { return lookups_; }
  std::uint64_t hits() const noexcept { return hits_; }
  int refits() const noexcept { return refits_; }

 private:
  void refit();

  AcceptanceModel acceptance_;
  CostModel cost_;
  BucketCache cache_;
  RefitConfig refit_cfg_;
  RingBuffer<AcceptanceObservation> acceptance_buffer_;
  RingBuffer<CostObservation> cost_buffer_;
  int steps_since_refit_ = 0;
  int refits_ = 0;
  std::uint64_t lookups_ = 0;
  std::uint64_t hits_ = 0;
};

}  // namespace specsim
