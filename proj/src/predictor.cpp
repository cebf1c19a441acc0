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

#include "specsim/predictor.hpp"

#include <stdexcept>

#include "specsim/error.hpp"

namespace specsim {

double predict_al(const SpecTree& tree, const SelectionSet& selection, const AcceptanceModel& model) {
  double al = 0.0;
  for (NodeId id : selection.node_ids) al += model(tree.node(id).draft_logit);
  return al;
}

Predictor::Predictor(AcceptanceModel acceptance, CostModel cost, BucketWidths buckets, RefitConfig refit)
    : acceptance_(std::move(acceptance)),
      cost_(cost),
      cache_(buckets),
      refit_cfg_(refit),
      acceptance_buffer_(refit.reservoir),
      cost_buffer_(refit.cost_window) {
  if (buckets.seq <= 0 || buckets.draft <= 0) throw std::invalid_argument("bucket widths must be positive");
  if (refit.interval < 1) throw std::invalid_argument("refit interval must be >= 1");
}

std::vector<double> Predictor::weights(const SpecTree& tree) const {
  std::vector<double> w;
  weights_into(tree, w);
  return w;
}

void Predictor::weights_into(const SpecTree& tree, std::vector<double>& out) const {
  out.resize(tree.size());
  const auto nodes = tree.nodes();
  for (std::size_t i = 0; i < nodes.size(); ++i) out[i] = acceptance_(nodes[i].draft_logit);
}

TimePrediction Predictor::predict_t_sd(const VerifyBatchFeatures& features) {
  const auto p = specsim::predict_t_sd(features, cost_, cache_);
  ++lookups_;
  if (p.cache_hit) ++hits_;
  return p;
}

void Predictor::observe_step(const StepTelemetry& telemetry) {
  if (telemetry.empty()) return;
  for (const auto& o : telemetry.node_outcomes) acceptance_buffer_.push(o);
  if (telemetry.verify) cost_buffer_.push(*telemetry.verify);
  if (++steps_since_refit_ >= refit_cfg_.interval) {
    steps_since_refit_ = 0;
    refit();
  }
}

void Predictor::refit() {
  bool changed = false;
  if (refit_cfg_.refit_acceptance && acceptance_buffer_.size() > 0) {
    try {
      acceptance_ = fit_acceptance(acceptance_buffer_.items());
      changed = true;
    } catch (const InsufficientData&) {
      // keep the previous map until the buffer spans two distinct logits
    }
  }
  if (refit_cfg_.refit_cost && cost_buffer_.size() > 0) {
    cost_ = refit_cost_model(cost_, cost_buffer_.items());
    changed = true;
  }
  if (changed) {
    cache_.clear();
    ++refits_;
  }
}

}  // namespace specsim
