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

// Workload-aware choice of the draft token budget n.
//
// The search walks n upward, extending S(n) by one greedy pick at a time so
// al(n) grows by exactly w(u_max), and scores each n by
// (al(n) + bonus) / t_sd(n). Once the marginal ratio w(u_max) / dt_sd falls
// below the running ratio the mediant inequality guarantees the score keeps
// falling, so the scan stops after `patience` consecutive strict decreases.

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "specsim/cost_model.hpp"
#include "specsim/predictor.hpp"
#include "specsim/spectree.hpp"

namespace specsim {

struct SelectorConfig {
  int n_min = 2;
  int n_max = 48;
  int patience = 2;
  /// Tokens a step yields regardless of n (the verifier's corrected token).
  /// Zero gives the bare al(n) / t_sd(n) ratio.
  double bonus_tokens = 1.0;
  bool early_stop = true;

  void validate() const;
};

struct ProfilePoint {
  int n = 0;
  double al = 0.0;
  double t = 0.0;
  double objective = 0.0;
  bool cache_hit = false;
};

struct SearchResult {
  int best_n = 0;
  double best_objective = 0.0;
  std::size_t best_index = 0;
  std::vector<ProfilePoint> visited;
  bool early_stopped = false;
};

struct ProfileValue {
  double al = 0.0;
  double t = 0.0;
  bool cache_hit = false;
};

/// Generic scan. `eval(n)` returns al(n) and t_sd(n), or nullopt once n is
/// infeasible; it is called for increasing n only.
SearchResult search_profile(const SelectorConfig& cfg, const std::function<std::optional<ProfileValue>(int)>& eval);

struct StrategyEvaluation {
  int n = 0;
  SelectionSet selection;
  double predicted_al = 0.0;        // sum of weights
  double predicted_accepted = 0.0;  // predicted_al + bonus tokens
  double predicted_time = 0.0;
  double objective = 0.0;           // predicted_accepted / predicted_time
  bool cache_hit = false;
  int evaluated = 0;
  bool early_stopped = false;
};

struct BatchContext {
  int batch_size = 1;
  std::int64_t n_seq = 0;
};

/// Time model as a function of the per-sample budget n.
using TimeOfN = std::function<TimePrediction(int n)>;

/// Single-tree search with explicit weights and time model. Throws EmptyTree
/// when the tree has no depth-0 node and InsufficientNodes when it has fewer
/// than n_min nodes.
StrategyEvaluation select_strategy(const SpecTree& tree, std::span<const double> weights, const TimeOfN& time_of_n,
                                   const SelectorConfig& cfg);

/// Single-tree search using the instance predictor; the tree stands for every
/// sample in the batch, so N_draft = n * batch_size.
StrategyEvaluation select_strategy(const SpecTree& tree, const BatchContext& ctx, Predictor& predictor,
                                   const SelectorConfig& cfg);

/// Greedy picks of one tree, in order, with their weights.
struct GreedyTrace {
  std::vector<NodeId> order;
  std::vector<double> gains;
};

GreedyTrace greedy_trace(const SpecTree& tree, std::span<const double> weights, int limit);

struct BatchDecision {
  int n = 0;
  double predicted_al = 0.0;  // summed over samples
  double predicted_time = 0.0;
  double objective = 0.0;
  bool cache_hit = false;
  int evaluated = 0;
  bool early_stopped = false;
};

/// One shared n for the whole batch: al(n) sums every sample's first n
/// gains, N_draft = n * batch.
BatchDecision select_batch_strategy(std::span<const GreedyTrace> traces, const BatchContext& ctx,
                                    Predictor& predictor, const SelectorConfig& cfg);
BatchDecision select_batch_strategy(std::span<const GreedyTrace> traces, const TimeOfN& time_of_n,
                                    const SelectorConfig& cfg);

/// al * t_ar / t_sd.
double speedup_of(const StrategyEvaluation& eval, double t_ar);

}  // namespace specsim
