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

#include "specsim/selector.hpp"

#include <algorithm>
#include <stdexcept>

#include "specsim/error.hpp"

namespace specsim {

void SelectorConfig::validate() const {
  if (n_min < 1 || n_max < n_min) throw std::invalid_argument("selector requires 1 <= n_min <= n_max");
  if (patience < 1) throw std::invalid_argument("selector patience must be >= 1");
  if (bonus_tokens < 0.0) throw std::invalid_argument("bonus_tokens must be >= 0");
}

SearchResult search_profile(const SelectorConfig& cfg, const std::function<std::optional<ProfileValue>(int)>& eval) {
  cfg.validate();
  SearchResult res;
  res.visited.reserve(static_cast<std::size_t>(cfg.n_max - cfg.n_min + 1));
  int decreases = 0;
  double prev = 0.0;
  for (int n = cfg.n_min; n <= cfg.n_max; ++n) {
    const auto v = eval(n);
    if (!v) break;
    if (!(v->t > 0.0)) throw std::invalid_argument("predicted step time must be positive");
    ProfilePoint p{n, v->al, v->t, (v->al + cfg.bonus_tokens) / v->t, v->cache_hit};
    res.visited.push_back(p);
    if (res.visited.size() == 1 || p.objective > res.best_objective) {
      res.best_objective = p.objective;
      res.best_n = n;
      res.best_index = res.visited.size() - 1;
    }
    if (res.visited.size() > 1) {
      decreases = p.objective < prev ? decreases + 1 : 0;
      if (cfg.early_stop && decreases >= cfg.patience) {
        res.early_stopped = n < cfg.n_max;
        break;
      }
    }
    prev = p.objective;
  }
  return res;
}

StrategyEvaluation select_strategy(const SpecTree& tree, std::span<const double> weights, const TimeOfN& time_of_n,
                                   const SelectorConfig& cfg) {
  cfg.validate();
  if (tree.empty() || tree.root_level().empty()) throw EmptyTree("speculative tree has no depth-0 node");
  if (tree.size() < static_cast<std::size_t>(cfg.n_min)) throw InsufficientNodes("tree has fewer than n_min nodes");
  if (weights.size() < tree.size()) throw std::invalid_argument("weight vector shorter than tree");

  GreedyFrontier frontier(tree, weights);
  double al = 0.0;
  for (int k = 1; k < cfg.n_min; ++k) {
    frontier.next();
    al += frontier.last_weight();
  }
  const auto res = search_profile(cfg, [&](int n) -> std::optional<ProfileValue> {
    if (!frontier.next()) return std::nullopt;
    al += frontier.last_weight();
    const auto t = time_of_n(n);
    return ProfileValue{al, t.seconds, t.cache_hit};
  });

  StrategyEvaluation ev;
  const auto& best = res.visited.at(res.best_index);
  ev.n = best.n;
  ev.selection.n = best.n;
  const auto picked = frontier.selected();
  ev.selection.node_ids.assign(picked.begin(), picked.begin() + best.n);
  ev.predicted_al = best.al;
  ev.predicted_accepted = best.al + cfg.bonus_tokens;
  ev.predicted_time = best.t;
  ev.objective = best.objective;
  ev.cache_hit = best.cache_hit;
  ev.evaluated = static_cast<int>(res.visited.size());
  ev.early_stopped = res.early_stopped;
  return ev;
}

StrategyEvaluation select_strategy(const SpecTree& tree, const BatchContext& ctx, Predictor& predictor,
                                   const SelectorConfig& cfg) {
  const auto w = predictor.weights(tree);
  const auto batch = static_cast<std::int64_t>(std::max(1, ctx.batch_size));
  return select_strategy(
      tree, w, [&](int n) { return predictor.predict_t_sd({ctx.n_seq, static_cast<std::int64_t>(n) * batch}); }, cfg);
}

GreedyTrace greedy_trace(const SpecTree& tree, std::span<const double> weights, int limit) {
  GreedyTrace tr;
  if (tree.empty()) return tr;
  const auto cap = std::min<std::size_t>(tree.size(), static_cast<std::size_t>(std::max(0, limit)));
  tr.order.reserve(cap);
  tr.gains.reserve(cap);
  GreedyFrontier frontier(tree, weights);
  while (tr.order.size() < cap) {
    const auto id = frontier.next();
    if (!id) break;
    tr.order.push_back(*id);
    tr.gains.push_back(frontier.last_weight());
  }
  return tr;
}

BatchDecision select_batch_strategy(std::span<const GreedyTrace> traces, const TimeOfN& time_of_n,
                                    const SelectorConfig& cfg) {
  cfg.validate();
  if (traces.empty()) throw EmptyTree("no sample trees in batch");
  std::size_t depth = traces.front().gains.size();
  for (const auto& t : traces) depth = std::min(depth, t.gains.size());
  if (depth == 0) throw EmptyTree("a sample tree has no depth-0 node");
  if (depth < static_cast<std::size_t>(cfg.n_min)) throw InsufficientNodes("a sample tree has fewer than n_min nodes");

  // Column sums of the gain matrix, accumulated per sample in a fixed order
  // so the result does not depend on how the traces were produced.
  std::vector<double> prefix(depth, 0.0);
  for (const auto& t : traces) {
    double acc = 0.0;
    for (std::size_t k = 0; k < depth; ++k) {
      acc += t.gains[k];
      prefix[k] += acc;
    }
  }

  // Every sample in the batch earns its own bonus token.
  SelectorConfig batch_cfg = cfg;
  batch_cfg.bonus_tokens = cfg.bonus_tokens * static_cast<double>(traces.size());
  const auto res = search_profile(batch_cfg, [&](int n) -> std::optional<ProfileValue> {
    if (static_cast<std::size_t>(n) > depth) return std::nullopt;
    const auto t = time_of_n(n);
    return ProfileValue{prefix[static_cast<std::size_t>(n - 1)], t.seconds, t.cache_hit};
  });
  BatchDecision d;
  const auto& best = res.visited.at(res.best_index);
  d.n = best.n;
  d.predicted_al = best.al;
  d.predicted_time = best.t;
  d.objective = best.objective;
  d.cache_hit = best.cache_hit;
  d.evaluated = static_cast<int>(res.visited.size());
  d.early_stopped = res.early_stopped;
  return d;
}

BatchDecision select_batch_strategy(std::span<const GreedyTrace> traces, const BatchContext& ctx,
                                    Predictor& predictor, const SelectorConfig& cfg) {
  const auto batch = static_cast<std::int64_t>(traces.size());
  return select_batch_strategy(
      traces, [&](int n) { return predictor.predict_t_sd({ctx.n_seq, static_cast<std::int64_t>(n) * batch}); }, cfg);
}

double speedup_of(const StrategyEvaluation& eval, double t_ar) {
  if (!(t_ar > 0.0)) throw std::invalid_argument("t_ar must be positive");
  return eval.predicted_accepted * t_ar / eval.predicted_time;
}

}  // namespace specsim
