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

#include <doctest.h>

#include <chrono>
#include <cmath>

#include "fixtures.hpp"
#include "specsim/error.hpp"
#include "specsim/selector.hpp"
#include "specsim/tree_generator.hpp"

using namespace specsim;

namespace {

CostModel toy_cost() {
  CostModel c;
  c.c_draft = 0.004;
  c.beta = {0.02, 1.5e-7, 2e-5, 4e-4};
  c.k_sat = 48.0;
  c.ar = {0.02, 1.5e-7, 1e-5};
  return c;
}

// Plain argmax of (al + bonus) / t over every feasible n.
std::pair<int, double> full_scan(const SpecTree& tree, const std::vector<double>& w, const TimeOfN& t,
                                 const SelectorConfig& cfg) {
  GreedyFrontier f(tree, w);
  double al = 0.0;
  int best = 0;
  double best_obj = -1.0;
  for (int n = 1; n <= cfg.n_max; ++n) {
    if (!f.next()) break;
    al += f.last_weight();
    if (n < cfg.n_min) continue;
    const double obj = (al + cfg.bonus_tokens) / t(n).seconds;
    if (obj > best_obj) {
      best_obj = obj;
      best = n;
    }
  }
  return {best, best_obj};
}

}  // namespace

TEST_CASE("synthetic concave profile") {
  const std::vector<double> al{1.0, 1.8, 2.4, 2.8, 3.0, 3.1};
  const std::vector<double> t{1.0, 1.1, 1.25, 1.5, 1.9, 2.5};
  SelectorConfig cfg;
  cfg.n_min = 1;
  cfg.n_max = 6;
  cfg.bonus_tokens = 0.0;
  const auto eval = [&](int n) -> std::optional<ProfileValue> {
    return ProfileValue{al[static_cast<std::size_t>(n - 1)], t[static_cast<std::size_t>(n - 1)], false};
  };
  const auto r = search_profile(cfg, eval);
  CHECK(r.best_n == 3);
  CHECK(r.best_objective == doctest::Approx(2.4 / 1.25));
  CHECK(r.early_stopped);
  CHECK(r.visited.size() == 5);
  CHECK(r.visited.back().n == 5);
  const double ratios[] = {1.0, 1.636, 1.920, 1.867, 1.579};
  for (std::size_t i = 0; i < 5; ++i) CHECK(r.visited[i].objective == doctest::Approx(ratios[i]).epsilon(1e-3));
  for (const auto& p : r.visited) CHECK(r.best_objective >= p.objective);

  cfg.early_stop = false;
  const auto full = search_profile(cfg, eval);
  CHECK(full.visited.size() == 6);
  CHECK(full.best_n == 3);
}

TEST_CASE("sugar-water step") {
  // 4/2 followed by a step of 1/1 lands between the two
  const double next = (4.0 + 1.0) / (2.0 + 1.0);
  CHECK(next < 4.0 / 2.0);
  CHECK(next > 1.0 / 1.0);
}

TEST_CASE("selector config validation") {
  SelectorConfig c;
  c.n_min = 0;
  CHECK_THROWS(c.validate());
  c.n_min = 5;
  c.n_max = 4;
  CHECK_THROWS(c.validate());
  c.n_max = 5;
  c.patience = 0;
  CHECK_THROWS(c.validate());
}

TEST_CASE("empty and small trees") {
  const auto tree = specsim::testing::eight_node_tree();
  const auto w = tree.draft_logits();
  const TimeOfN t = [](int n) { return TimePrediction{1.0 + 0.1 * n, false}; };
  SelectorConfig cfg;
  cfg.n_min = 9;
  cfg.n_max = 12;
  CHECK_THROWS_AS(select_strategy(tree, w, t, cfg), InsufficientNodes);
  CHECK_THROWS_AS(select_strategy(SpecTree{}, std::vector<double>{}, t, SelectorConfig{}), EmptyTree);

  // infeasible n stops the scan at the last feasible budget
  cfg.n_min = 2;
  cfg.n_max = 48;
  cfg.early_stop = false;
  const auto ev = select_strategy(tree, w, [](int) { return TimePrediction{1.0, false}; }, cfg);
  CHECK(ev.n == 8);
  CHECK(ev.evaluated == 7);
}

TEST_CASE("early stop equals full scan when marginal ratio falls") {
  SplitMix64 rng(21);
  const auto cost = toy_cost();
  TreeShape shape;
  SelectorConfig cfg;
  int compared = 0;
  for (int trial = 0; trial < 500; ++trial) {
    const auto tree = generate_tree(shape, rng);
    const auto w = tree.draft_logits();
    const int batch = 1 + static_cast<int>(rng.uniform() * 64);
    const std::int64_t n_seq = static_cast<std::int64_t>(batch) * (100 + static_cast<std::int64_t>(rng.uniform() * 2000));
    const TimeOfN t = [&](int n) {
      return TimePrediction{cost.step_time({n_seq, static_cast<std::int64_t>(n) * batch}), false};
    };
    const auto ev = select_strategy(tree, w, t, cfg);
    const auto [best, best_obj] = full_scan(tree, w, t, cfg);
    CHECK(ev.n == best);
    CHECK(ev.objective == best_obj);
    CHECK(ev.objective == doctest::Approx(ev.predicted_accepted / ev.predicted_time).epsilon(1e-14));
    CHECK(ev.predicted_accepted == doctest::Approx(ev.predicted_al + cfg.bonus_tokens).epsilon(1e-14));
    CHECK(ev.selection.node_ids.size() == static_cast<std::size_t>(ev.n));
    CHECK(is_connected(tree, ev.selection.node_ids));
    ++compared;
  }
  CHECK(compared == 500);
}

TEST_CASE("load shifts the best budget down") {
  const auto& cal = specsim::testing::default_calibration();
  SplitMix64 rng(8);
  TreeShape shape;
  SelectorConfig cfg;
  int lower_or_equal = 0;
  for (int trial = 0; trial < 50; ++trial) {
    const auto tree = generate_tree(shape, rng);
    Predictor p(cal.acceptance, cal.cost, cal.buckets);
    const auto heavy = select_strategy(tree, BatchContext{64, 64 * 700}, p, cfg);
    const auto light = select_strategy(tree, BatchContext{4, 4 * 700}, p, cfg);
    if (heavy.n <= light.n) ++lower_or_equal;
  }
  CHECK(lower_or_equal == 50);
}

TEST_CASE("speedup and t_ar invariance") {
  StrategyEvaluation ev;
  ev.predicted_accepted = 3.0;
  ev.predicted_time = 1.5;
  CHECK(speedup_of(ev, 1.0) == doctest::Approx(2.0));
  ev.predicted_accepted = 1.0;
  ev.predicted_time = 0.7;
  CHECK(speedup_of(ev, 0.7) == doctest::Approx(1.0));
  CHECK_THROWS(speedup_of(ev, 0.0));

  // the budget never depends on t_ar; the speedup scales with it
  const auto& cal = specsim::testing::default_calibration();
  SplitMix64 rng(2);
  const auto tree = generate_tree(TreeShape{}, rng);
  Predictor p(cal.acceptance, cal.cost, cal.buckets);
  const auto a = select_strategy(tree, BatchContext{8, 8000}, p, SelectorConfig{});
  for (double t_ar : {0.01, 0.1, 1.0, 10.0}) {
    CHECK(speedup_of(a, t_ar) == doctest::Approx(t_ar * a.predicted_accepted / a.predicted_time));
  }
}

TEST_CASE("batch search with identical trees matches the single-tree search") {
  const auto& cal = specsim::testing::default_calibration();
  SplitMix64 rng(12);
  TreeShape shape;
  for (int trial = 0; trial < 40; ++trial) {
    const auto tree = generate_tree(shape, rng);
    const int batch = 1 + trial;
    Predictor p1(cal.acceptance, cal.cost, cal.buckets);
    Predictor p2(cal.acceptance, cal.cost, cal.buckets);
    const auto single = select_strategy(tree, BatchContext{batch, batch * 500}, p1, SelectorConfig{});
    const auto trace = greedy_trace(tree, p2.weights(tree), 48);
    const std::vector<GreedyTrace> traces(static_cast<std::size_t>(batch), trace);
    const auto d = select_batch_strategy(traces, BatchContext{batch, batch * 500}, p2, SelectorConfig{});
    CHECK(d.n == single.n);
    CHECK(d.predicted_al == doctest::Approx(batch * single.predicted_al).epsilon(1e-12));
  }
}

TEST_CASE("selection latency") {
  const auto& cal = specsim::testing::default_calibration();
  SplitMix64 rng(13);
  std::vector<SpecTree> trees;
  for (int i = 0; i < 200; ++i) trees.push_back(specsim::testing::random_tree(rng, 256));
  SelectorConfig cfg;
  cfg.early_stop = false;  // worst case: full scan to n_max
  Predictor p(cal.acceptance, cal.cost, cal.buckets);
  const auto t0 = std::chrono::steady_clock::now();
  int sink = 0;
  for (const auto& tree : trees) sink += select_strategy(tree, BatchContext{16, 16000}, p, cfg).n;
  const auto dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  CHECK(sink > 0);
  CHECK(dt / static_cast<double>(trees.size()) < 1e-3);
}
