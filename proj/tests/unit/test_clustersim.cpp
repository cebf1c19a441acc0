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

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

#include "fixtures.hpp"
#include "specsim/clustersim.hpp"
#include "specsim/error.hpp"
#include "specsim/kernels.hpp"
#include "specsim/oracle.hpp"
#include "specsim/report.hpp"

using namespace specsim;
using specsim::testing::default_calibration;

namespace {

// Exact expected path length: enumerate which selected children succeed,
// weight each accepted child by its dl share, recurse below it.
double exact_path(const SpecTree& tree, std::span<const NodeId> candidates, const std::vector<char>& mask,
                  const GroundTruth& g) {
  std::vector<NodeId> c;
  for (NodeId id : candidates) {
    if (mask[id]) c.push_back(id);
  }
  double e = 0.0;
  const auto k = c.size();
  for (std::uint32_t sub = 1; sub < (1u << k); ++sub) {
    double p = 1.0;
    double mass = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
      const double q = g(tree.node(c[i]).draft_logit);
      if (sub >> i & 1u) {
        p *= q;
        mass += tree.node(c[i]).draft_logit;
      } else {
        p *= 1.0 - q;
      }
    }
    if (p == 0.0) continue;
    for (std::size_t i = 0; i < k; ++i) {
      if (!(sub >> i & 1u)) continue;
      const double share = tree.node(c[i]).draft_logit / mass;
      e += p * share * (1.0 + exact_path(tree, tree.children(c[i]), mask, g));
    }
  }
  return e;
}

SimConfig small_config(Mode mode) {
  SimConfig c;
  c.mode = mode;
  c.instances = 2;
  c.seed = 3;
  return c;
}

}  // namespace

TEST_CASE("exact acceptance expectation on the eight-node tree") {
  const auto tree = specsim::testing::eight_node_tree();
  const auto g = GroundTruth::identity();
  for (int n : {1, 2, 4, 6, 8}) {
    const auto sel = top_n_selection(tree, n, tree.draft_logits());
    std::vector<char> mask(tree.size(), 0);
    for (NodeId id : sel.node_ids) mask[id] = 1;
    const double exact = 1.0 + exact_path(tree, tree.root_level(), mask, g);
    const double mc = expected_accepted_mc(tree, sel, g, 100000, 77, Exec::Parallel);
    CHECK(std::abs(mc - exact) <= 0.01 * exact);
  }
  // hand value for the single best node: accepted with probability 0.7
  const auto one = top_n_selection(tree, 1, tree.draft_logits());
  std::vector<char> m1(tree.size(), 0);
  m1[one.node_ids[0]] = 1;
  CHECK(exact_path(tree, tree.root_level(), m1, g) == doctest::Approx(0.7));
}

TEST_CASE("oracle boundary truths") {
  SplitMix64 rng(1);
  const auto tree = generate_tree(TreeShape{}, rng);
  const auto sel = top_n_selection(tree, 20, tree.draft_logits());
  for (int i = 0; i < 100; ++i) {
    const auto draws = draw_acceptance(tree, rng);
    CHECK(sample_acceptance(tree, sel, GroundTruth::never(), draws).accepted_tokens() == 1);
    const auto all = sample_acceptance(tree, sel, GroundTruth::always(), draws);
    CHECK(all.accepted_tokens() >= 2);
    // the accepted path is a chain of selected nodes
    for (std::size_t k = 1; k < all.path.size(); ++k) CHECK(tree.node(all.path[k]).parent == all.path[k - 1]);
    CHECK(!tree.node(all.path[0]).parent);
  }
}

TEST_CASE("nested selections accept nested paths") {
  SplitMix64 rng(2);
  const GroundTruth g;
  for (int trial = 0; trial < 200; ++trial) {
    const auto tree = generate_tree(TreeShape{}, rng);
    const auto draws = draw_acceptance(tree, rng);
    const auto w = tree.draft_logits();
    int prev = 0;
    for (int n = 1; n <= 30; ++n) {
      const int a = sample_acceptance(tree, top_n_selection(tree, n, w), g, draws).accepted_tokens();
      CHECK(a <= n + 1);
      prev = a;
    }
    CHECK(prev >= 1);
  }
}

TEST_CASE("serial and parallel kernels agree") {
  const auto& cal = default_calibration();
  std::vector<DraftRequest> req;
  for (std::uint64_t i = 0; i < 64; ++i) req.push_back({i, i * 3});
  std::vector<SampleDraft> a;
  std::vector<SampleDraft> b;
  draft_batch(req, 5, TreeShape{}, cal.acceptance, 48, a, Exec::Serial);
  draft_batch(req, 5, TreeShape{}, cal.acceptance, 48, b, Exec::Parallel);
  REQUIRE(a.size() == b.size());
  for (std::size_t k = 0; k < a.size(); ++k) {
    CHECK(a[k].trace.order == b[k].trace.order);
    CHECK(a[k].trace.gains == b[k].trace.gains);
    CHECK(a[k].draws.success == b[k].draws.success);
  }
  std::vector<AcceptanceOutcome> oa;
  std::vector<AcceptanceOutcome> ob;
  verify_batch(a, 12, GroundTruth{}, oa, Exec::Serial);
  verify_batch(b, 12, GroundTruth{}, ob, Exec::Parallel);
  for (std::size_t k = 0; k < oa.size(); ++k) CHECK(oa[k].path == ob[k].path);

  const auto tree = specsim::testing::eight_node_tree();
  const auto sel = top_n_selection(tree, 5, tree.draft_logits());
  CHECK(expected_accepted_mc(tree, sel, GroundTruth{}, 50000, 9, Exec::Serial) ==
        expected_accepted_mc(tree, sel, GroundTruth{}, 50000, 9, Exec::Parallel));
}

TEST_CASE("certain acceptance on chain trees") {
  const auto& cal = default_calibration();
  for (int d : {1, 3, 5}) {
    auto cfg = small_config(Mode::FixedN);
    cfg.instances = 1;
    cfg.tree = TreeShape{d, 1, 1, 0.65, 0.9, 6.0};
    cfg.fixed_n = d;
    cfg.truth = GroundTruth::always();
    const auto r = run_generation(cfg, cal, uniform_workload(3, 100, 32));
    for (const auto& s : r.steps[0]) {
      CHECK(s.chosen_n == d);
      CHECK(s.realized_accepted == doctest::Approx(s.samples * (d + 1)));
    }
    CHECK(r.steps[0].size() == static_cast<std::size_t>((100 + d) / (d + 1)));
  }
}

TEST_CASE("rejection floor finishes in exactly L steps") {
  const auto& cal = default_calibration();
  for (Mode m : {Mode::Autoregressive, Mode::FixedN, Mode::Adaptive}) {
    auto cfg = small_config(m);
    cfg.instances = 1;
    cfg.truth = GroundTruth::never();
    const auto r = run_generation(cfg, cal, uniform_workload(1, 57, 64));
    CHECK(r.steps[0].size() == 57);
    for (const auto& s : r.steps[0]) CHECK(s.tokens == 1);
    CHECK(r.total_tokens == 57);
  }
}

TEST_CASE("token conservation and per-step bounds") {
  const auto& cal = default_calibration();
  WorkloadSpec ws;
  ws.sample_count = 40;
  ws.seed = 8;
  const auto w = generate_workload(ws);
  const auto expected = std::accumulate(w.begin(), w.end(), std::int64_t{0},
                                        [](std::int64_t a, const Sample& s) { return a + s.true_total; });
  for (Mode m : {Mode::Autoregressive, Mode::FixedN, Mode::Adaptive, Mode::AdaptiveRealloc}) {
    const auto r = run_generation(small_config(m), cal, w);
    CHECK(r.total_tokens == expected);
    for (const auto& inst : r.steps) {
      for (const auto& s : inst) {
        CHECK(s.tokens <= s.realized_accepted);
        CHECK(s.realized_accepted >= s.samples);
        if (m != Mode::Autoregressive) CHECK(s.realized_accepted <= s.samples * (s.chosen_n + 1));
        CHECK(s.realized_t > 0.0);
      }
    }
    double last = 0.0;
    for (double f : r.finish_t) {
      CHECK(f > 0.0);
      last = std::max(last, f);
    }
    CHECK(r.completion_s == last);
  }
}

TEST_CASE("runs are deterministic and independent of the kernel backend") {
  const auto& cal = default_calibration();
  WorkloadSpec ws;
  ws.sample_count = 64;
  ws.seed = 2;
  const auto w = generate_workload(ws);
  auto cfg = small_config(Mode::AdaptiveRealloc);
  cfg.realloc.cooldown = 8;
  const auto a = run_generation(cfg, cal, w);
  const auto b = run_generation(cfg, cal, w);
  cfg.exec = Exec::Serial;
  const auto c = run_generation(cfg, cal, w);
  for (int i = 0; i < 2; ++i) {
    CHECK(instance_csv(a, i) == instance_csv(b, i));
    CHECK(telemetry_csv(a, i) == telemetry_csv(b, i));
    CHECK(telemetry_csv(a, i) == telemetry_csv(c, i));
  }
  CHECK(run_summary(a).dump() == run_summary(c).dump());
}

TEST_CASE("rebalance scenario shape") {
  const auto& cal = default_calibration();
  const auto sc = make_rebalance_scenario();
  auto cfg = small_config(Mode::Adaptive);
  cfg.placement = sc.placement;
  const auto off = run_generation(cfg, cal, sc.workload);
  cfg.mode = Mode::AdaptiveRealloc;
  const auto on = run_generation(cfg, cal, sc.workload);

  // without reallocation the short-heavy instance decays to a single sample
  const double early = off.instance_throughput(1, 0.0, 0.3);
  const double late = off.instance_throughput(1, 2.0, 3.0);
  CHECK(late < 0.25 * early);
  CHECK(off.instance_throughput(0, 2.0, 3.0) > 0.8 * off.instance_throughput(0, 0.1, 0.4));

  REQUIRE(on.realloc_count >= 1);
  const auto first = std::find_if(on.decisions.begin(), on.decisions.end(),
                                  [](const DecisionRecord& d) { return d.triggered; });
  REQUIRE(first != on.decisions.end());
  const double t = first->t_sim;
  CHECK(on.system_throughput(t, t + 1.0) > off.system_throughput(t, t + 1.0));
  CHECK(on.completion_s < off.completion_s);
  for (const auto& m : on.migrations) {
    if (m.outcome != "complete") continue;
    CHECK(m.detach_t >= m.stage1_end_t);
    CHECK(m.resume_t >= m.detach_t);
    CHECK(m.join_t >= m.resume_t);
    CHECK(m.stall_s == doctest::Approx(m.resume_t - m.detach_t));
  }
}

TEST_CASE("calibrated throughput roofline") {
  const auto& cal = default_calibration();
  const auto& curve = cal.threshold.curve;
  REQUIRE(curve.size() >= 3);
  const double first = (curve[1].throughput - curve[0].throughput) / (curve[1].count - curve[0].count);
  CHECK(first > 0.0);
  for (std::size_t i = 1; i < curve.size(); ++i) {
    if (curve[i - 1].count < cal.threshold.threshold) continue;
    const double slope = (curve[i].throughput - curve[i - 1].throughput) / (curve[i].count - curve[i - 1].count);
    CHECK(slope <= 0.1 * first);
  }
}

TEST_CASE("configuration errors") {
  const auto& cal = default_calibration();
  SimConfig c;
  c.instances = 0;
  CHECK_THROWS_AS(run_generation(c, cal, {}), ConfigError);
  c.instances = 2;
  c.placement = {0, 5};
  CHECK_THROWS_AS(run_generation(c, cal, uniform_workload(2, 5, 5)), ConfigError);
  c.placement = {0};
  CHECK_THROWS_AS(run_generation(c, cal, uniform_workload(2, 5, 5)), ConfigError);
  c.placement.clear();
  const auto empty = run_generation(c, cal, {});
  CHECK(empty.completion_s == 0.0);
  CHECK(empty.total_tokens == 0);

  int k = 0;
  CHECK(parse_mode("fixed-n:12", &k) == Mode::FixedN);
  CHECK(k == 12);
  CHECK(parse_mode("adaptive+realloc") == Mode::AdaptiveRealloc);
  CHECK(parse_mode("default") == Mode::Autoregressive);
  CHECK_FALSE(parse_mode("greedy"));
}
