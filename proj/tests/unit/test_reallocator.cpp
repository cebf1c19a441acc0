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
#include <functional>
#include <numeric>
#include <set>

#include "specsim/error.hpp"
#include "specsim/reallocator.hpp"
#include "specsim/rng.hpp"

using namespace specsim;

namespace {

std::vector<int> apply_plan(std::vector<int> loads, const ReallocationPlan& plan) {
  for (const auto& t : plan.transfers) {
    loads[static_cast<std::size_t>(t.src)] -= t.count;
    loads[static_cast<std::size_t>(t.dst)] += t.count;
  }
  return loads;
}

// Maximum of sum(d_next - d_cur) over every feasible plan: an instance joins
// at most one transfer, sources stay at or above the threshold and
// destinations at or below it.
int exhaustive_best(const std::vector<int>& loads, int thr) {
  const int n = static_cast<int>(loads.size());
  std::vector<char> used(static_cast<std::size_t>(n), 0);
  std::function<int()> rec = [&]() -> int {
    int best = 0;
    for (int s = 0; s < n; ++s) {
      if (used[static_cast<std::size_t>(s)] || loads[static_cast<std::size_t>(s)] <= thr) continue;
      for (int d = 0; d < n; ++d) {
        if (d == s || used[static_cast<std::size_t>(d)] || loads[static_cast<std::size_t>(d)] >= thr) continue;
        const int cap = std::min(loads[static_cast<std::size_t>(s)] - thr, thr - loads[static_cast<std::size_t>(d)]);
        used[static_cast<std::size_t>(s)] = used[static_cast<std::size_t>(d)] = 1;
        const int rest = rec();
        for (int k = 1; k <= cap; ++k) best = std::max(best, k + rest);
        used[static_cast<std::size_t>(s)] = used[static_cast<std::size_t>(d)] = 0;
      }
    }
    return best;
  };
  return rec();
}

void check_constraints(const std::vector<int>& loads, int thr, const ReallocationPlan& plan) {
  const auto next = apply_plan(loads, plan);
  std::map<int, int> seen;
  for (const auto& t : plan.transfers) {
    REQUIRE(t.src != t.dst);
    CHECK(t.count > 0);
    CHECK(loads[static_cast<std::size_t>(t.src)] > thr);
    CHECK(loads[static_cast<std::size_t>(t.dst)] < thr);
    CHECK(next[static_cast<std::size_t>(t.src)] >= thr);
    CHECK(next[static_cast<std::size_t>(t.dst)] <= thr);
    ++seen[t.src];
    ++seen[t.dst];
  }
  for (const auto& [k, m] : seen) CHECK(m <= 1);
}

}  // namespace

TEST_CASE("threshold knee examples") {
  const std::vector<ThroughputPoint> p{{1, 100}, {2, 200}, {4, 400}, {8, 780}, {16, 1450}, {24, 1500}, {32, 1510}};
  const auto e = estimate_threshold(p);
  CHECK(e.threshold == 24);
  CHECK(e.curve.size() == p.size());

  const std::vector<ThroughputPoint> linear{{1, 10}, {2, 20}, {4, 40}, {8, 80}};
  CHECK(estimate_threshold(linear).threshold == 8);

  const std::vector<ThroughputPoint> flat{{1, 100}, {2, 100}, {4, 100}};
  CHECK(estimate_threshold(flat).threshold == 1);

  const std::vector<ThroughputPoint> falling{{1, 100}, {2, 90}, {4, 120}};
  CHECK_THROWS_AS(estimate_threshold(falling), DegenerateProfile);
  const std::vector<ThroughputPoint> short_profile{{1, 100}, {2, 200}};
  CHECK_THROWS(estimate_threshold(short_profile));
  const std::vector<ThroughputPoint> unordered{{1, 100}, {4, 200}, {2, 300}};
  CHECK_THROWS(estimate_threshold(unordered));

  CHECK(e.throughput_at(20) == doctest::Approx(1475));
  CHECK(e.throughput_at(0) == 100);
  CHECK(e.throughput_at(100) == 1510);
}

TEST_CASE("classification") {
  const std::vector<int> counts{24, 6, 1};
  const auto l = classify_loads(counts, 6);
  CHECK(l[0].role == LoadRole::Source);
  CHECK(l[1].role == LoadRole::Neutral);
  CHECK(l[2].role == LoadRole::Destination);
  CHECK(l[2].instance == 2);
}

TEST_CASE("two-instance example moves five samples") {
  const std::vector<int> counts{24, 1};
  const auto loads = classify_loads(counts, 6);
  const auto plan = plan_reallocation(loads, 6);
  REQUIRE(plan.transfers.size() == 1);
  CHECK(plan.transfers[0].count == 5);
  CHECK(apply_plan(counts, plan) == std::vector<int>{19, 6});
  CHECK(plan.moved() == 5);
  CHECK(plan_total(plan) == 5);
}

TEST_CASE("four-instance example") {
  const std::vector<int> counts{30, 10, 2, 2};
  const auto plan = plan_reallocation(classify_loads(counts, 8), 8);
  REQUIRE(plan.transfers.size() == 2);
  CHECK(plan.transfers[0].src == 0);
  CHECK(plan.transfers[0].count == 6);
  CHECK(plan.transfers[1].src == 1);
  CHECK(plan.transfers[1].count == 2);
  CHECK(apply_plan(counts, plan) == std::vector<int>{24, 8, 8, 4});
  CHECK(plan_total(plan) == exhaustive_best(counts, 8));
  check_constraints(counts, 8, plan);
}

TEST_CASE("no destinations gives an empty plan") {
  const std::vector<int> counts{9, 8, 12};
  CHECK(plan_reallocation(classify_loads(counts, 8), 8).empty());
}

TEST_CASE("greedy pairing matches exhaustive search on small fleets") {
  SplitMix64 rng(17);
  for (int trial = 0; trial < 3000; ++trial) {
    const int n = 2 + static_cast<int>(rng.uniform() * 4);  // 2..5
    std::vector<int> counts(static_cast<std::size_t>(n));
    for (auto& c : counts) c = static_cast<int>(rng.uniform() * 41);
    const int thr = 1 + static_cast<int>(rng.uniform() * 40);
    const auto plan = plan_reallocation(classify_loads(counts, thr), thr);
    check_constraints(counts, thr, plan);
    CHECK(plan_total(plan) == exhaustive_best(counts, thr));
  }
}

TEST_CASE("sample choice prefers short and low-acceptance samples") {
  std::vector<SampleMeta> r{{1, 500, 2.0}, {2, 100, 3.0}, {3, 100, 1.5}, {4, 900, 1.0}, {5, 100, 1.5}};
  CHECK(choose_samples(r, 3) == std::vector<SampleId>{3, 5, 2});
  SplitMix64 rng(3);
  for (int i = 0; i < 50; ++i) {
    std::shuffle(r.begin(), r.end(), rng);
    auto picked = choose_samples(r, 3);
    std::sort(picked.begin(), picked.end());
    CHECK(picked == std::vector<SampleId>{2, 3, 5});
  }
  CHECK(choose_samples(r, 10).size() == r.size());
}

TEST_CASE("plans name concrete samples") {
  const std::vector<int> counts{5, 1};
  std::vector<InstanceSamples> samples(2);
  samples[0].instance = 0;
  for (SampleId i = 0; i < 5; ++i) samples[0].samples.push_back({i, 1000 - 100 * static_cast<std::int64_t>(i), 1.0});
  samples[1].instance = 1;
  samples[1].samples.push_back({9, 10, 1.0});
  const auto plan = plan_reallocation(classify_loads(counts, 3), 3, samples);
  REQUIRE(plan.transfers.size() == 1);
  CHECK(plan.transfers[0].count == 2);
  CHECK(plan.transfers[0].samples == std::vector<SampleId>{4, 3});
}

TEST_CASE("trigger rule") {
  const std::vector<int> counts{24, 1};
  const auto loads = classify_loads(counts, 6);
  CHECK(should_trigger(loads, 6, {32, 32}));
  CHECK_FALSE(should_trigger(loads, 6, {31, 32}));
  const std::vector<int> at{6, 6, 6};
  CHECK_FALSE(should_trigger(classify_loads(at, 6), 6, {100, 32}));
  const std::vector<int> only_src{9, 6};
  CHECK_FALSE(should_trigger(classify_loads(only_src, 6), 6, {100, 32}));
}

TEST_CASE("controller cooldown and log") {
  ThresholdEstimate thr;
  thr.threshold = 6;
  thr.curve = {{1, 100}, {6, 600}, {24, 700}};
  Reallocator r(thr, ReallocConfig{true, 4});
  int due = 0;
  for (int i = 0; i < 3; ++i) due += r.on_step(0);
  CHECK(due == 0);
  CHECK(r.on_step(0));
  const std::vector<int> counts{24, 1};
  std::vector<InstanceSamples> residents(2);
  residents[0].instance = 0;
  for (SampleId i = 0; i < 24; ++i) residents[0].samples.push_back({i, 100, 1.0});
  residents[1].instance = 1;
  residents[1].samples.push_back({99, 100, 1.0});
  const auto plan = r.decide(4, 1.0, counts, residents);
  CHECK(plan.moved() == 5);
  REQUIRE(r.log().size() == 1);
  CHECK(r.log()[0].triggered);
  CHECK(r.log()[0].summary == "0->1:5");
  CHECK(r.log()[0].predicted_gain > 0.0);
  CHECK(r.triggered_count() == 1);
  // counts restart after a decision
  for (int i = 0; i < 3; ++i) CHECK_FALSE(r.on_step(1));
  CHECK(r.on_step(1));
  const std::vector<int> balanced{6, 6};
  CHECK(r.decide(8, 2.0, balanced, {}).empty());
  CHECK(r.log().size() == 2);
  CHECK_FALSE(r.log()[1].triggered);

  Reallocator off(thr, ReallocConfig{false, 4});
  CHECK(off.decide(4, 1.0, counts, residents).empty());
  CHECK(off.log().size() == 1);
  CHECK(off.triggered_count() == 0);
}

TEST_CASE("constraint fuzz") {
  SplitMix64 rng(99);
  for (int trial = 0; trial < 10000; ++trial) {
    const int n = 1 + static_cast<int>(rng.uniform() * 16);
    std::vector<int> counts(static_cast<std::size_t>(n));
    for (auto& c : counts) c = static_cast<int>(rng.uniform() * 129);
    const int thr = 1 + static_cast<int>(rng.uniform() * 64);
    const auto plan = plan_reallocation(classify_loads(counts, thr), thr);
    check_constraints(counts, thr, plan);
    const auto next = apply_plan(counts, plan);
    CHECK(std::accumulate(next.begin(), next.end(), 0) == std::accumulate(counts.begin(), counts.end(), 0));
  }
}
