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

#include "specsim/reallocator.hpp"

#include <algorithm>
#include <cstdio>
#include <stdexcept>

#include "specsim/error.hpp"

namespace specsim {

double ThresholdEstimate::throughput_at(double count) const noexcept {
  if (curve.empty()) return 0.0;
  if (count <= curve.front().count) return curve.front().throughput;
  for (std::size_t i = 1; i < curve.size(); ++i) {
    if (count <= curve[i].count) {
      const auto& a = curve[i - 1];
      const auto& b = curve[i];
      const double f = (count - a.count) / static_cast<double>(b.count - a.count);
      return a.throughput + f * (b.throughput - a.throughput);
    }
  }
  return curve.back().throughput;
}

ThresholdEstimate estimate_threshold(std::span<const ThroughputPoint> profile, double knee_fraction) {
  if (profile.size() < 3) throw std::invalid_argument("threshold estimation needs at least 3 profile points");
  for (std::size_t i = 1; i < profile.size(); ++i) {
    if (profile[i].count <= profile[i - 1].count) throw std::invalid_argument("profile counts must increase");
  }
  ThresholdEstimate est;
  est.curve.assign(profile.begin(), profile.end());
  auto gain = [&](std::size_t i) {
    return (profile[i].throughput - profile[i - 1].throughput) /
           static_cast<double>(profile[i].count - profile[i - 1].count);
  };
  const double first = gain(1);
  if (first < 0.0) throw DegenerateProfile("throughput decreases from the first profile point");
  if (first == 0.0) {
    est.threshold = profile.front().count;
    return est;
  }
  est.threshold = profile.back().count;
  for (std::size_t i = 2; i < profile.size(); ++i) {
    if (gain(i) < knee_fraction * first) {
      est.threshold = profile[i].count;
      break;
    }
  }
  return est;
}

std::vector<InstanceLoad> classify_loads(std::span<const int> counts, int threshold) {
  std::vector<InstanceLoad> out;
  out.reserve(counts.size());
  for (std::size_t i = 0; i < counts.size(); ++i) {
    const int c = counts[i];
    const auto role = c > threshold ? LoadRole::Source : (c < threshold ? LoadRole::Destination : LoadRole::Neutral);
    out.push_back({static_cast<int>(i), c, role});
  }
  return out;
}

int ReallocationPlan::moved() const noexcept {
  int m = 0;
  for (const auto& t : transfers) m += t.count;
  return m;
}

int plan_total(const ReallocationPlan& plan) { return plan.moved(); }

ReallocationPlan plan_reallocation(std::span<const InstanceLoad> loads, int threshold) {
  if (threshold < 1) throw std::invalid_argument("threshold must be >= 1");
  std::vector<InstanceLoad> src;
  std::vector<InstanceLoad> dst;
  for (const auto& l : loads) {
    if (l.current > threshold) src.push_back(l);
    if (l.current < threshold) dst.push_back(l);
  }
  std::sort(src.begin(), src.end(), [](const InstanceLoad& a, const InstanceLoad& b) {
    return a.current != b.current ? a.current > b.current : a.instance < b.instance;
  });
  std::sort(dst.begin(), dst.end(), [](const InstanceLoad& a, const InstanceLoad& b) {
    return a.current != b.current ? a.current < b.current : a.instance < b.instance;
  });
  ReallocationPlan plan;
  const std::size_t pairs = std::min(src.size(), dst.size());
  for (std::size_t k = 0; k < pairs; ++k) {
    const int x = std::min(src[k].current - threshold, threshold - dst[k].current);
    if (x <= 0) break;
    plan.transfers.push_back({src[k].instance, dst[k].instance, x, {}});
    ++plan.migration_count[src[k].instance];
    ++plan.migration_count[dst[k].instance];
  }
  return plan;
}

std::vector<SampleId> choose_samples(std::span<const SampleMeta> residents, int count) {
  std::vector<SampleMeta> order(residents.begin(), residents.end());
  std::sort(order.begin(), order.end(), [](const SampleMeta& a, const SampleMeta& b) {
    if (a.seq_len != b.seq_len) return a.seq_len < b.seq_len;
    if (a.avg_accepted != b.avg_accepted) return a.avg_accepted < b.avg_accepted;
    return a.id < b.id;
  });
  const auto k = std::min<std::size_t>(order.size(), static_cast<std::size_t>(std::max(0, count)));
  std::vector<SampleId> out;
  out.reserve(k);
  for (std::size_t i = 0; i < k; ++i) out.push_back(order[i].id);
  return out;
}

ReallocationPlan plan_reallocation(std::span<const InstanceLoad> loads, int threshold,
                                   std::span<const InstanceSamples> samples) {
  auto plan = plan_reallocation(loads, threshold);
  for (auto& t : plan.transfers) {
    const auto it = std::find_if(samples.begin(), samples.end(),
                                 [&](const InstanceSamples& s) { return s.instance == t.src; });
    if (it == samples.end()) {
      t.count = 0;
      continue;
    }
    t.samples = choose_samples(it->samples, t.count);
    t.count = static_cast<int>(t.samples.size());
  }
  std::erase_if(plan.transfers, [](const Transfer& t) { return t.count == 0; });
  plan.migration_count.clear();
  for (const auto& t : plan.transfers) {
    ++plan.migration_count[t.src];
    ++plan.migration_count[t.dst];
  }
  return plan;
}

bool should_trigger(std::span<const InstanceLoad> loads, int threshold, const CooldownState& state) {
  if (state.steps_since_decision < state.cooldown) return false;
  bool has_src = false;
  bool has_dst = false;
  for (const auto& l : loads) {
    has_src = has_src || l.current > threshold;
    has_dst = has_dst || l.current < threshold;
  }
  return has_src && has_dst;
}

Reallocator::Reallocator(ThresholdEstimate threshold, ReallocConfig cfg) : threshold_(std::move(threshold)), cfg_(cfg) {
  if (cfg_.cooldown < 1) throw ConfigError("cooldown must be >= 1");
  if (threshold_.threshold < 1) throw ConfigError("threshold must be >= 1");
}

bool Reallocator::on_step(int instance) { return ++steps_[instance] >= cfg_.cooldown; }

ReallocationPlan Reallocator::decide(std::int64_t step, double t_sim, std::span<const int> counts,
                                     std::span<const InstanceSamples> samples) {
  int since = 0;
  for (const auto& [id, n] : steps_) since = std::max(since, n);
  steps_.clear();

  const int thr = threshold_.threshold;
  const auto loads = classify_loads(counts, thr);
  DecisionRecord rec;
  rec.step = step;
  rec.t_sim = t_sim;
  rec.loads.assign(counts.begin(), counts.end());
  rec.triggered = cfg_.enabled && should_trigger(loads, thr, {since, cfg_.cooldown});
  ReallocationPlan plan;
  if (rec.triggered) {
    plan = plan_reallocation(loads, thr, samples);
    rec.triggered = !plan.empty();
  }
  std::vector<int> next(counts.begin(), counts.end());
  for (const auto& t : plan.transfers) {
    if (!rec.summary.empty()) rec.summary += ';';
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%d->%d:%d", t.src, t.dst, t.count);
    rec.summary += buf;
    next[static_cast<std::size_t>(t.src)] -= t.count;
    next[static_cast<std::size_t>(t.dst)] += t.count;
  }
  for (std::size_t i = 0; i < next.size(); ++i) {
    rec.predicted_gain += threshold_.throughput_at(next[i]) - threshold_.throughput_at(counts[i]);
  }
  if (rec.triggered) ++triggered_;
  log_.push_back(std::move(rec));
  return plan;
}

}  // namespace specsim
