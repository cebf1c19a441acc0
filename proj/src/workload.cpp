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

#include "specsim/workload.hpp"

#include <algorithm>
#include <random>

#include "specsim/error.hpp"
#include "specsim/rng.hpp"

namespace specsim {

int Sample::advance(int tokens) noexcept {
  const int take = std::clamp(tokens, 0, remaining());
  generated += take;
  kv_ssm += take;
  kv_llm += take;
  ++steps;
  avg_accepted += (static_cast<double>(tokens) - avg_accepted) / steps;
  return take;
}

WorkloadSpec WorkloadSpec::from_quantiles(double median, double p95, int sample_count, std::uint64_t seed) {
  if (!(median > 0.0) || p95 < median) throw ConfigError("quantiles must satisfy 0 < median <= p95");
  WorkloadSpec s;
  s.length_mu = std::log(median);
  s.length_sigma = std::log(p95 / median) / 1.6448536269514722;
  s.sample_count = sample_count;
  s.seed = seed;
  return s;
}

void WorkloadSpec::validate() const {
  if (sample_count < 0) throw ConfigError("sample_count must be >= 0");
  if (length_sigma < 0.0 || prompt_sigma < 0.0) throw ConfigError("lognormal sigma must be >= 0");
  if (max_new_tokens < 1) throw ConfigError("max_new_tokens must be >= 1");
  if (prompt_min < 1 || prompt_max < prompt_min) throw ConfigError("prompt bounds invalid");
}

namespace {

int draw_lognormal(SplitMix64& rng, double mu, double sigma, int lo, int hi) {
  double x = mu;
  if (sigma > 0.0) {
    std::normal_distribution<double> normal(0.0, 1.0);
    x += sigma * normal(rng);
  }
  const double v = std::round(std::exp(x));
  return static_cast<int>(std::clamp(v, static_cast<double>(lo), static_cast<double>(hi)));
}

}  // namespace

std::vector<Sample> generate_workload(const WorkloadSpec& spec) {
  spec.validate();
  std::vector<Sample> out;
  out.reserve(static_cast<std::size_t>(spec.sample_count));
  for (int i = 0; i < spec.sample_count; ++i) {
    SplitMix64 rng(derive_seed({spec.seed, 0x776f726bULL, static_cast<std::uint64_t>(i)}));
    Sample s;
    s.id = static_cast<SampleId>(i);
    s.true_total = draw_lognormal(rng, spec.length_mu, spec.length_sigma, 1, spec.max_new_tokens);
    s.prompt_len = draw_lognormal(rng, spec.prompt_mu, spec.prompt_sigma, spec.prompt_min, spec.prompt_max);
    s.kv_ssm = s.prompt_len;
    s.kv_llm = s.prompt_len;
    out.push_back(s);
  }
  return out;
}

std::vector<Sample> uniform_workload(int n, int output_len, int prompt_len, SampleId first_id) {
  std::vector<Sample> out(static_cast<std::size_t>(std::max(0, n)));
  for (std::size_t i = 0; i < out.size(); ++i) {
    auto& s = out[i];
    s.id = first_id + static_cast<SampleId>(i);
    s.prompt_len = prompt_len;
    s.true_total = output_len;
    s.kv_ssm = prompt_len;
    s.kv_llm = prompt_len;
  }
  return out;
}

}  // namespace specsim
