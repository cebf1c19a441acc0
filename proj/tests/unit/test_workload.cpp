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

#include "specsim/error.hpp"
#include "specsim/workload.hpp"

using namespace specsim;

namespace {

double quantile(std::vector<int> v, double q) {
  std::sort(v.begin(), v.end());
  const auto k = static_cast<std::size_t>(q * static_cast<double>(v.size() - 1));
  return v[k];
}

}  // namespace

TEST_CASE("lognormal parameters from quantiles") {
  const auto s = WorkloadSpec::from_quantiles(378, 1373, 10, 1);
  CHECK(s.length_mu == doctest::Approx(5.935).epsilon(1e-3));
  CHECK(s.length_sigma == doctest::Approx(0.784).epsilon(1e-3));
  CHECK(std::exp(s.length_mu) == doctest::Approx(378));
  CHECK(std::exp(s.length_mu + 1.6448536269514722 * s.length_sigma) == doctest::Approx(1373));
  const WorkloadSpec d;
  CHECK(d.length_mu == doctest::Approx(s.length_mu));
  CHECK(d.length_sigma == doctest::Approx(s.length_sigma));
  CHECK(d.max_new_tokens == 2048);
  CHECK_THROWS_AS(WorkloadSpec::from_quantiles(0, 10, 1, 1), ConfigError);
}

TEST_CASE("empirical quantiles of generated lengths") {
  WorkloadSpec s;
  s.sample_count = 100000;
  s.seed = 12345;
  const auto w = generate_workload(s);
  std::vector<int> len;
  for (const auto& x : w) {
    len.push_back(x.true_total);
    CHECK(x.true_total >= 1);
    CHECK(x.true_total <= 2048);
    CHECK(x.prompt_len >= s.prompt_min);
    CHECK(x.prompt_len <= s.prompt_max);
  }
  CHECK(std::abs(quantile(len, 0.5) - 378.0) <= 0.03 * 378.0);
  CHECK(std::abs(quantile(len, 0.95) - 1373.0) <= 0.05 * 1373.0);
}

TEST_CASE("zero sigma gives constant lengths") {
  WorkloadSpec s;
  s.sample_count = 50;
  s.length_sigma = 0.0;
  s.prompt_sigma = 0.0;
  for (const auto& x : generate_workload(s)) {
    CHECK(x.true_total == 378);
    CHECK(x.prompt_len == 128);
  }
}

TEST_CASE("generation is deterministic and prefix stable") {
  WorkloadSpec s;
  s.sample_count = 300;
  s.seed = 4;
  const auto a = generate_workload(s);
  const auto b = generate_workload(s);
  s.sample_count = 100;
  const auto c = generate_workload(s);
  for (std::size_t i = 0; i < c.size(); ++i) {
    CHECK(a[i].true_total == b[i].true_total);
    CHECK(a[i].true_total == c[i].true_total);
    CHECK(a[i].prompt_len == c[i].prompt_len);
  }
  s.seed = 5;
  const auto d = generate_workload(s);
  int same = 0;
  for (std::size_t i = 0; i < d.size(); ++i) same += d[i].true_total == c[i].true_total;
  CHECK(same < 20);
}

TEST_CASE("sample advance truncates at the end") {
  Sample s;
  s.prompt_len = 10;
  s.kv_ssm = s.kv_llm = 10;
  s.true_total = 5;
  CHECK(s.advance(3) == 3);
  CHECK(s.advance(4) == 2);
  CHECK(s.finished());
  CHECK(s.generated == 5);
  CHECK(s.kv_llm == 15);
  CHECK(s.seq_len() == 15);
  CHECK(s.avg_accepted == doctest::Approx(3.5));
  CHECK(s.advance(2) == 0);
}

TEST_CASE("invalid specs") {
  WorkloadSpec s;
  s.sample_count = -1;
  CHECK_THROWS_AS(s.validate(), ConfigError);
  s.sample_count = 1;
  s.prompt_min = 10;
  s.prompt_max = 5;
  CHECK_THROWS_AS(s.validate(), ConfigError);
  CHECK(uniform_workload(0, 10, 10).empty());
  const auto u = uniform_workload(3, 7, 9, 100);
  CHECK(u[2].id == 102);
  CHECK(u[1].true_total == 7);
}
