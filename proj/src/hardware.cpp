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

#include "specsim/hardware.hpp"

#include <cmath>

#include "specsim/error.hpp"

namespace specsim {

void HardwareProfile::validate() const {
  if (!(weight_s > 0.0) || kv_s_per_token < 0.0 || !(compute_s_per_token > 0.0) || draft_s < 0.0 ||
      !(smoothing_s > 0.0) || !(scale > 0.0) || noise_sigma < 0.0 || prefill_s_per_sample < 0.0) {
    throw ConfigError("invalid hardware profile");
  }
}

double HardwareProfile::forward_time(std::int64_t n_seq, std::int64_t n_tokens) const noexcept {
  const double mem = weight_s + kv_s_per_token * static_cast<double>(n_seq);
  const double comp = compute_s_per_token * static_cast<double>(n_tokens) / scale;
  const double x = (comp - mem) / smoothing_s;
  // log1p(exp(x)) without overflow
  const double soft = x > 30.0 ? x : std::log1p(std::exp(x));
  return mem + smoothing_s * soft;
}

double HardwareProfile::noise_factor(double z) const noexcept {
  return noise_sigma > 0.0 ? std::exp(noise_sigma * z) : 1.0;
}

}  // namespace specsim
