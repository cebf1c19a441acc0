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

#include <span>
#include <vector>

namespace specsim {

struct AcceptanceObservation {
  double draft_logit = 0.0;
  bool accepted = false;
};

struct Knot {
  double x = 0.0;
  double y = 0.0;
};

struct AcceptanceFitOptions {
  int knot_count = 16;
  int bins = 128;
  /// Weight of the second-difference penalty relative to the mean data mass
  /// per knot. Zero gives plain least squares.
  double smoothing = 0.5;
};

/// Monotone piecewise-linear map F from draft logit to acceptance probability.
class AcceptanceModel {
 public:
  AcceptanceModel() = default;
  /// Throws std::invalid_argument unless x is strictly increasing and y is
  /// non-decreasing inside [0, 1].
  explicit AcceptanceModel(std::vector<Knot> knots);

  /// F(dl), clamped to [0, 1]; dl is clamped to the knot range.
  double operator()(double draft_logit) const noexcept;

  const std::vector<Knot>& knots() const noexcept { return knots_; }
  bool is_monotone() const noexcept;

  /// Identity map, used before calibration.
  static AcceptanceModel identity(int knot_count = 16);

 private:
  std::vector<Knot> knots_;
};

/// Least-squares fit of the knot values over binned empirical acceptance
/// rates, followed by a weighted pool-adjacent-violators pass and a clamp to
/// [0, 1]. Throws InsufficientData with fewer than two distinct draft logits.
AcceptanceModel fit_acceptance(std::span<const AcceptanceObservation> observations,
                               const AcceptanceFitOptions& options = {});

/// Weighted pool-adjacent-violators: the non-decreasing sequence closest to
/// `values` in weighted squared error.
std::vector<double> isotonic_regression(std::span<const double> values, std::span<const double> weights);

}  // namespace specsim
