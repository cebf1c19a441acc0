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

#include "specsim/acceptance_model.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "specsim/error.hpp"

namespace specsim {

AcceptanceModel::AcceptanceModel(std::vector<Knot> knots) : knots_(std::move(knots)) {
  if (knots_.size() < 2) throw std::invalid_argument("acceptance model needs at least two knots");
  for (std::size_t i = 0; i < knots_.size(); ++i) {
    const auto& k = knots_[i];
    if (!(k.y >= 0.0 && k.y <= 1.0)) throw std::invalid_argument("knot value outside [0, 1]");
    if (i > 0 && !(k.x > knots_[i - 1].x)) throw std::invalid_argument("knot positions must increase");
    if (i > 0 && k.y < knots_[i - 1].y) throw std::invalid_argument("knot values must be non-decreasing");
  }
}

double AcceptanceModel::operator()(double draft_logit) const noexcept {
  if (knots_.empty()) return std::clamp(draft_logit, 0.0, 1.0);
  if (draft_logit <= knots_.front().x) return knots_.front().y;
  if (draft_logit >= knots_.back().x) return knots_.back().y;
  const auto it = std::upper_bound(knots_.begin(), knots_.end(), draft_logit,
                                   [](double v, const Knot& k) { return v < k.x; });
  const auto& hi = *it;
  const auto& lo = *(it - 1);
  const double t = (draft_logit - lo.x) / (hi.x - lo.x);
  return std::clamp(lo.y + t * (hi.y - lo.y), 0.0, 1.0);
}

bool AcceptanceModel::is_monotone() const noexcept {
  for (std::size_t i = 1; i < knots_.size(); ++i) {
    if (knots_[i].y < knots_[i - 1].y) return false;
  }
  return true;
}

AcceptanceModel AcceptanceModel::identity(int knot_count) {
  std::vector<Knot> k(static_cast<std::size_t>(knot_count));
  for (int i = 0; i < knot_count; ++i) {
    const double x = static_cast<double>(i) / (knot_count - 1);
    k[static_cast<std::size_t>(i)] = {x, x};
  }
  return AcceptanceModel(std::move(k));
}

std::vector<double> isotonic_regression(std::span<const double> values, std::span<const double> weights) {
  if (values.size() != weights.size()) throw std::invalid_argument("values and weights differ in length");
  struct Block {
    double mean;
    double weight;
    std::size_t len;
  };
  std::vector<Block> blocks;
  blocks.reserve(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    blocks.push_back({values[i], weights[i], 1});
    while (blocks.size() > 1 && blocks[blocks.size() - 2].mean > blocks.back().mean) {
      const Block b = blocks.back();
      blocks.pop_back();
      auto& a = blocks.back();
      const double w = a.weight + b.weight;
      a.mean = w > 0.0 ? (a.mean * a.weight + b.mean * b.weight) / w : 0.5 * (a.mean + b.mean);
      a.weight = w;
      a.len += b.len;
    }
  }
  std::vector<double> out;
  out.reserve(values.size());
  for (const auto& b : blocks) out.insert(out.end(), b.len, b.mean);
  return out;
}

AcceptanceModel fit_acceptance(std::span<const AcceptanceObservation> observations,
                               const AcceptanceFitOptions& options) {
  if (options.knot_count < 2 || options.bins < 1) throw std::invalid_argument("bad acceptance fit options");
  {
    double first = 0.0;
    bool have_first = false;
    bool distinct = false;
    for (const auto& o : observations) {
      if (!have_first) {
        first = o.draft_logit;
        have_first = true;
      } else if (o.draft_logit != first) {
        distinct = true;
        break;
      }
    }
    if (!distinct) throw InsufficientData("acceptance fit needs at least two distinct draft logits");
  }

  const int bins = options.bins;
  std::vector<double> count(static_cast<std::size_t>(bins), 0.0);
  std::vector<double> hits(static_cast<std::size_t>(bins), 0.0);
  std::vector<double> xsum(static_cast<std::size_t>(bins), 0.0);
  for (const auto& o : observations) {
    const double x = std::clamp(o.draft_logit, 0.0, 1.0);
    const int b = std::min(bins - 1, static_cast<int>(x * bins));
    count[static_cast<std::size_t>(b)] += 1.0;
    hits[static_cast<std::size_t>(b)] += o.accepted ? 1.0 : 0.0;
    xsum[static_cast<std::size_t>(b)] += x;
  }

  const int k = options.knot_count;
  const double h = 1.0 / (k - 1);
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(k, k);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(k);
  std::vector<double> mass(static_cast<std::size_t>(k), 0.0);
  double total = 0.0;
  for (int b = 0; b < bins; ++b) {
    const double c = count[static_cast<std::size_t>(b)];
    if (c == 0.0) continue;
    const double x = xsum[static_cast<std::size_t>(b)] / c;
    const double rate = hits[static_cast<std::size_t>(b)] / c;
    const int j = std::min(k - 2, static_cast<int>(x / h));
    const double t = std::clamp((x - j * h) / h, 0.0, 1.0);
    const double phi0 = 1.0 - t;
    const double phi1 = t;
    a(j, j) += c * phi0 * phi0;
    a(j, j + 1) += c * phi0 * phi1;
    a(j + 1, j) += c * phi0 * phi1;
    a(j + 1, j + 1) += c * phi1 * phi1;
    rhs(j) += c * phi0 * rate;
    rhs(j + 1) += c * phi1 * rate;
    mass[static_cast<std::size_t>(j)] += c * phi0;
    mass[static_cast<std::size_t>(j + 1)] += c * phi1;
    total += c;
  }

  // Second-difference penalty keeps knots without data well defined (linear
  // extrapolation) and damps binomial noise.
  const double lambda = options.smoothing * total / k + 1e-9 * total;
  for (int i = 1; i + 1 < k; ++i) {
    const int idx[3] = {i - 1, i, i + 1};
    const double coef[3] = {1.0, -2.0, 1.0};
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 3; ++c) a(idx[r], idx[c]) += lambda * coef[r] * coef[c];
    }
  }
  const Eigen::VectorXd y = a.ldlt().solve(rhs);

  std::vector<double> values(static_cast<std::size_t>(k));
  std::vector<double> weights(static_cast<std::size_t>(k));
  for (int i = 0; i < k; ++i) {
    values[static_cast<std::size_t>(i)] = y(i);
    weights[static_cast<std::size_t>(i)] = mass[static_cast<std::size_t>(i)] + 1e-6;
  }
  const auto mono = isotonic_regression(values, weights);
  std::vector<Knot> knots(static_cast<std::size_t>(k));
  for (int i = 0; i < k; ++i) {
    knots[static_cast<std::size_t>(i)] = {i * h, std::clamp(mono[static_cast<std::size_t>(i)], 0.0, 1.0)};
  }
  knots.back().x = 1.0;
  return AcceptanceModel(std::move(knots));
}

}  // namespace specsim
