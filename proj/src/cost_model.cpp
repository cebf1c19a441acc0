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

#include "specsim/cost_model.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace specsim {
namespace {

// Column scales keep the 4x4 normal equations well conditioned.
constexpr std::array<double, 4> kVerifyScale{1.0, 1e-4, 1e-2, 1e-2};
constexpr std::array<double, 3> kArScale{1.0, 1e-4, 1e-1};

template <std::size_t P>
using Mat = Eigen::Matrix<double, static_cast<int>(P), static_cast<int>(P)>;
template <std::size_t P>
using Vec = Eigen::Matrix<double, static_cast<int>(P), 1>;

/// min x'Ax - 2b'x subject to x >= 0 (coordinate 0 unconstrained), by
/// enumerating active sets. For P <= 4 this is exact and trivially cheap.
template <std::size_t P>
Vec<P> nnls_small(const Mat<P>& a, const Vec<P>& b) {
  Vec<P> best = Vec<P>::Zero();
  double best_obj = std::numeric_limits<double>::infinity();
  const unsigned subsets = 1U << (P - 1);
  for (unsigned mask = 0; mask < subsets; ++mask) {
    std::array<int, P> idx{};
    int m = 0;
    idx[static_cast<std::size_t>(m++)] = 0;
    for (std::size_t j = 1; j < P; ++j) {
      if (mask & (1U << (j - 1))) idx[static_cast<std::size_t>(m++)] = static_cast<int>(j);
    }
    Eigen::MatrixXd as(m, m);
    Eigen::VectorXd bs(m);
    for (int r = 0; r < m; ++r) {
      bs(r) = b(idx[static_cast<std::size_t>(r)]);
      for (int c = 0; c < m; ++c) as(r, c) = a(idx[static_cast<std::size_t>(r)], idx[static_cast<std::size_t>(c)]);
    }
    const Eigen::VectorXd xs = as.ldlt().solve(bs);
    if (!xs.allFinite()) continue;
    bool feasible = true;
    for (int r = 1; r < m; ++r) feasible = feasible && xs(r) >= 0.0;
    if (!feasible) continue;
    Vec<P> x = Vec<P>::Zero();
    for (int r = 0; r < m; ++r) x(idx[static_cast<std::size_t>(r)]) = xs(r);
    const double obj = x.dot(a * x) - 2.0 * b.dot(x);
    if (obj < best_obj) {
      best_obj = obj;
      best = x;
    }
  }
  return best;
}

Vec<4> verify_row(std::int64_t n_seq, std::int64_t n_draft, double k_sat) {
  Vec<4> r;
  r << 1.0, static_cast<double>(n_seq) * kVerifyScale[1], static_cast<double>(n_draft) * kVerifyScale[2],
      std::max(0.0, static_cast<double>(n_draft) - k_sat) * kVerifyScale[3];
  return r;
}

struct VerifyFit {
  Vec<4> coef;  // scaled
  double sse;
  Mat<4> gram;
};

VerifyFit fit_verify(std::span<const CostObservation> data, double k_sat) {
  Mat<4> a = Mat<4>::Zero();
  Vec<4> b = Vec<4>::Zero();
  double yy = 0.0;
  for (const auto& o : data) {
    const auto r = verify_row(o.n_seq, o.n_draft, k_sat);
    a.noalias() += r * r.transpose();
    b.noalias() += r * o.verify_s;
    yy += o.verify_s * o.verify_s;
  }
  const auto x = nnls_small<4>(a, b);
  return {x, yy - 2.0 * b.dot(x) + x.dot(a * x), a};
}

}  // namespace

double CostModel::verify_time(const VerifyBatchFeatures& f) const noexcept {
  const double seq = static_cast<double>(f.n_seq);
  const double draft = static_cast<double>(f.n_draft);
  const double t = beta[0] + beta[1] * seq + beta[2] * draft + beta[3] * std::max(0.0, draft - k_sat);
  return hardware_scale * t;
}

double CostModel::autoregressive_step_time(int batch, std::int64_t n_seq) const noexcept {
  return ar[0] + ar[1] * static_cast<double>(n_seq) + ar[2] * static_cast<double>(batch);
}

bool CostModel::is_valid() const noexcept {
  bool ok = c_draft >= 0.0 && beta[0] > 0.0 && ar[0] > 0.0 && hardware_scale > 0.0 && k_sat >= 0.0;
  for (std::size_t i = 1; i < beta.size(); ++i) ok = ok && beta[i] >= 0.0;
  for (std::size_t i = 1; i < ar.size(); ++i) ok = ok && ar[i] >= 0.0;
  return ok;
}

CostModel fit_cost_model(std::span<const CostObservation> verify, std::span<const ArObservation> autoregressive,
                         double c_draft, const CostFitOptions& options) {
  if (verify.size() < 4) throw std::invalid_argument("cost fit needs at least four verification samples");
  if (autoregressive.size() < 3) throw std::invalid_argument("cost fit needs at least three autoregressive samples");
  if (options.k_sat_candidates < 1) throw std::invalid_argument("k_sat_candidates must be >= 1");

  std::int64_t max_draft = 0;
  for (const auto& o : verify) max_draft = std::max(max_draft, o.n_draft);

  VerifyFit best{};
  double best_k = 0.0;
  best.sse = std::numeric_limits<double>::infinity();
  for (int i = 0; i < options.k_sat_candidates; ++i) {
    const double k = static_cast<double>(max_draft) * i / options.k_sat_candidates;
    auto fit = fit_verify(verify, k);
    if (fit.sse < best.sse) {
      best = fit;
      best_k = k;
    }
  }

  CostModel m;
  m.c_draft = c_draft;
  m.k_sat = best_k;
  for (std::size_t j = 0; j < 4; ++j) m.beta[j] = best.coef(static_cast<int>(j)) * kVerifyScale[j];
  const double n = static_cast<double>(verify.size());
  for (int r = 0; r < 4; ++r) {
    for (int c = 0; c < 4; ++c) m.prior_gram[static_cast<std::size_t>(r * 4 + c)] = best.gram(r, c) / n;
  }
  m.prior_weight = options.prior_weight;

  Mat<3> a = Mat<3>::Zero();
  Vec<3> b = Vec<3>::Zero();
  for (const auto& o : autoregressive) {
    Vec<3> r;
    r << 1.0, static_cast<double>(o.n_seq) * kArScale[1], static_cast<double>(o.batch) * kArScale[2];
    a.noalias() += r * r.transpose();
    b.noalias() += r * o.step_s;
  }
  const auto x = nnls_small<3>(a, b);
  for (std::size_t j = 0; j < 3; ++j) m.ar[j] = x(static_cast<int>(j)) * kArScale[j];
  return m;
}

CostModel refit_cost_model(const CostModel& current, std::span<const CostObservation> recent) {
  if (recent.empty()) return current;
  Mat<4> a = Mat<4>::Zero();
  Vec<4> b = Vec<4>::Zero();
  const double scale = current.hardware_scale;
  for (const auto& o : recent) {
    const auto r = verify_row(o.n_seq, o.n_draft, current.k_sat);
    a.noalias() += r * r.transpose();
    b.noalias() += r * (o.verify_s / scale);
  }
  Mat<4> g;
  for (int r = 0; r < 4; ++r) {
    for (int c = 0; c < 4; ++c) g(r, c) = current.prior_gram[static_cast<std::size_t>(r * 4 + c)];
  }
  Vec<4> prior;
  for (std::size_t j = 0; j < 4; ++j) prior(static_cast<int>(j)) = current.beta[j] / kVerifyScale[j];
  a += current.prior_weight * g;
  b += current.prior_weight * (g * prior);
  const auto x = nnls_small<4>(a, b);
  CostModel out = current;
  for (std::size_t j = 0; j < 4; ++j) out.beta[j] = x(static_cast<int>(j)) * kVerifyScale[j];
  if (!out.is_valid()) return current;
  return out;
}

std::uint64_t BucketCache::key(const VerifyBatchFeatures& f) const noexcept {
  const auto s = static_cast<std::uint64_t>(std::max<std::int64_t>(0, f.n_seq) / widths_.seq);
  const auto d = static_cast<std::uint64_t>(std::max<std::int64_t>(0, f.n_draft) / widths_.draft);
  return (s << 24) ^ d;
}

std::optional<double> BucketCache::lookup(const VerifyBatchFeatures& f) const {
  const auto it = entries_.find(key(f));
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

void BucketCache::store(const VerifyBatchFeatures& f, double seconds) { entries_.emplace(key(f), seconds); }

TimePrediction predict_t_sd(const VerifyBatchFeatures& features, const CostModel& cost, BucketCache& cache) {
  if (const auto hit = cache.lookup(features)) return {*hit, true};
  const double t = cost.step_time(features);
  cache.store(features, t);
  return {t, false};
}

}  // namespace specsim
