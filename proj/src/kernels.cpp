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

#include "specsim/kernels.hpp"

#include <algorithm>

namespace specsim {
namespace {

constexpr std::uint64_t kDraftTag = 0x64726166ULL;
constexpr std::int64_t kMcBlock = 4096;

void draft_one(const DraftRequest& req, std::uint64_t seed, const TreeShape& shape, const AcceptanceModel& model,
               int limit, SampleDraft& out) {
  SplitMix64 rng(derive_seed({seed, kDraftTag, req.sample, req.step}));
  out.tree = generate_tree(shape, rng);
  draw_acceptance_into(out.tree, rng, out.draws);
  std::vector<double> w(out.tree.size());
  const auto nodes = out.tree.nodes();
  for (std::size_t i = 0; i < nodes.size(); ++i) w[i] = model(nodes[i].draft_logit);
  out.trace = greedy_trace(out.tree, w, limit);
}

void verify_one(const SampleDraft& d, int n, const GroundTruth& truth, AcceptanceOutcome& out) {
  std::vector<char> mask(d.tree.size(), 0);
  const auto k = std::min<std::size_t>(static_cast<std::size_t>(std::max(0, n)), d.trace.order.size());
  for (std::size_t i = 0; i < k; ++i) mask[d.trace.order[i]] = 1;
  out = sample_acceptance(d.tree, mask, truth, d.draws);
}

std::int64_t mc_block(const SpecTree& tree, std::span<const char> mask, const GroundTruth& truth, std::int64_t count,
                      std::uint64_t seed, std::int64_t block) {
  SplitMix64 rng(derive_seed({seed, static_cast<std::uint64_t>(block)}));
  AcceptanceDraws draws;
  std::int64_t total = 0;
  for (std::int64_t t = 0; t < count; ++t) {
    draw_acceptance_into(tree, rng, draws);
    total += sample_acceptance(tree, mask, truth, draws).accepted_tokens();
  }
  return total;
}

}  // namespace

void draft_batch(std::span<const DraftRequest> requests, std::uint64_t seed, const TreeShape& shape,
                 const AcceptanceModel& model, int limit, std::vector<SampleDraft>& out, Exec exec) {
  out.resize(requests.size());
  const auto n = static_cast<std::int64_t>(requests.size());
  if (exec == Exec::Parallel) {
#pragma omp parallel for schedule(dynamic, 4) if (n > 8)
    for (std::int64_t i = 0; i < n; ++i) {
      draft_one(requests[static_cast<std::size_t>(i)], seed, shape, model, limit, out[static_cast<std::size_t>(i)]);
    }
  } else {
    for (std::int64_t i = 0; i < n; ++i) {
      draft_one(requests[static_cast<std::size_t>(i)], seed, shape, model, limit, out[static_cast<std::size_t>(i)]);
    }
  }
}

void verify_batch(std::span<const SampleDraft> drafts, int n, const GroundTruth& truth,
                  std::vector<AcceptanceOutcome>& out, Exec exec) {
  out.resize(drafts.size());
  const auto m = static_cast<std::int64_t>(drafts.size());
  if (exec == Exec::Parallel) {
#pragma omp parallel for schedule(static) if (m > 16)
    for (std::int64_t i = 0; i < m; ++i) {
      verify_one(drafts[static_cast<std::size_t>(i)], n, truth, out[static_cast<std::size_t>(i)]);
    }
  } else {
    for (std::int64_t i = 0; i < m; ++i) {
      verify_one(drafts[static_cast<std::size_t>(i)], n, truth, out[static_cast<std::size_t>(i)]);
    }
  }
}

double expected_accepted_mc(const SpecTree& tree, const SelectionSet& selection, const GroundTruth& truth,
                            std::int64_t trials, std::uint64_t seed, Exec exec) {
  if (trials <= 0) return 0.0;
  std::vector<char> mask(tree.size(), 0);
  for (NodeId id : selection.node_ids) mask.at(id) = 1;
  const std::int64_t blocks = (trials + kMcBlock - 1) / kMcBlock;
  std::vector<std::int64_t> totals(static_cast<std::size_t>(blocks), 0);
  auto count_of = [&](std::int64_t b) { return std::min(kMcBlock, trials - b * kMcBlock); };
  if (exec == Exec::Parallel) {
#pragma omp parallel for schedule(dynamic, 1)
    for (std::int64_t b = 0; b < blocks; ++b) {
      totals[static_cast<std::size_t>(b)] = mc_block(tree, mask, truth, count_of(b), seed, b);
    }
  } else {
    for (std::int64_t b = 0; b < blocks; ++b) {
      totals[static_cast<std::size_t>(b)] = mc_block(tree, mask, truth, count_of(b), seed, b);
    }
  }
  std::int64_t total = 0;
  for (auto t : totals) total += t;
  return static_cast<double>(total) / static_cast<double>(trials);
}

}  // namespace specsim
