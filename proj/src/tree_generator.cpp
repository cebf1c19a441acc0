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

#include "specsim/tree_generator.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "specsim/error.hpp"

namespace specsim {

void TreeShape::validate() const {
  if (depth < 1 || branching < 1 || beam < 1) throw ConfigError("tree shape needs depth, branching, beam >= 1");
  if (!(mean0 > 0.0 && mean0 < 1.0) || !(decay > 0.0 && decay <= 1.0) || !(concentration > 0.0)) {
    throw ConfigError("tree logit parameters out of range");
  }
}

std::size_t TreeShape::max_nodes() const noexcept {
  const auto b = static_cast<std::size_t>(branching);
  std::size_t total = b;
  std::size_t layer = b;
  for (int d = 1; d < depth; ++d) {
    layer = std::min(layer, static_cast<std::size_t>(beam)) * b;
    total += layer;
  }
  return total;
}

namespace {

constexpr double kMinLogit = 1e-6;

void draw_siblings(const TreeShape& shape, int depth, SplitMix64& rng, std::vector<double>& out) {
  const double m = std::clamp(shape.mean0 * std::pow(shape.decay, depth), 1e-3, 1.0 - 1e-3);
  const double a = m * shape.concentration;
  const double b = (1.0 - m) * shape.concentration;
  double left = 1.0;
  out.clear();
  for (int k = 0; k < shape.branching; ++k) {
    const double p = std::max(kMinLogit, sample_beta(rng, a, b) * left);
    out.push_back(std::min(1.0, p));
    left = std::max(0.0, left - p);
  }
}

}  // namespace

SpecTree generate_tree(const TreeShape& shape, SplitMix64& rng) {
  shape.validate();
  std::vector<DraftEntry> entries;
  entries.reserve(shape.max_nodes());
  std::vector<double> dl;
  dl.reserve(shape.max_nodes());
  std::vector<double> logits;

  draw_siblings(shape, 0, rng, logits);
  std::vector<NodeId> layer;
  for (double p : logits) {
    layer.push_back(static_cast<NodeId>(entries.size()));
    entries.push_back({std::nullopt, p});
    dl.push_back(p);
  }
  for (int d = 1; d < shape.depth; ++d) {
    std::vector<NodeId> parents = layer;
    std::stable_sort(parents.begin(), parents.end(), [&](NodeId x, NodeId y) { return dl[x] > dl[y]; });
    if (parents.size() > static_cast<std::size_t>(shape.beam)) parents.resize(static_cast<std::size_t>(shape.beam));
    std::sort(parents.begin(), parents.end());
    layer.clear();
    for (NodeId p : parents) {
      draw_siblings(shape, d, rng, logits);
      for (double o : logits) {
        layer.push_back(static_cast<NodeId>(entries.size()));
        entries.push_back({p, o});
        dl.push_back(dl[p] * o);
      }
    }
  }
  return SpecTree::build(entries, std::max(shape.branching, kDefaultBranchingLimit));
}

}  // namespace specsim
