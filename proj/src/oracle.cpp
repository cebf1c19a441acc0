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

#include "specsim/oracle.hpp"

#include <stdexcept>

namespace specsim {

AcceptanceDraws draw_acceptance(const SpecTree& tree, SplitMix64& rng) {
  AcceptanceDraws d;
  draw_acceptance_into(tree, rng, d);
  return d;
}

void draw_acceptance_into(const SpecTree& tree, SplitMix64& rng, AcceptanceDraws& out) {
  out.success.resize(tree.size());
  out.choice.resize(tree.size());
  out.root_choice = rng.uniform();
  for (std::size_t i = 0; i < tree.size(); ++i) {
    out.success[i] = rng.uniform();
    out.choice[i] = rng.uniform();
  }
}

AcceptanceOutcome sample_acceptance(const SpecTree& tree, std::span<const char> selected, const GroundTruth& truth,
                                    const AcceptanceDraws& draws) {
  if (selected.size() < tree.size() || draws.success.size() < tree.size()) {
    throw std::invalid_argument("selection mask or draws shorter than tree");
  }
  AcceptanceOutcome out;
  std::span<const NodeId> candidates = tree.root_level();
  double u = draws.root_choice;
  std::vector<NodeId> passed;
  for (;;) {
    passed.clear();
    double mass = 0.0;
    for (NodeId c : candidates) {
      if (!selected[c]) continue;
      const double dl = tree.node(c).draft_logit;
      if (draws.success[c] < truth(dl)) {
        passed.push_back(c);
        mass += dl;
      }
    }
    if (passed.empty()) break;
    NodeId pick = passed.back();
    double acc = 0.0;
    const double target = u * mass;
    for (NodeId c : passed) {
      acc += tree.node(c).draft_logit;
      if (target < acc) {
        pick = c;
        break;
      }
    }
    out.path.push_back(pick);
    candidates = tree.children(pick);
    u = draws.choice[pick];
  }
  return out;
}

AcceptanceOutcome sample_acceptance(const SpecTree& tree, const SelectionSet& selection, const GroundTruth& truth,
                                    const AcceptanceDraws& draws) {
  std::vector<char> mask(tree.size(), 0);
  for (NodeId id : selection.node_ids) mask.at(id) = 1;
  return sample_acceptance(tree, mask, truth, draws);
}

}  // namespace specsim
