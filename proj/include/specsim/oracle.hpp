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

// Ground-truth verification outcomes.
//
// Verification walks down from the implicit root. Among the selected
// children of the current node, each succeeds independently with
// probability G(dl); if any succeed one is accepted, chosen with probability
// proportional to dl, and the walk continues below it. The uniforms are drawn
// once per node so outcomes for nested selections S(n) are coupled.

#include <span>
#include <vector>

#include "specsim/hardware.hpp"
#include "specsim/rng.hpp"
#include "specsim/spectree.hpp"

namespace specsim {

struct AcceptanceDraws {
  std::vector<double> success;  // per node, compared against G(dl)
  std::vector<double> choice;   // per node, picks among its succeeding children
  double root_choice = 0.0;
};

AcceptanceDraws draw_acceptance(const SpecTree& tree, SplitMix64& rng);
void draw_acceptance_into(const SpecTree& tree, SplitMix64& rng, AcceptanceDraws& out);

struct AcceptanceOutcome {
  std::vector<NodeId> path;  // accepted nodes, root side first
  int accepted_tokens() const noexcept { return static_cast<int>(path.size()) + 1; }
};

/// `selected` is a per-node mask.
AcceptanceOutcome sample_acceptance(const SpecTree& tree, std::span<const char> selected, const GroundTruth& truth,
                                    const AcceptanceDraws& draws);
AcceptanceOutcome sample_acceptance(const SpecTree& tree, const SelectionSet& selection, const GroundTruth& truth,
                                    const AcceptanceDraws& draws);

}  // namespace specsim
