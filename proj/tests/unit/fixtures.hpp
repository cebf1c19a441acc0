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

#include <vector>

#include "specsim/rng.hpp"
#include "specsim/spectree.hpp"

namespace specsim::testing {

// Eight-node tree: u0 and u1 at depth 0, u2..u5 at depth 1, u6 and u7 at
// depth 2. dl(u6) = 0.7 * 0.5 needs o(u6) = 1.
inline SpecTree eight_node_tree() {
  const std::vector<DraftEntry> spec{
      {std::nullopt, 0.7},  // u0
      {std::nullopt, 0.25}, // u1
      {0u, 0.5},            // u2
      {1u, 0.6},            // u3
      {1u, 0.4},            // u4
      {0u, 0.4},            // u5
      {2u, 1.0},            // u6
      {5u, 0.5},            // u7
  };
  return SpecTree::build(spec);
}

/// Random tree with `nodes` entries; each node's parent is uniform over the
/// earlier nodes with spare branching capacity, or the implicit root.
inline SpecTree random_tree(SplitMix64& rng, int nodes, int branching = 4, double root_prob = 0.15) {
  std::vector<DraftEntry> spec;
  std::vector<int> kids(static_cast<std::size_t>(nodes), 0);
  int roots = 0;
  for (int i = 0; i < nodes; ++i) {
    DraftEntry e;
    e.logit = 0.05 + 0.95 * rng.uniform();
    if (i > 0 && !(rng.uniform() < root_prob && roots < branching)) {
      std::vector<int> open;
      for (int j = 0; j < i; ++j) {
        if (kids[static_cast<std::size_t>(j)] < branching) open.push_back(j);
      }
      const auto pick = open[static_cast<std::size_t>(rng.uniform() * static_cast<double>(open.size()))];
      e.parent = static_cast<NodeId>(pick);
      ++kids[static_cast<std::size_t>(pick)];
    } else {
      ++roots;
    }
    spec.push_back(e);
  }
  return SpecTree::build(spec, branching);
}

}  // namespace specsim::testing

#include "specsim/calibration.hpp"

namespace specsim::testing {

/// Default calibration, computed once per process.
inline const Calibration& default_calibration() {
  static const Calibration cal = calibrate(CalibrationSpec{});
  return cal;
}

}  // namespace specsim::testing
