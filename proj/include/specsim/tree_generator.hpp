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

#include "specsim/rng.hpp"
#include "specsim/spectree.hpp"

namespace specsim {

/// Shape of the per-step draft trees. Each layer expands the `beam` nodes of
/// the previous layer with the highest draft logit into `branching`
/// children; the depth-0 layer has `branching` nodes.
///
/// Sibling logits split the parent's remaining probability mass: the k-th
/// child takes a Beta-distributed share of what its elder siblings left.
/// The share's mean decays geometrically with depth.
struct TreeShape {
  int depth = 6;
  int branching = 4;
  int beam = 4;
  double mean0 = 0.65;
  double decay = 0.9;
  double concentration = 6.0;

  void validate() const;
  std::size_t max_nodes() const noexcept;
};

SpecTree generate_tree(const TreeShape& shape, SplitMix64& rng);

}  // namespace specsim
