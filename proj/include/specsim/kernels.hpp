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

// Per-step batch kernels. Every kernel has a serial reference and an OpenMP
// variant; both produce bit-identical results because each item draws from
// its own derived stream and reductions run in a fixed order.

#include <cstdint>
#include <span>
#include <vector>

#include "specsim/acceptance_model.hpp"
#include "specsim/hardware.hpp"
#include "specsim/oracle.hpp"
#include "specsim/selector.hpp"
#include "specsim/spectree.hpp"
#include "specsim/tree_generator.hpp"

namespace specsim {

enum class Exec { Serial, Parallel };

struct DraftRequest {
  std::uint64_t sample = 0;
  std::uint64_t step = 0;
};

struct SampleDraft {
  SpecTree tree;
  GreedyTrace trace;
  AcceptanceDraws draws;
};

/// Synthesizes each sample's tree, greedy trace (up to `limit` picks under
/// weights F(dl)) and verification uniforms from stream (seed, sample, step).
void draft_batch(std::span<const DraftRequest> requests, std::uint64_t seed, const TreeShape& shape,
                 const AcceptanceModel& model, int limit, std::vector<SampleDraft>& out, Exec exec);

/// Verifies the first n greedy picks of every draft.
void verify_batch(std::span<const SampleDraft> drafts, int n, const GroundTruth& truth,
                  std::vector<AcceptanceOutcome>& out, Exec exec);

/// Monte-Carlo mean of accepted tokens (path length + 1) for a fixed
/// selection, over `trials` independent draws.
double expected_accepted_mc(const SpecTree& tree, const SelectionSet& selection, const GroundTruth& truth,
                            std::int64_t trials, std::uint64_t seed, Exec exec);

}  // namespace specsim
