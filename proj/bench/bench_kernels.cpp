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

// Serial reference vs OpenMP variants of the per-step kernels.

#include <benchmark/benchmark.h>

#include "specsim/kernels.hpp"

namespace {

using namespace specsim;

std::vector<DraftRequest> requests(int batch) {
  std::vector<DraftRequest> r;
  for (int i = 0; i < batch; ++i) r.push_back({static_cast<std::uint64_t>(i), 3});
  return r;
}

void BM_DraftBatch(benchmark::State& state, Exec exec) {
  const auto req = requests(static_cast<int>(state.range(0)));
  const auto model = AcceptanceModel::identity();
  std::vector<SampleDraft> out;
  for (auto _ : state) {
    draft_batch(req, 42, TreeShape{}, model, 48, out, exec);
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_VerifyBatch(benchmark::State& state, Exec exec) {
  const auto req = requests(static_cast<int>(state.range(0)));
  std::vector<SampleDraft> drafts;
  draft_batch(req, 42, TreeShape{}, AcceptanceModel::identity(), 48, drafts, Exec::Serial);
  std::vector<AcceptanceOutcome> out;
  for (auto _ : state) {
    verify_batch(drafts, 16, GroundTruth{}, out, exec);
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_MonteCarlo(benchmark::State& state, Exec exec) {
  SplitMix64 rng(9);
  const auto tree = generate_tree(TreeShape{}, rng);
  const auto sel = top_n_selection(tree, 16, tree.draft_logits());
  for (auto _ : state) {
    benchmark::DoNotOptimize(expected_accepted_mc(tree, sel, GroundTruth{}, state.range(0), 5, exec));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

BENCHMARK_CAPTURE(BM_DraftBatch, serial, Exec::Serial)->Arg(8)->Arg(64);
BENCHMARK_CAPTURE(BM_DraftBatch, openmp, Exec::Parallel)->Arg(8)->Arg(64);
BENCHMARK_CAPTURE(BM_VerifyBatch, serial, Exec::Serial)->Arg(64);
BENCHMARK_CAPTURE(BM_VerifyBatch, openmp, Exec::Parallel)->Arg(64);
BENCHMARK_CAPTURE(BM_MonteCarlo, serial, Exec::Serial)->Arg(1 << 16);
BENCHMARK_CAPTURE(BM_MonteCarlo, openmp, Exec::Parallel)->Arg(1 << 16);

}  // namespace

BENCHMARK_MAIN();
