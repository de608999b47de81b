// Copyright 2026 The flatsim Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <benchmark/benchmark.h>

#include <vector>

#include "flatsim/dataflows.hpp"
#include "flatsim/engines.hpp"
#include "flatsim/noc.hpp"
#include "flatsim/sim.hpp"
#include "flatsim/tiling.hpp"

namespace {

using namespace flatsim;

void BM_GemmCycles(benchmark::State& state) {
  const TileSpec tile;
  std::uint32_t k = 1;
  for (auto _ : state) {
    benchmark::DoNotOptimize(gemm_cycles({128, 128, k}, tile));
    k = k % 1024 + 1;
  }
}
BENCHMARK(BM_GemmCycles);

void BM_CollectiveTime(benchmark::State& state) {
  const ArchConfig arch = reference_arch();
  CollectiveRequest r;
  r.kind = CollectiveKind::kReduceSum;
  r.strategy = CollectiveStrategy::kSwTree;
  r.group_extent = 32;
  for (auto _ : state) {
    r.size = r.size % (Bytes{1} << 20) + 4096;
    benchmark::DoNotOptimize(collective_time(r, arch.noc, arch.tile));
  }
}
BENCHMARK(BM_CollectiveTime);

// Random XY transfers on a 32x32 mesh; range(0) transfers per iteration.
void BM_LinkTimelineTransfers(benchmark::State& state) {
  const MeshTopology topo(32, 32);
  std::vector<std::vector<LinkId>> paths;
  std::uint32_t seed = 1;
  for (int i = 0; i < 256; ++i) {
    seed = seed * 1664525u + 1013904223u;
    const TileCoord a{seed % 32, (seed >> 8) % 32};
    const TileCoord b{(seed >> 16) % 32, (seed >> 24) % 32};
    paths.push_back(topo.route_ids(a, b));
  }
  for (auto _ : state) {
    LinkTimeline tl(topo.num_links(), 128, 1);
    Cycles t = 0;
    for (std::int64_t i = 0; i < state.range(0); ++i) {
      t = tl.schedule_transfer(paths[i % paths.size()], (i * 37) % 5000, 8192);
      tl.advance(static_cast<Cycles>(i));
    }
    benchmark::DoNotOptimize(t);
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_LinkTimelineTransfers)->Arg(1 << 10)->Arg(1 << 14);

void BM_SelectTiling(benchmark::State& state) {
  const ArchConfig arch = reference_arch();
  AttentionWorkload w;
  w.batch = 2;
  w.heads = 32;
  w.seq_q = w.seq_kv = 4096;
  w.head_dim = 128;
  for (auto _ : state) benchmark::DoNotOptimize(select_tiling(w, arch, true));
}
BENCHMARK(BM_SelectTiling);

// Generation plus timing simulation of one FlatAsync prefill on an 8x8 mesh.
void BM_SimulateFlatAsync(benchmark::State& state) {
  ArchConfig arch = reference_arch();
  arch.noc.mesh_x = arch.noc.mesh_y = 8;
  AttentionWorkload w;
  w.batch = 1;
  w.heads = 8;
  w.seq_q = w.seq_kv = static_cast<std::uint32_t>(state.range(0));
  w.head_dim = 128;
  const FlatParams p = make_flat_params(Dataflow::kFlatAsync, 4, 4, 128, 128);
  std::size_t steps = 0;
  for (auto _ : state) {
    const Schedule s = gen_flatattention(w, arch, p);
    const SimReport r = simulate(s, arch, SimMode::kTiming);
    steps = r.steps;
    benchmark::DoNotOptimize(r.total_cycles);
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(steps));
}
BENCHMARK(BM_SimulateFlatAsync)->Arg(1024)->Arg(4096)->Unit(benchmark::kMillisecond);

void BM_SimulateFa3(benchmark::State& state) {
  ArchConfig arch = reference_arch();
  arch.noc.mesh_x = arch.noc.mesh_y = 8;
  AttentionWorkload w;
  w.batch = 1;
  w.heads = 8;
  w.seq_q = w.seq_kv = 2048;
  w.head_dim = 128;
  for (auto _ : state) {
    const Schedule s = gen_flashattention(w, arch, FlashVariant::kFa3, 128);
    benchmark::DoNotOptimize(simulate(s, arch, SimMode::kTiming).total_cycles);
  }
}
BENCHMARK(BM_SimulateFa3)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
