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

#include <gtest/gtest.h>

#include <numeric>
#include <string>
#include <vector>

#include "flatsim/dataflows.hpp"
#include "flatsim/sim.hpp"

namespace flatsim {
namespace {

ArchConfig mesh(std::uint32_t n) {
  ArchConfig a = reference_arch();
  a.noc.mesh_x = a.noc.mesh_y = n;
  return a;
}

Schedule single_matmul() {
  Schedule s(1, 1, 2);
  const NameId a = s.intern("A"), b = s.intern("B"), c = s.intern("C");
  s.declare_buffer({0, 0}, a, 128, 128);
  s.declare_buffer({0, 0}, b, 128, 128);
  s.declare_buffer({0, 0}, c, 128, 128);
  Step st;
  st.kind = StepKind::kMatMul;
  st.gemm = {128, 128, 128, 2};
  st.operands = {a, b, c, kNoName, kNoName};
  s.push_step(st, {});
  return s;
}

double exposed_sum(const SimReport& r) {
  return std::accumulate(r.exposed.begin(), r.exposed.end(), 0.0);
}

AttentionWorkload small_prefill(std::uint32_t S, std::uint32_t D) {
  AttentionWorkload w;
  w.batch = 1;
  w.heads = 2;
  w.seq_q = w.seq_kv = S;
  w.head_dim = D;
  return w;
}

TEST(Simulate, SingleMatMulCostsGemmCycles) {
  const SimReport r = simulate(single_matmul(), mesh(1), SimMode::kTiming);
  EXPECT_EQ(r.total_cycles, 4181u);
  EXPECT_DOUBLE_EQ(r.exposed_of(Category::kMatrix), 4181.0);
  EXPECT_DOUBLE_EQ(exposed_sum(r), 4181.0);
  EXPECT_EQ(r.matrix_busy_cycles, 4181u);
  EXPECT_EQ(r.steps, 1u);
}

TEST(Simulate, EmptyScheduleIsZero) {
  const SimReport r = simulate(Schedule(1, 1, 2), mesh(1), SimMode::kTiming);
  EXPECT_EQ(r.total_cycles, 0u);
  EXPECT_EQ(exposed_sum(r), 0.0);
  EXPECT_EQ(r.hbm_bytes_read, 0u);
  EXPECT_EQ(r.hbm_bytes_written, 0u);
  EXPECT_EQ(r.flops, 0.0);
  EXPECT_EQ(r.steps, 0u);
}

TEST(Simulate, L1OverflowNamesStepAndFootprint) {
  Schedule s = single_matmul();
  s.declare_buffer({0, 0}, s.intern("big"), 385, 512);
  try {
    simulate(s, mesh(1), SimMode::kTiming);
    FAIL() << "expected SimError";
  } catch (const SimError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("step 0"), std::string::npos) << msg;
    EXPECT_NE(msg.find(std::to_string(3 * 128 * 128 * 2 + 385 * 1024)), std::string::npos) << msg;
  }
}

TEST(Simulate, DeadlockListsStuckSteps) {
  Schedule s(1, 1, 2);
  Step b;
  b.kind = StepKind::kBarrier;
  const std::vector<StepId> d1{1}, d0{0};
  s.push_step(b, d1);
  s.push_step(b, d0);
  try {
    simulate(s, mesh(1), SimMode::kTiming);
    FAIL() << "expected SimError";
  } catch (const SimError& e) {
    EXPECT_NE(std::string(e.what()).find("deadlock"), std::string::npos);
  }
}

TEST(CheckSchedule, SelfDependencyIsACycle) {
  Schedule s(1, 1, 2);
  Step b;
  b.kind = StepKind::kBarrier;
  const std::vector<StepId> self{0};
  s.push_step(b, self);
  const ValidationResult r = check_schedule(s, mesh(1));
  ASSERT_FALSE(r.ok());
  EXPECT_NE(r.violations.front().find("cycle"), std::string::npos);
}

TEST(CheckSchedule, ReadBeforeWrite) {
  const ValidationResult r = check_schedule(single_matmul(), mesh(1));
  ASSERT_FALSE(r.ok());
  EXPECT_NE(r.violations.front().find("before any write"), std::string::npos);
}

TEST(CheckSchedule, CapacityBoundary) {
  for (std::uint32_t kib : {384u, 385u}) {
    Schedule s(1, 1, 2);
    s.declare_buffer({0, 0}, s.intern("X"), kib, 512);
    const ValidationResult r = check_schedule(s, mesh(1));
    EXPECT_EQ(r.ok(), kib == 384) << kib;
  }
}

TEST(CheckSchedule, GeneratedSchedulesAreClean) {
  const ArchConfig arch = mesh(4);
  const AttentionWorkload w = small_prefill(64, 16);
  EXPECT_TRUE(check_schedule(gen_flatattention(w, arch, make_flat_params(Dataflow::kFlatAsync, 2, 2, 16, 16)), arch).ok());
  EXPECT_TRUE(check_schedule(gen_flashattention(w, arch, FlashVariant::kFa3, 16), arch).ok());
}

TEST(Simulate, FlatTwoByTwoFunctionalMatchesReference) {
  const ArchConfig arch = mesh(2);
  const AttentionWorkload w = small_prefill(64, 16);
  const Schedule s = gen_flatattention(w, arch, make_flat_params(Dataflow::kFlatHc, 2, 2, 16, 16));
  const AttentionTensors t = random_tensors(w, 7);
  FunctionalMemory mem = bind_attention(w, t, s);
  simulate(s, arch, SimMode::kFunctional, &mem);
  const auto out = extract_attention(w, t, s, mem);
  const auto ref = reference_attention(w, t);
  ASSERT_EQ(out.size(), ref.size());
  for (std::size_t i = 0; i < out.size(); ++i) EXPECT_LE(max_relative_error(out[i], ref[i]), 1e-6);
}

TEST(Simulate, DeterministicAndModeIndependent) {
  const ArchConfig arch = mesh(4);
  const AttentionWorkload w = small_prefill(128, 32);
  const Schedule s = gen_flatattention(w, arch, make_flat_params(Dataflow::kFlatAsync, 2, 2, 32, 32));
  const SimReport a = simulate(s, arch, SimMode::kTiming);
  const SimReport b = simulate(s, arch, SimMode::kTiming);
  EXPECT_EQ(a, b);
  const AttentionTensors t = random_tensors(w, 3);
  FunctionalMemory mem = bind_attention(w, t, s);
  EXPECT_EQ(simulate(s, arch, SimMode::kFunctional, &mem), a);
}

TEST(Simulate, ExposedCategoriesSumToTotal) {
  const ArchConfig arch = mesh(8);
  const AttentionWorkload w = small_prefill(512, 64);
  for (Dataflow d : all_dataflows()) {
    const Schedule s = is_flat(d) ? gen_flatattention(w, arch, make_flat_params(d, 4, 4, 32, 32))
                                  : gen_flashattention(w, arch, d == Dataflow::kFa3 ? FlashVariant::kFa3 : FlashVariant::kFa2, 64);
    const SimReport r = simulate(s, arch, SimMode::kTiming);
    EXPECT_NEAR(exposed_sum(r), static_cast<double>(r.total_cycles), 1e-6 * r.total_cycles)
        << to_string(d);
    for (double u : {r.matrix_utilization, r.matrix_active_utilization,
                     r.matrix_window_utilization, r.avg_hbm_bw_utilization}) {
      EXPECT_GE(u, 0.0);
      EXPECT_LE(u, 1.0);
    }
  }
}

TEST(Simulate, DoublingLinkBandwidthNeverSlows) {
  ArchConfig arch = mesh(8);
  const AttentionWorkload w = small_prefill(512, 64);
  for (Dataflow d : {Dataflow::kFlatSc, Dataflow::kFlatHc, Dataflow::kFlatAsync}) {
    for (std::uint32_t g : {2u, 4u, 8u}) {
      arch.noc.link_bytes_per_cycle = 128;
      const Schedule s = gen_flatattention(w, arch, make_flat_params(d, g, g, 32, 32));
      const Cycles slow = simulate(s, arch, SimMode::kTiming).total_cycles;
      arch.noc.link_bytes_per_cycle = 256;
      const Cycles fast = simulate(s, arch, SimMode::kTiming).total_cycles;
      EXPECT_LE(fast, slow) << to_string(d) << " g=" << g;
    }
  }
}

TEST(Simulate, MatrixWorkIsConservedAcrossDataflows) {
  const ArchConfig arch = mesh(4);
  const AttentionWorkload w = small_prefill(256, 64);
  const Cycles fa2 = simulate(gen_flashattention(w, arch, FlashVariant::kFa2, 64), arch, SimMode::kTiming).matrix_busy_cycles;
  const Cycles fa3 = simulate(gen_flashattention(w, arch, FlashVariant::kFa3, 64), arch, SimMode::kTiming).matrix_busy_cycles;
  EXPECT_EQ(fa2, fa3);
  for (Dataflow d : {Dataflow::kFlatHc, Dataflow::kFlatAsync}) {
    const Schedule s = gen_flatattention(w, arch, make_flat_params(d, 1, 1, 64, 64));
    EXPECT_EQ(simulate(s, arch, SimMode::kTiming).matrix_busy_cycles, fa2) << to_string(d);
  }
}

}  // namespace
}  // namespace flatsim
