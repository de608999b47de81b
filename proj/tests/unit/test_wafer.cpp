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

#include "flatsim/sim.hpp"
#include "flatsim/wafer.hpp"

namespace flatsim {
namespace {

ParallelismPlan plan(std::uint32_t ep, std::uint32_t batch) {
  ParallelismPlan p;
  p.ep_degree = ep;
  p.batch_per_chip = batch;
  return p;
}

TEST(Plan, TokensPerStep) {
  ParallelismPlan p;
  p.spec_len = 2;
  p.acceptance_rate = 0.7;
  EXPECT_DOUBLE_EQ(p.tokens_per_step(), 1.7);
  p.spec_len = 1;
  EXPECT_DOUBLE_EQ(p.tokens_per_step(), 1.0);
}

TEST(Plan, ValidationRejectsOversubscription) {
  const WaferConfig w;
  ParallelismPlan p = plan(64, 16);
  p.pp_degree = 2;
  EXPECT_FALSE(validate(p, w).empty());
  p = plan(32, 16);
  p.acceptance_rate = 1.5;
  EXPECT_FALSE(validate(p, w).empty());
  EXPECT_TRUE(validate(plan(32, 16), w).empty());
}

TEST(C2c, NoExpertParallelismIsFree) {
  WaferModel m;
  EXPECT_EQ(m.c2c_time(plan(1, 256), WaferConfig{}), 0.0);
}

TEST(C2c, GrowsLinearlyWithBatch) {
  WaferModel m;
  WaferConfig w;
  w.d2d_latency = 1e-9;
  for (std::uint32_t b : {64u, 128u, 256u}) {
    const double t1 = m.c2c_time(plan(32, b), w);
    const double t2 = m.c2c_time(plan(32, 2 * b), w);
    EXPECT_GT(t2, t1);
    EXPECT_LE(t2, 2 * t1 + 1e-12);
    EXPECT_GE(t2, 1.95 * t1) << b;
  }
}

TEST(Serve, FullPipelineHasNoAllToAll) {
  WaferModel m;
  const WaferConfig w;
  ParallelismPlan p = plan(1, 32);
  p.pp_degree = 64;
  const ServingReport r = m.serve(p, w, AttentionDataflow::kFlatAttention);
  for (const auto& k : r.layer)
    if (k.c2c) EXPECT_EQ(k.seconds, 0.0) << k.name;
  // Only the stage-to-stage activation hand-off remains.
  EXPECT_LT(r.c2c_fraction, 0.01);
}

TEST(Serve, TpotFollowsAcceptance) {
  WaferModel m;
  const ServingReport r = m.serve(plan(32, 64), WaferConfig{}, AttentionDataflow::kFlatAttention);
  EXPECT_NEAR(r.tpot_ms, r.t_iter / 1.7 * 1e3, 1e-9);
  EXPECT_GE(r.c2c_fraction, 0.0);
  EXPECT_LE(r.attention_fraction, 1.0);
}

TEST(Serve, LargerEpRaisesCommunicationShare) {
  WaferModel m;
  const WaferConfig w;
  ParallelismPlan p16 = plan(16, 256), p64 = plan(64, 256);
  p64.pp_degree = 1;
  const double f16 = m.serve(p16, w, AttentionDataflow::kFlatAttention).c2c_fraction;
  const double f64 = m.serve(p64, w, AttentionDataflow::kFlatAttention).c2c_fraction;
  EXPECT_GT(f64, f16);
}

TEST(Serve, BatchFrontierIsMonotone) {
  WaferModel m;
  const WaferConfig w;
  double thr = 0, tpot = 0;
  for (std::uint32_t b : {16u, 32u, 64u, 128u, 256u}) {
    const ServingReport r = m.serve(plan(32, b), w, AttentionDataflow::kFlatAttention);
    EXPECT_GE(r.system_throughput, thr) << b;
    EXPECT_GE(r.tpot_ms, tpot) << b;
    thr = r.system_throughput;
    tpot = r.tpot_ms;
  }
}

TEST(Serve, FlatNeverSlowerThanFlashMlaLike) {
  WaferModel m;
  const WaferConfig w;
  for (std::uint32_t b : {16u, 64u, 256u}) {
    const double flat = m.serve(plan(32, b), w, AttentionDataflow::kFlatAttention).system_throughput;
    const double fa = m.serve(plan(32, b), w, AttentionDataflow::kFlashMlaLike).system_throughput;
    EXPECT_GE(flat, fa) << b;
  }
}

TEST(Serve, HbmCapacityExceeded) {
  WaferModel m;
  WaferConfig w;
  w.chip.hbm.capacity = 1ull << 30;
  try {
    m.serve(plan(32, 256), w, AttentionDataflow::kFlatAttention);
    FAIL() << "expected SimError";
  } catch (const SimError& e) {
    EXPECT_NE(std::string(e.what()).find("required"), std::string::npos);
  }
}

TEST(Serve, KernelTimesAreMemoized) {
  WaferModel m;
  const WaferConfig w;
  m.serve(plan(32, 64), w, AttentionDataflow::kFlatAttention);
  const std::size_t n = m.cached_kernels();
  EXPECT_GT(n, 0u);
  m.serve(plan(32, 64), w, AttentionDataflow::kFlatAttention);
  EXPECT_EQ(m.cached_kernels(), n);
}

}  // namespace
}  // namespace flatsim
