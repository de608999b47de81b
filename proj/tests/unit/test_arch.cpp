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

#include "flatsim/arch.hpp"

namespace flatsim {
namespace {

TEST(Arch, ReferenceConfigValidates) {
  EXPECT_TRUE(validate(reference_arch()).ok());
  EXPECT_TRUE(validate(reference_arch_fp8()).ok());
}

TEST(Arch, ReferencePeaksFollowTheClosedForm) {
  const PeakSummary p = derive_peaks(reference_arch());
  // 1024 tiles x (2 x 32 x 16) FLOP/cycle x 965 MHz.
  EXPECT_EQ(p.tile_flop_per_cycle, 1024u);
  EXPECT_EQ(p.mesh_flop_per_cycle, 1024u * 1024u);
  EXPECT_DOUBLE_EQ(p.peak_flops, 1024.0 * 1024.0 * 965e6);
  // 32 channels x 64 B/cycle x 965 MHz.
  EXPECT_EQ(p.hbm_bytes_per_cycle, 32u * 64u);
  EXPECT_DOUBLE_EQ(p.peak_hbm_bytes_per_s, 32.0 * 64.0 * 965e6);
  EXPECT_NEAR(p.peak_hbm_bytes_per_s, 2e12, 0.012 * 2e12);
  EXPECT_DOUBLE_EQ(p.link_bytes_per_s, 128 * 965e6);
}

TEST(Arch, Fp8PeakWithinOnePercentOf1976Tflops) {
  const PeakSummary p = derive_peaks(reference_arch_fp8());
  EXPECT_NEAR(p.peak_flops, 1976e12, 0.01 * 1976e12);
  EXPECT_EQ(reference_arch_fp8().dtype_bytes, 1u);
}

TEST(Arch, UnitConfigGivesTwoFlops) {
  ArchConfig c;
  c.noc.mesh_x = c.noc.mesh_y = 1;
  c.tile.matrix_ce_rows = c.tile.matrix_ce_cols = 1;
  c.frequency_hz = 1;
  EXPECT_DOUBLE_EQ(derive_peaks(c).peak_flops, 2.0);
}

TEST(Arch, DegenerateMeshIsAViolation) {
  ArchConfig c = reference_arch();
  c.noc.mesh_x = 0;
  const auto r = validate(c);
  ASSERT_FALSE(r.ok());
  EXPECT_NE(r.violations.front().find("mesh_x"), std::string::npos);
}

TEST(Arch, TinyL1IsAViolation) {
  ArchConfig c = reference_arch();
  c.tile.l1_capacity = 1024;
  const auto r = validate(c);
  ASSERT_FALSE(r.ok());
  bool found = false;
  for (const auto& v : r.violations) found |= v.find("l1_capacity") != std::string::npos;
  EXPECT_TRUE(found);
}

TEST(Arch, ValidateDoesNotMutate) {
  const ArchConfig c = reference_arch();
  ArchConfig copy = c;
  (void)validate(copy);
  EXPECT_EQ(copy.noc.mesh_x, c.noc.mesh_x);
  EXPECT_EQ(copy.tile.l1_capacity, c.tile.l1_capacity);
}

TEST(Arch, PeaksScaleLinearly) {
  const ArchConfig base = reference_arch();
  const double p0 = derive_peaks(base).peak_flops;
  ArchConfig a = base;
  a.noc.mesh_x *= 2;
  EXPECT_DOUBLE_EQ(derive_peaks(a).peak_flops, 2 * p0);
  a = base;
  a.tile.matrix_ce_cols *= 2;
  EXPECT_DOUBLE_EQ(derive_peaks(a).peak_flops, 2 * p0);
  a = base;
  a.frequency_hz *= 2;
  EXPECT_DOUBLE_EQ(derive_peaks(a).peak_flops, 2 * p0);
}

TEST(Arch, DerivePeaksIsPure) {
  const PeakSummary a = derive_peaks(reference_arch());
  const PeakSummary b = derive_peaks(reference_arch());
  EXPECT_EQ(a.peak_flops, b.peak_flops);
  EXPECT_EQ(a.peak_hbm_bytes_per_s, b.peak_hbm_bytes_per_s);
}

}  // namespace
}  // namespace flatsim
