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

#include <vector>

#include "flatsim/noc.hpp"

namespace flatsim {
namespace {

Cycles coll(CollectiveKind kind, CollectiveStrategy s, Bytes size, std::uint32_t extent,
            const NocSpec& noc = {}, const TileSpec& tile = {}) {
  CollectiveRequest r;
  r.kind = kind;
  r.strategy = s;
  r.size = size;
  r.group_extent = extent;
  return collective_time(r, noc, tile);
}

TEST(Route, SelfIsEmpty) { EXPECT_TRUE(route_xy({0, 0}, {0, 0}).empty()); }

TEST(Route, StraightEast) {
  const auto p = route_xy({0, 0}, {3, 0});
  ASSERT_EQ(p.size(), 3u);
  for (const auto& l : p) EXPECT_EQ(l.dir, Dir::kEast);
}

TEST(Route, XThenY) {
  const auto p = route_xy({1, 2}, {4, 5});
  ASSERT_EQ(p.size(), 6u);
  for (int i = 0; i < 3; ++i) EXPECT_EQ(p[i].dir, Dir::kEast);
  for (int i = 3; i < 6; ++i) EXPECT_EQ(p[i].dir, Dir::kNorth);
  EXPECT_EQ(p[3].from, (TileCoord{4, 2}));
}

TEST(Route, Deterministic) { EXPECT_EQ(route_xy({7, 1}, {2, 9}), route_xy({7, 1}, {2, 9})); }

TEST(Route, LinkIdsAreDistinct) {
  MeshTopology topo(4, 4);
  std::vector<bool> seen(topo.num_links(), false);
  for (std::uint32_t y = 0; y < 4; ++y)
    for (std::uint32_t x = 0; x < 4; ++x)
      for (Dir d : {Dir::kEast, Dir::kWest, Dir::kNorth, Dir::kSouth}) {
        const bool inside = (d == Dir::kEast && x < 3) || (d == Dir::kWest && x > 0) ||
                            (d == Dir::kNorth && y < 3) || (d == Dir::kSouth && y > 0);
        if (!inside) continue;
        const LinkId id = topo.link_id({{x, y}, d});
        ASSERT_LT(id, topo.num_links());
        EXPECT_FALSE(seen[id]);
        seen[id] = true;
      }
}

TEST(Collective, HwMulticastClosedForm) {
  EXPECT_EQ(coll(CollectiveKind::kMulticast, CollectiveStrategy::kHw, 128 * 1024, 32), 1055u);
}

TEST(Collective, SeqMulticastClosedForm) {
  Cycles expect = 0;
  for (int d = 1; d <= 31; ++d) expect += 1024 + d;
  EXPECT_EQ(expect, 32240u);
  EXPECT_EQ(coll(CollectiveKind::kMulticast, CollectiveStrategy::kSwSeq, 128 * 1024, 32), expect);
}

TEST(Collective, SingletonIsFree) {
  for (auto s : {CollectiveStrategy::kHw, CollectiveStrategy::kSwSeq, CollectiveStrategy::kSwTree})
    for (auto k : {CollectiveKind::kMulticast, CollectiveKind::kReduceSum})
      EXPECT_EQ(coll(k, s, 4096, 1), 0u);
}

TEST(Collective, ExtentBeyondMeshThrows) {
  NocSpec noc;
  noc.mesh_x = 8;
  EXPECT_THROW(coll(CollectiveKind::kMulticast, CollectiveStrategy::kHw, 128, 9, noc),
               ContractViolation);
}

TEST(Collective, HwGrowsByHopPerDestination) {
  const Bytes sz = 64 * 1024;
  for (std::uint32_t e = 2; e < 32; ++e) {
    EXPECT_EQ(coll(CollectiveKind::kMulticast, CollectiveStrategy::kHw, sz, e + 1) -
                  coll(CollectiveKind::kMulticast, CollectiveStrategy::kHw, sz, e),
              1u);
    EXPECT_EQ(coll(CollectiveKind::kMulticast, CollectiveStrategy::kSwSeq, sz, e + 1) -
                  coll(CollectiveKind::kMulticast, CollectiveStrategy::kSwSeq, sz, e),
              sz / 128 + e);
  }
}

TEST(Collective, AsymptoticRatios) {
  const Bytes sz = Bytes{1} << 30;
  const double hw = coll(CollectiveKind::kMulticast, CollectiveStrategy::kHw, sz, 32);
  const double seq = coll(CollectiveKind::kMulticast, CollectiveStrategy::kSwSeq, sz, 32);
  const double tree = coll(CollectiveKind::kMulticast, CollectiveStrategy::kSwTree, sz, 32);
  EXPECT_NEAR(seq / hw, 31, 1);
  EXPECT_NEAR(tree / hw, 5, 0.5);
}

TEST(Collective, StrategyOrderingExhaustive) {
  for (auto k : {CollectiveKind::kMulticast, CollectiveKind::kReduceSum, CollectiveKind::kReduceMax})
    for (std::uint32_t e = 2; e <= 32; ++e)
      for (Bytes sz = 128; sz <= (Bytes{1} << 20); sz *= 2) {
        const Cycles hw = coll(k, CollectiveStrategy::kHw, sz, e);
        const Cycles tree = coll(k, CollectiveStrategy::kSwTree, sz, e);
        const Cycles seq = coll(k, CollectiveStrategy::kSwSeq, sz, e);
        EXPECT_LE(hw, tree) << e << " " << sz;
        EXPECT_LE(tree, seq) << e << " " << sz;
      }
}

TEST(Collective, SwReduceChargesLocalAdd) {
  const TileSpec t;
  const Bytes sz = 512 * 1024;
  const Cycles mc = coll(CollectiveKind::kMulticast, CollectiveStrategy::kSwSeq, sz, 4);
  const Cycles rd = coll(CollectiveKind::kReduceSum, CollectiveStrategy::kSwSeq, sz, 4);
  EXPECT_EQ(rd - mc, 3 * (3 * sz / t.l1_bytes_per_cycle));
  EXPECT_EQ(coll(CollectiveKind::kReduceSum, CollectiveStrategy::kHw, sz, 4),
            coll(CollectiveKind::kMulticast, CollectiveStrategy::kHw, sz, 4));
}

TEST(LinkTimeline, SingleFlit) {
  LinkTimeline tl(4, 128, 1);
  const std::vector<LinkId> p{2};
  EXPECT_EQ(tl.schedule_transfer(p, 10, 128), 10u + 1 + 1);
}

TEST(LinkTimeline, SharedLinkSerializes) {
  LinkTimeline tl(4, 128, 1);
  const std::vector<LinkId> p{0};
  const Cycles a = tl.schedule_transfer(p, 0, 1280);
  const Cycles b = tl.schedule_transfer(p, 0, 1280);
  EXPECT_EQ(b - a, 10u);
}

TEST(LinkTimeline, DisjointPathsDoNotInteract) {
  LinkTimeline tl(8, 128, 1);
  const std::vector<LinkId> p{0, 1}, q{2, 3};
  const Cycles a = tl.schedule_transfer(p, 5, 4096);
  const Cycles b = tl.schedule_transfer(q, 5, 4096);
  EXPECT_EQ(a, b);
  EXPECT_EQ(a, 5u + 32 + 2);
}

TEST(LinkTimeline, EarlierTrafficFillsGaps) {
  LinkTimeline tl(2, 128, 1, true);
  const std::vector<LinkId> p{0};
  tl.schedule_transfer(p, 1000, 128 * 10);         // [1000, 1010)
  EXPECT_EQ(tl.schedule_transfer(p, 0, 128 * 5), 5u + 1);  // fits before it
  EXPECT_EQ(tl.schedule_transfer(p, 998, 128 * 5), 1015u + 1);  // does not fit in [998, 1000)
  EXPECT_TRUE(tl.intervals_disjoint());
}

TEST(LinkTimeline, OverlappingReserveThrows) {
  LinkTimeline tl(1, 128, 1);
  tl.reserve(0, 10, 5);
  EXPECT_THROW(tl.reserve(0, 12, 5), ContractViolation);
  EXPECT_NO_THROW(tl.reserve(0, 15, 5));
  EXPECT_EQ(tl.earliest_gap(0, 0, 10), 0u);
  EXPECT_EQ(tl.earliest_gap(0, 5, 10), 20u);
  EXPECT_EQ(tl.busy_cycles(0), 10u);
}

TEST(LinkTimeline, CommonGap) {
  LinkTimeline tl(2, 128, 1);
  tl.reserve(0, 0, 10);
  tl.reserve(1, 12, 10);
  const std::vector<LinkId> links{0, 1};
  const std::vector<Cycles> dur{4, 4};
  EXPECT_EQ(tl.earliest_common_gap(links, dur, 0), 22u);
  const std::vector<Cycles> shorter{2, 2};
  EXPECT_EQ(tl.earliest_common_gap(links, shorter, 0), 10u);
}

}  // namespace
}  // namespace flatsim
