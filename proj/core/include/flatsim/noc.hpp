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

#pragma once

#include <algorithm>
#include <compare>
#include <map>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "flatsim/arch.hpp"

namespace flatsim {

struct TileCoord {
  std::uint32_t x = 0;  // column
  std::uint32_t y = 0;  // row
  auto operator<=>(const TileCoord&) const = default;
};

enum class Dir : std::uint8_t { kEast = 0, kWest = 1, kNorth = 2, kSouth = 3 };

struct DirectedLink {
  TileCoord from;
  Dir dir;
  bool operator==(const DirectedLink&) const = default;
};

using LinkId = std::uint32_t;

/// Index space for a 2D mesh: four outgoing links per router plus an
/// ingress and egress port for every router position on each mesh edge
/// (used by edge-attached memory).
class MeshTopology {
 public:
  MeshTopology(std::uint32_t mesh_x, std::uint32_t mesh_y);
  explicit MeshTopology(const NocSpec& noc) : MeshTopology(noc.mesh_x, noc.mesh_y) {}

  std::uint32_t mesh_x() const { return mx_; }
  std::uint32_t mesh_y() const { return my_; }
  std::size_t num_links() const { return num_links_; }
  bool contains(TileCoord t) const { return t.x < mx_ && t.y < my_; }
  std::uint32_t tile_index(TileCoord t) const { return t.y * mx_ + t.x; }
  TileCoord coord(std::uint32_t index) const { return {index % mx_, index / mx_}; }

  LinkId link_id(DirectedLink l) const;
  /// Port from edge memory into the router at `pos` along that edge.
  LinkId edge_ingress(MeshEdge edge, std::uint32_t pos) const;
  LinkId edge_egress(MeshEdge edge, std::uint32_t pos) const;
  /// Router adjacent to an edge position.
  TileCoord edge_router(MeshEdge edge, std::uint32_t pos) const;

  void append_route(TileCoord src, TileCoord dst, std::vector<LinkId>& out) const;
  std::vector<LinkId> route_ids(TileCoord src, TileCoord dst) const;
  std::vector<LinkId> path_from_edge(MeshEdge edge, std::uint32_t pos, TileCoord dst) const;
  std::vector<LinkId> path_to_edge(TileCoord src, MeshEdge edge, std::uint32_t pos) const;

 private:
  std::uint32_t mx_, my_;
  std::size_t mesh_links_;
  std::size_t num_links_;
};

/// Dimension-ordered route: all X hops first, then Y. North is +y.
std::vector<DirectedLink> route_xy(TileCoord src, TileCoord dst);

enum class CollectiveKind { kMulticast, kReduceSum, kReduceMax };
enum class CollectiveAxis { kRow, kColumn };
enum class CollectiveStrategy { kSwSeq, kSwTree, kHw };

const char* to_string(CollectiveStrategy s);
const char* to_string(CollectiveKind k);

struct CollectiveRequest {
  CollectiveKind kind = CollectiveKind::kMulticast;
  CollectiveAxis axis = CollectiveAxis::kRow;
  CollectiveStrategy strategy = CollectiveStrategy::kHw;
  TileCoord root;
  Bytes size = 0;
  std::uint32_t group_extent = 1;
};

/// Uncontended latency of a row/column collective.
///
///   HW:      size/bw + (E-1)*hop             (flit-pipelined, in-router combine)
///   SW.Seq:  sum_{d=1}^{E-1} (size/bw + d*hop [+ local add])
///   SW.Tree: ceil(log2 E) stages of (size/bw + stage_hops*hop + barrier
///            [+ local add]), never slower than SW.Seq
///
/// Software reductions charge 3*size/l1_bw per received operand.
Cycles collective_time(const CollectiveRequest& req, const NocSpec& noc, const TileSpec& tile);

/// Number of payload crossings each link of the collective's span sees, in
/// span order starting at the root side. Used for link occupancy.
std::uint32_t collective_link_crossings(const CollectiveRequest& req, std::uint32_t link_index);

/// Whole-transfer link occupancy. Each link keeps its busy intervals; a
/// reservation takes the earliest gap at or after its start time, so
/// intervals on one link never overlap and a booking made for a later
/// cycle does not delay traffic that fits before it.
class LinkTimeline {
 public:
  LinkTimeline(std::size_t num_links, std::uint32_t bytes_per_cycle, Cycles hop_latency,
               bool record_intervals = false);

  Cycles occupancy(Bytes size) const;
  Cycles hop_latency() const { return hop_latency_; }

  /// Reserves `size` worth of occupancy on each link of `path` and returns
  /// the cycle at which the tail reaches the destination.
  Cycles schedule_transfer(std::span<const LinkId> path, Cycles start, Bytes size);

  /// Earliest t >= start at which `link` is idle for `duration` cycles.
  Cycles earliest_gap(LinkId link, Cycles start, Cycles duration) const;
  /// Earliest t >= start at which every links[i] is idle for durations[i].
  Cycles earliest_common_gap(std::span<const LinkId> links, std::span<const Cycles> durations,
                             Cycles start) const;
  /// Books [begin, begin + duration); throws if it overlaps a reservation.
  void reserve(LinkId link, Cycles begin, Cycles duration);

  /// Promise that no later request starts before `now`; lets old intervals
  /// be discarded.
  void advance(Cycles now) { horizon_ = std::max(horizon_, now); }

  /// End of the last reservation on the link.
  Cycles free_at(LinkId link) const;
  Cycles busy_cycles(LinkId link) const { return busy_[link]; }
  std::size_t num_links() const { return busy_.size(); }

  struct Interval {
    Cycles begin, end;
  };
  /// Empty unless constructed with record_intervals.
  const std::vector<Interval>& intervals(LinkId link) const;
  /// True when no two recorded intervals on any link overlap.
  bool intervals_disjoint() const;

 private:
  std::vector<std::map<Cycles, Cycles>> busy_map_;
  std::vector<Cycles> busy_;
  std::vector<Cycles> last_end_;
  std::vector<std::vector<Interval>> intervals_;
  std::uint32_t bytes_per_cycle_;
  Cycles hop_latency_;
  Cycles horizon_ = 0;
  bool record_;
};

}  // namespace flatsim
