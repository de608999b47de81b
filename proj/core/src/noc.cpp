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

#include "flatsim/noc.hpp"

#include <algorithm>
#include <bit>

namespace flatsim {

namespace {

Cycles ceil_div(Bytes a, std::uint64_t b) { return (a + b - 1) / b; }

std::uint32_t tree_stages(std::uint32_t extent) {
  return extent <= 1 ? 0 : std::bit_width(extent - 1);
}

}  // namespace

MeshTopology::MeshTopology(std::uint32_t mesh_x, std::uint32_t mesh_y)
    : mx_(mesh_x), my_(mesh_y) {
  mesh_links_ = static_cast<std::size_t>(mx_) * my_ * 4;
  // Per edge position: ingress + egress.
  num_links_ = mesh_links_ + 2 * 2 * (static_cast<std::size_t>(mx_) + my_);
}

LinkId MeshTopology::link_id(DirectedLink l) const {
  return static_cast<LinkId>(tile_index(l.from) * 4 + static_cast<std::uint32_t>(l.dir));
}

namespace {
std::size_t edge_offset(MeshEdge edge, std::uint32_t mx, std::uint32_t my) {
  switch (edge) {
    case MeshEdge::kSouth: return 0;
    case MeshEdge::kNorth: return mx;
    case MeshEdge::kWest: return 2ull * mx;
    case MeshEdge::kEast: return 2ull * mx + my;
  }
  return 0;
}
}  // namespace

LinkId MeshTopology::edge_ingress(MeshEdge edge, std::uint32_t pos) const {
  return static_cast<LinkId>(mesh_links_ + 2 * (edge_offset(edge, mx_, my_) + pos));
}

LinkId MeshTopology::edge_egress(MeshEdge edge, std::uint32_t pos) const {
  return edge_ingress(edge, pos) + 1;
}

TileCoord MeshTopology::edge_router(MeshEdge edge, std::uint32_t pos) const {
  switch (edge) {
    case MeshEdge::kSouth: return {pos, 0};
    case MeshEdge::kNorth: return {pos, my_ - 1};
    case MeshEdge::kWest: return {0, pos};
    case MeshEdge::kEast: return {mx_ - 1, pos};
  }
  return {};
}

void MeshTopology::append_route(TileCoord src, TileCoord dst,
                                std::vector<LinkId>& out) const {
  TileCoord cur = src;
  while (cur.x != dst.x) {
    const Dir d = dst.x > cur.x ? Dir::kEast : Dir::kWest;
    out.push_back(link_id({cur, d}));
    cur.x = d == Dir::kEast ? cur.x + 1 : cur.x - 1;
  }
  while (cur.y != dst.y) {
    const Dir d = dst.y > cur.y ? Dir::kNorth : Dir::kSouth;
    out.push_back(link_id({cur, d}));
    cur.y = d == Dir::kNorth ? cur.y + 1 : cur.y - 1;
  }
}

std::vector<LinkId> MeshTopology::route_ids(TileCoord src, TileCoord dst) const {
  std::vector<LinkId> out;
  append_route(src, dst, out);
  return out;
}

std::vector<LinkId> MeshTopology::path_from_edge(MeshEdge edge, std::uint32_t pos,
                                                 TileCoord dst) const {
  std::vector<LinkId> out{edge_ingress(edge, pos)};
  append_route(edge_router(edge, pos), dst, out);
  return out;
}

std::vector<LinkId> MeshTopology::path_to_edge(TileCoord src, MeshEdge edge,
                                               std::uint32_t pos) const {
  std::vector<LinkId> out;
  append_route(src, edge_router(edge, pos), out);
  out.push_back(edge_egress(edge, pos));
  return out;
}

std::vector<DirectedLink> route_xy(TileCoord src, TileCoord dst) {
  std::vector<DirectedLink> out;
  TileCoord cur = src;
  while (cur.x != dst.x) {
    const Dir d = dst.x > cur.x ? Dir::kEast : Dir::kWest;
    out.push_back({cur, d});
    cur.x = d == Dir::kEast ? cur.x + 1 : cur.x - 1;
  }
  while (cur.y != dst.y) {
    const Dir d = dst.y > cur.y ? Dir::kNorth : Dir::kSouth;
    out.push_back({cur, d});
    cur.y = d == Dir::kNorth ? cur.y + 1 : cur.y - 1;
  }
  return out;
}

const char* to_string(CollectiveStrategy s) {
  switch (s) {
    case CollectiveStrategy::kSwSeq: return "sw_seq";
    case CollectiveStrategy::kSwTree: return "sw_tree";
    case CollectiveStrategy::kHw: return "hw";
  }
  return "?";
}

const char* to_string(CollectiveKind k) {
  switch (k) {
    case CollectiveKind::kMulticast: return "multicast";
    case CollectiveKind::kReduceSum: return "reduce_sum";
    case CollectiveKind::kReduceMax: return "reduce_max";
  }
  return "?";
}

Cycles collective_time(const CollectiveRequest& req, const NocSpec& noc, const TileSpec& tile) {
  const std::uint32_t axis_extent =
      req.axis == CollectiveAxis::kRow ? noc.mesh_x : noc.mesh_y;
  if (req.group_extent < 1 || req.group_extent > axis_extent)
    throw ContractViolation("collective_time: group_extent exceeds mesh extent along axis");
  if (req.size == 0) throw ContractViolation("collective_time: size must be > 0");
  const std::uint32_t e = req.group_extent;
  if (e == 1) return 0;

  const Cycles xfer = ceil_div(req.size, noc.link_bytes_per_cycle);
  const bool reduce = req.kind != CollectiveKind::kMulticast;
  const Cycles combine = reduce ? ceil_div(3 * req.size, tile.l1_bytes_per_cycle) : 0;

  const Cycles hw = xfer + (e - 1) * noc.hop_latency;
  Cycles seq = 0;
  for (std::uint32_t d = 1; d < e; ++d) seq += xfer + d * noc.hop_latency + combine;

  switch (req.strategy) {
    case CollectiveStrategy::kHw:
      return hw;
    case CollectiveStrategy::kSwSeq:
      return seq;
    case CollectiveStrategy::kSwTree: {
      const std::uint32_t stages = tree_stages(e);
      Cycles tree = 0;
      for (std::uint32_t s = 1; s <= stages; ++s) {
        const Cycles hops = Cycles{1} << (stages - s);
        tree += xfer + hops * noc.hop_latency + noc.sync_barrier_cost + combine;
      }
      return std::min(tree, seq);
    }
  }
  return hw;
}

std::uint32_t collective_link_crossings(const CollectiveRequest& req,
                                        std::uint32_t link_index) {
  const std::uint32_t e = req.group_extent;
  if (link_index + 1 >= e) return 0;
  switch (req.strategy) {
    case CollectiveStrategy::kHw:
      return 1;
    case CollectiveStrategy::kSwSeq:
      // Unicasts to destinations at distance d cross links [0, d).
      return e - 1 - link_index;
    case CollectiveStrategy::kSwTree: {
      // Each stage moves one copy over every link of its span once.
      const std::uint32_t stages = tree_stages(e);
      std::uint32_t n = 0;
      for (std::uint32_t s = 1; s <= stages; ++s) n += (link_index < (1u << (stages - s))) ? 1 : 0;
      return std::max(1u, n);
    }
  }
  return 1;
}

LinkTimeline::LinkTimeline(std::size_t num_links, std::uint32_t bytes_per_cycle,
                           Cycles hop_latency, bool record_intervals)
    : busy_map_(num_links),
      busy_(num_links, 0),
      last_end_(num_links, 0),
      bytes_per_cycle_(bytes_per_cycle),
      hop_latency_(hop_latency),
      record_(record_intervals) {
  if (bytes_per_cycle == 0) throw ContractViolation("LinkTimeline: zero link bandwidth");
  if (record_) intervals_.resize(num_links);
}

Cycles LinkTimeline::occupancy(Bytes size) const { return ceil_div(size, bytes_per_cycle_); }

Cycles LinkTimeline::schedule_transfer(std::span<const LinkId> path, Cycles start, Bytes size) {
  if (path.empty()) return start;
  const Cycles occ = occupancy(size);
  Cycles done = start;
  for (LinkId l : path) {
    const Cycles grant = earliest_gap(l, start, occ);
    reserve(l, grant, occ);
    done = std::max(done, grant + occ);
  }
  return done + path.size() * hop_latency_;
}

Cycles LinkTimeline::earliest_gap(LinkId link, Cycles start, Cycles duration) const {
  const auto& m = busy_map_[link];
  Cycles t = start;
  auto it = m.upper_bound(t);
  if (it != m.begin()) {
    auto prev = std::prev(it);
    if (prev->second > t) t = prev->second;
  }
  while (it != m.end() && it->first < t + duration) {
    t = std::max(t, it->second);
    ++it;
  }
  return t;
}

Cycles LinkTimeline::earliest_common_gap(std::span<const LinkId> links,
                                         std::span<const Cycles> durations, Cycles start) const {
  Cycles t = start;
  for (;;) {
    Cycles next = t;
    for (std::size_t i = 0; i < links.size(); ++i)
      next = std::max(next, earliest_gap(links[i], t, durations[i]));
    if (next == t) return t;
    t = next;
  }
}

void LinkTimeline::reserve(LinkId link, Cycles begin, Cycles duration) {
  if (duration == 0) return;
  auto& m = busy_map_[link];
  while (!m.empty() && m.begin()->second <= horizon_ && m.begin()->second < begin)
    m.erase(m.begin());
  const Cycles end = begin + duration;
  auto next = m.lower_bound(begin);
  if (next != m.end() && next->first < end)
    throw ContractViolation("LinkTimeline: overlapping reservation");
  Cycles lo = begin, hi = end;
  if (next != m.begin()) {
    auto prev = std::prev(next);
    if (prev->second > begin) throw ContractViolation("LinkTimeline: overlapping reservation");
    if (prev->second == begin) {
      lo = prev->first;
      m.erase(prev);
    }
  }
  if (next != m.end() && next->first == end) {
    hi = next->second;
    m.erase(next);
  }
  m.emplace(lo, hi);
  if (record_) intervals_[link].push_back({begin, end});
  last_end_[link] = std::max(last_end_[link], end);
  busy_[link] += duration;
}

Cycles LinkTimeline::free_at(LinkId link) const { return last_end_[link]; }

const std::vector<LinkTimeline::Interval>& LinkTimeline::intervals(LinkId link) const {
  static const std::vector<Interval> kEmpty;
  return record_ ? intervals_[link] : kEmpty;
}

bool LinkTimeline::intervals_disjoint() const {
  for (const auto& list : intervals_) {
    auto sorted = list;
    std::sort(sorted.begin(), sorted.end(),
              [](const Interval& a, const Interval& b) { return a.begin < b.begin; });
    for (std::size_t i = 1; i < sorted.size(); ++i)
      if (sorted[i].begin < sorted[i - 1].end) return false;
  }
  return true;
}

}  // namespace flatsim
