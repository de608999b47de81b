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

#include "flatsim/sim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <queue>
#include <string>

#include <fmt/format.h>

#include "flatsim/engines.hpp"
#include "flatsim/noc.hpp"

namespace flatsim {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double shifted_exp(double a, double b) {
  if (a == kNegInf) return 0.0;
  return std::exp(a - b);
}

struct ExposureInterval {
  Cycles begin;
  std::uint32_t length;
  std::uint16_t tile;
  Category cat;
};

std::uint32_t hbm_channel_for(const ArchConfig& arch, TileCoord t) {
  const bool ns = arch.hbm.edge == MeshEdge::kNorth || arch.hbm.edge == MeshEdge::kSouth;
  return (ns ? t.x : t.y) % arch.hbm.num_channels;
}

std::uint32_t hbm_port_for(const ArchConfig& arch, TileCoord t) {
  const bool ns = arch.hbm.edge == MeshEdge::kNorth || arch.hbm.edge == MeshEdge::kSouth;
  return ns ? t.x : t.y;
}

// Links of a row/column collective and how many payload copies cross each.
void collective_links(const MeshTopology& topo, const Step& s, std::vector<LinkId>& links,
                      std::vector<std::uint32_t>& crossings) {
  links.clear();
  crossings.clear();
  const bool row = s.axis == CollectiveAxis::kRow;
  const std::uint32_t p = row ? s.tile.x : s.tile.y;
  const std::uint32_t first = s.span_first;
  const std::uint32_t last = s.span_first + s.span_extent - 1;
  const bool reduce = s.kind == StepKind::kReduce;
  auto at = [&](std::uint32_t q) { return row ? TileCoord{q, s.tile.y} : TileCoord{s.tile.x, q}; };
  const Dir up = row ? Dir::kEast : Dir::kNorth;
  const Dir down = row ? Dir::kWest : Dir::kSouth;

  CollectiveRequest side;
  side.strategy = s.strategy;
  // Positive side.
  side.group_extent = last - p + 1;
  for (std::uint32_t q = p + 1; q <= last; ++q) {
    const std::uint32_t d = q - 1 - p;
    links.push_back(reduce ? topo.link_id({at(q), down}) : topo.link_id({at(q - 1), up}));
    crossings.push_back(collective_link_crossings(side, d));
  }
  // Negative side.
  side.group_extent = p - first + 1;
  for (std::uint32_t q = p; q-- > first;) {
    const std::uint32_t d = p - 1 - q;
    links.push_back(reduce ? topo.link_id({at(q), up}) : topo.link_id({at(q + 1), down}));
    crossings.push_back(collective_link_crossings(side, d));
  }
}

class Functional {
 public:
  Functional(const Schedule& s, FunctionalMemory& mem) : sched_(s), mem_(mem) {
    bufs_.resize(s.buffers().size());
  }

  void execute(const Step& st) {
    switch (st.kind) {
      case StepKind::kHbmLoad: load(st); break;
      case StepKind::kHbmStore: store(st); break;
      case StepKind::kMulticast: multicast(st); break;
      case StepKind::kReduce: reduce(st); break;
      case StepKind::kMatMul: matmul(st); break;
      case StepKind::kVectorOp: vector(st); break;
      case StepKind::kLocalCopy: buf(st.tile, st.operands[1]) = buf(st.tile, st.operands[0]); break;
      case StepKind::kBarrier: break;
    }
  }

 private:
  Matrix& buf(TileCoord t, NameId n) {
    const BufferId id = sched_.find_buffer(t, n);
    Matrix& m = bufs_[id];
    if (m.empty()) {
      const auto& d = sched_.buffers()[id];
      m = Matrix(d.rows, d.cols);
    }
    return m;
  }

  Matrix& tensor(std::uint32_t id) {
    if (id >= mem_.tensors.size()) mem_.tensors.resize(sched_.tensors().size());
    Matrix& m = mem_.tensors[id];
    if (m.empty()) {
      const auto& d = sched_.tensors()[id];
      m = Matrix(d.rows, d.cols);
    }
    return m;
  }

  void load(const Step& st) {
    Matrix& dst = buf(st.tile, st.operands[0]);
    const Matrix& src = tensor(st.region.tensor);
    std::fill(dst.values().begin(), dst.values().end(), 0.0);
    for (std::uint32_t r = 0; r < st.region.rows && r < dst.rows(); ++r) {
      const std::size_t sr = st.region.row0 + r;
      if (sr >= src.rows()) break;
      for (std::uint32_t c = 0; c < st.region.cols && c < dst.cols(); ++c) {
        const std::size_t sc = st.region.col0 + c;
        if (sc >= src.cols()) break;
        dst(r, c) = src(sr, sc);
      }
    }
  }

  void store(const Step& st) {
    const Matrix& src = buf(st.tile, st.operands[0]);
    Matrix& dst = tensor(st.region.tensor);
    for (std::uint32_t r = 0; r < st.region.rows && r < src.rows(); ++r) {
      const std::size_t dr = st.region.row0 + r;
      if (dr >= dst.rows()) break;
      for (std::uint32_t c = 0; c < st.region.cols && c < src.cols(); ++c) {
        const std::size_t dc = st.region.col0 + c;
        if (dc >= dst.cols()) break;
        dst(dr, dc) = src(r, c);
      }
    }
  }

  void multicast(const Step& st) {
    sched_.participants(st, parts_);
    const Matrix& src = buf(parts_[0], st.operands[0]);
    for (std::size_t i = 1; i < parts_.size(); ++i) buf(parts_[i], st.operands[0]) = src;
  }

  void reduce(const Step& st) {
    sched_.participants(st, parts_);
    Matrix acc = buf(parts_[0], st.operands[0]);
    for (std::size_t i = 1; i < parts_.size(); ++i) {
      const Matrix& m = buf(parts_[i], st.operands[0]);
      auto a = acc.values();
      auto b = m.values();
      if (st.ckind == CollectiveKind::kReduceMax) {
        for (std::size_t k = 0; k < a.size(); ++k) a[k] = std::max(a[k], b[k]);
      } else {
        for (std::size_t k = 0; k < a.size(); ++k) a[k] += b[k];
      }
    }
    buf(parts_[0], st.operands[0]) = std::move(acc);
  }

  void matmul(const Step& st) {
    const Matrix& a = buf(st.tile, st.operands[0]);
    const Matrix& b = buf(st.tile, st.operands[1]);
    Matrix& c = buf(st.tile, st.operands[2]);
    const std::uint32_t m = st.gemm.m, n = st.gemm.n, k = st.gemm.k;
    for (std::uint32_t i = 0; i < m; ++i) {
      for (std::uint32_t j = 0; j < n; ++j) {
        double acc = st.accumulate ? c(i, j) : 0.0;
        if (st.transpose_b) {
          for (std::uint32_t p = 0; p < k; ++p) acc += a(i, p) * b(j, p);
        } else {
          for (std::uint32_t p = 0; p < k; ++p) acc += a(i, p) * b(p, j);
        }
        c(i, j) = acc;
      }
    }
    if (st.mask == kNoMask) return;
    const ScoreMask& mk = sched_.masks()[st.mask];
    for (std::uint32_t i = 0; i < m; ++i) {
      const std::int64_t pos =
          mk.causal_offset + static_cast<std::int64_t>((mk.q_row0 + i) % mk.q_period);
      for (std::uint32_t j = 0; j < n; ++j) {
        const std::int64_t key = static_cast<std::int64_t>(mk.k_col0) + j;
        if (key >= mk.kv_len || (mk.causal && key > pos)) c(i, j) = kNegInf;
      }
    }
  }

  void vector(const Step& st) {
    const auto& op = st.operands;
    switch (st.vop) {
      case VectorOp::kTimingOnly:
        return;
      case VectorOp::kRowMaxMerge: {
        const Matrix& s = buf(st.tile, op[0]);
        const Matrix& m = buf(st.tile, op[1]);
        Matrix& mn = buf(st.tile, op[2]);
        for (std::size_t r = 0; r < s.rows(); ++r) {
          double mx = m(r, 0);
          for (double v : s.row(r)) mx = std::max(mx, v);
          mn(r, 0) = mx;
        }
        return;
      }
      case VectorOp::kRowMaxFirst: {
        const Matrix& s = buf(st.tile, op[0]);
        Matrix& mn = buf(st.tile, op[1]);
        for (std::size_t r = 0; r < s.rows(); ++r) {
          double mx = kNegInf;
          for (double v : s.row(r)) mx = std::max(mx, v);
          mn(r, 0) = mx;
        }
        return;
      }
      case VectorOp::kExpShift: {
        Matrix& s = buf(st.tile, op[0]);
        const Matrix& mn = buf(st.tile, op[1]);
        for (std::size_t r = 0; r < s.rows(); ++r)
          for (double& v : s.row(r)) v = shifted_exp(v, mn(r, 0));
        return;
      }
      case VectorOp::kRowSum: {
        const Matrix& s = buf(st.tile, op[0]);
        Matrix& lp = buf(st.tile, op[1]);
        for (std::size_t r = 0; r < s.rows(); ++r) {
          double sum = 0;
          for (double v : s.row(r)) sum += v;
          lp(r, 0) = sum;
        }
        return;
      }
      case VectorOp::kRescale: {
        Matrix& m = buf(st.tile, op[0]);
        const Matrix& mn = buf(st.tile, op[1]);
        Matrix& l = buf(st.tile, op[2]);
        const Matrix& lp = buf(st.tile, op[3]);
        Matrix& o = buf(st.tile, op[4]);
        for (std::size_t r = 0; r < m.rows(); ++r) {
          const double a = shifted_exp(m(r, 0), mn(r, 0));
          l(r, 0) = a * l(r, 0) + lp(r, 0);
          for (double& v : o.row(r)) v *= a;
          m(r, 0) = mn(r, 0);
        }
        return;
      }
      case VectorOp::kRescaleFirst: {
        Matrix& m = buf(st.tile, op[0]);
        const Matrix& mn = buf(st.tile, op[1]);
        Matrix& l = buf(st.tile, op[2]);
        const Matrix& lp = buf(st.tile, op[3]);
        for (std::size_t r = 0; r < m.rows(); ++r) {
          l(r, 0) = lp(r, 0);
          m(r, 0) = mn(r, 0);
        }
        return;
      }
      case VectorOp::kNormalize: {
        Matrix& o = buf(st.tile, op[0]);
        const Matrix& l = buf(st.tile, op[1]);
        for (std::size_t r = 0; r < o.rows(); ++r) {
          const double d = l(r, 0);
          for (double& v : o.row(r)) v = d > 0 ? v / d : 0.0;
        }
        return;
      }
    }
  }

  const Schedule& sched_;
  FunctionalMemory& mem_;
  std::vector<Matrix> bufs_;
  std::vector<TileCoord> parts_;
};

void check_footprint(const Schedule& sched, const ArchConfig& arch) {
  const auto fp = sched.l1_footprint();
  for (std::size_t t = 0; t < fp.size(); ++t) {
    if (fp[t] <= arch.tile.l1_capacity) continue;
    const TileCoord tc{static_cast<std::uint32_t>(t % sched.mesh_x()),
                       static_cast<std::uint32_t>(t / sched.mesh_x())};
    StepId first = 0;
    for (StepId i = 0; i < sched.size(); ++i) {
      if (sched.step(i).tile == tc) {
        first = i;
        break;
      }
    }
    throw SimError(fmt::format(
        "L1 overflow at step {} ({}) on tile ({},{}): footprint {} B exceeds capacity {} B",
        first, to_string(sched.step(first).kind), tc.x, tc.y, fp[t], arch.tile.l1_capacity));
  }
}

}  // namespace

const char* to_string(Category c) {
  switch (c) {
    case Category::kMatrix: return "matrix_engine";
    case Category::kVector: return "vector_softmax";
    case Category::kComm: return "inter_tile_comm";
    case Category::kHbm: return "hbm_access";
    case Category::kSync: return "sync_overhead";
  }
  return "?";
}

SimReport simulate(const Schedule& sched, const ArchConfig& arch, SimMode mode,
                   FunctionalMemory* memory) {
  if (sched.mesh_x() > arch.noc.mesh_x || sched.mesh_y() > arch.noc.mesh_y)
    throw SimError("schedule mesh exceeds architecture mesh");
  if (mode == SimMode::kFunctional && memory == nullptr)
    throw ContractViolation("functional simulation requires a FunctionalMemory");
  check_footprint(sched, arch);

  const MeshTopology topo(arch.noc);
  const std::size_t tiles = topo.mesh_x() * static_cast<std::size_t>(topo.mesh_y());
  const std::size_t n = sched.size();

  SimReport rep;
  rep.matrix_busy.assign(tiles, 0);
  rep.vector_busy.assign(tiles, 0);
  rep.dma_busy.assign(tiles, 0);
  rep.steps = n;
  std::vector<Cycles> gemm_first(tiles, std::numeric_limits<Cycles>::max());
  std::vector<Cycles> gemm_last(tiles, 0);
  if (n == 0) {
    rep.exposed.fill(0.0);
    return rep;
  }

  // Successor lists (CSR) and remaining-dependency counters.
  std::vector<std::uint32_t> pending(n, 0);
  std::vector<std::uint32_t> succ_begin(n + 1, 0);
  for (StepId i = 0; i < n; ++i) {
    for (StepId d : sched.deps(i)) {
      if (d >= n) throw SimError(fmt::format("step {} depends on unknown step {}", i, d));
      ++succ_begin[d + 1];
    }
    pending[i] = sched.step(i).dep_count;
  }
  for (std::size_t i = 0; i < n; ++i) succ_begin[i + 1] += succ_begin[i];
  std::vector<StepId> succ(succ_begin[n]);
  {
    std::vector<std::uint32_t> fill(succ_begin.begin(), succ_begin.end() - 1);
    for (StepId i = 0; i < n; ++i)
      for (StepId d : sched.deps(i)) succ[fill[d]++] = i;
  }

  std::vector<Cycles> ready(n, 0);
  std::vector<Cycles> matrix_free(tiles, 0), vector_free(tiles, 0);
  std::vector<Cycles> dma_free(tiles * arch.tile.dma_channels, 0);
  LinkTimeline links(topo.num_links(), arch.noc.link_bytes_per_cycle, arch.noc.hop_latency);
  HbmChannels hbm(arch.hbm);
  std::vector<ExposureInterval> exposure;
  exposure.reserve(n * 2);
  std::vector<LinkId> span;
  std::vector<std::uint32_t> crossings;
  std::vector<Cycles> durations;
  std::vector<TileCoord> parts;
  std::optional<Functional> func;
  if (mode == SimMode::kFunctional) func.emplace(sched, *memory);

  auto record = [&](TileCoord t, Category c, Cycles b, Cycles e) {
    if (e > b)
      exposure.push_back({b, static_cast<std::uint32_t>(e - b),
                          static_cast<std::uint16_t>(topo.tile_index(t)), c});
  };
  auto take_dma = [&](TileCoord t, Cycles at) -> Cycles& {
    Cycles* best = &dma_free[topo.tile_index(t) * arch.tile.dma_channels];
    for (std::uint32_t c = 1; c < arch.tile.dma_channels; ++c) {
      Cycles& cand = dma_free[topo.tile_index(t) * arch.tile.dma_channels + c];
      if (std::max(cand, at) < std::max(*best, at)) best = &cand;
    }
    return *best;
  };

  using Entry = std::pair<Cycles, StepId>;
  std::priority_queue<Entry, std::vector<Entry>, std::greater<>> queue;
  for (StepId i = 0; i < n; ++i)
    if (pending[i] == 0) queue.push({0, i});

  Cycles makespan = 0;
  std::size_t executed = 0;
  while (!queue.empty()) {
    const auto [at, id] = queue.top();
    queue.pop();
    links.advance(at);
    const Step& st = sched.step(id);
    if (!topo.contains(st.tile))
      throw SimError(fmt::format("step {} targets tile outside the mesh", id));
    const std::uint32_t ti = topo.tile_index(st.tile);
    Cycles done = at;

    switch (st.kind) {
      case StepKind::kMatMul: {
        const Cycles start = std::max(at, matrix_free[ti]);
        const Cycles dur = gemm_cycles(st.gemm, arch.tile);
        done = start + dur;
        matrix_free[ti] = done;
        rep.matrix_busy[ti] += dur;
        gemm_first[ti] = std::min(gemm_first[ti], start);
        gemm_last[ti] = std::max(gemm_last[ti], done);
        rep.matrix_ideal_cycles += gemm_ideal_cycles(st.gemm, arch.tile);
        rep.flops += 2.0 * st.gemm.m * st.gemm.n * st.gemm.k;
        record(st.tile, Category::kMatrix, start, done);
        break;
      }
      case StepKind::kVectorOp: {
        const Cycles start = std::max(at, vector_free[ti]);
        const Cycles dur =
            vector_cycles({st.vkind, st.elements, sched.dtype_bytes()}, arch.tile);
        done = start + dur;
        vector_free[ti] = done;
        rep.vector_busy[ti] += dur;
        record(st.tile, Category::kVector, start, done);
        break;
      }
      case StepKind::kHbmLoad:
      case StepKind::kHbmStore: {
        if (st.bytes == 0) break;
        Cycles& ch = take_dma(st.tile, at);
        const Cycles start = std::max(at, ch);
        const Cycles issue = start + arch.tile.dma_setup_cycles;
        const std::uint32_t port = hbm_port_for(arch, st.tile);
        const bool read = st.kind == StepKind::kHbmLoad;
        if (read) {
          const auto svc =
              hbm.serve({hbm_channel_for(arch, st.tile), st.bytes, HbmDirection::kRead}, issue);
          span = topo.path_from_edge(arch.hbm.edge, port, st.tile);
          const Cycles noc = links.schedule_transfer(span, svc.begin + arch.hbm.access_latency,
                                                     st.bytes);
          done = std::max(svc.complete, noc);
        } else {
          span = topo.path_to_edge(st.tile, arch.hbm.edge, port);
          const Cycles noc = links.schedule_transfer(span, issue, st.bytes);
          const auto svc =
              hbm.serve({hbm_channel_for(arch, st.tile), st.bytes, HbmDirection::kWrite}, issue);
          done = std::max(svc.complete, noc);
        }
        ch = done;
        rep.dma_busy[ti] += done - start;
        record(st.tile, Category::kHbm, start, done);
        break;
      }
      case StepKind::kLocalCopy: {
        Cycles& ch = take_dma(st.tile, at);
        const Cycles start = std::max(at, ch);
        done = start + arch.tile.dma_setup_cycles +
               (2 * st.bytes + arch.tile.l1_bytes_per_cycle - 1) / arch.tile.l1_bytes_per_cycle;
        ch = done;
        rep.dma_busy[ti] += done - start;
        record(st.tile, Category::kComm, start, done);
        break;
      }
      case StepKind::kMulticast:
      case StepKind::kReduce: {
        if (st.span_extent <= 1) break;
        CollectiveRequest req;
        req.kind = st.ckind;
        req.axis = st.axis;
        req.strategy = st.strategy;
        req.root = st.tile;
        req.size = st.bytes;
        req.group_extent = st.span_extent;
        const Cycles dur = collective_time(req, arch.noc, arch.tile);
        collective_links(topo, st, span, crossings);
        const Cycles occ = links.occupancy(st.bytes);
        durations.clear();
        for (std::uint32_t c : crossings) durations.push_back(std::min<Cycles>(dur, occ * c));
        const Cycles start = links.earliest_common_gap(span, durations, at);
        for (std::size_t i = 0; i < span.size(); ++i) links.reserve(span[i], start, durations[i]);
        done = start + dur;
        sched.participants(st, parts);
        for (const auto& p : parts) record(p, Category::kComm, start, done);
        break;
      }
      case StepKind::kBarrier: {
        done = at + arch.noc.sync_barrier_cost;
        sched.participants(st, parts);
        for (const auto& p : parts)
          if (topo.contains(p)) record(p, Category::kSync, at, done);
        break;
      }
    }

    if (func) func->execute(st);
    makespan = std::max(makespan, done);
    ++executed;
    for (std::uint32_t k = succ_begin[id]; k < succ_begin[id + 1]; ++k) {
      const StepId s = succ[k];
      ready[s] = std::max(ready[s], done);
      if (--pending[s] == 0) queue.push({ready[s], s});
    }
  }

  if (executed != n) {
    std::string stuck;
    int shown = 0;
    for (StepId i = 0; i < n && shown < 16; ++i) {
      if (pending[i] > 0) {
        stuck += fmt::format("{}{}({})", shown ? ", " : "", i, to_string(sched.step(i).kind));
        ++shown;
      }
    }
    throw SimError(fmt::format("deadlock: {} of {} steps never became runnable; stuck: {}",
                               n - executed, n, stuck));
  }

  rep.total_cycles = makespan;
  rep.hbm_bytes_read = hbm.bytes_read();
  rep.hbm_bytes_written = hbm.bytes_written();
  for (auto b : rep.matrix_busy) rep.matrix_busy_cycles += b;
  if (makespan > 0) {
    rep.matrix_utilization = rep.matrix_ideal_cycles / (static_cast<double>(tiles) * makespan);
    const auto peaks = derive_peaks(arch);
    rep.avg_hbm_bw_utilization =
        static_cast<double>(rep.hbm_bytes_read + rep.hbm_bytes_written) /
        (static_cast<double>(peaks.hbm_bytes_per_cycle) * makespan);
    double link_busy = 0;
    for (LinkId l = 0; l < links.num_links(); ++l) {
      rep.max_link_busy = std::max(rep.max_link_busy, links.busy_cycles(l));
      link_busy += static_cast<double>(links.busy_cycles(l));
    }
    rep.mean_link_utilization = link_busy / (static_cast<double>(links.num_links()) * makespan);
  }
  if (rep.matrix_busy_cycles > 0) {
    rep.matrix_active_utilization = rep.matrix_ideal_cycles / rep.matrix_busy_cycles;
    double window = 0;
    for (std::size_t t = 0; t < tiles; ++t)
      if (gemm_last[t] > gemm_first[t]) window += static_cast<double>(gemm_last[t] - gemm_first[t]);
    rep.matrix_window_utilization = rep.matrix_ideal_cycles / window;
  }

  // Exposed-time attribution, tile by tile.
  std::vector<std::uint32_t> bucket(tiles + 1, 0);
  for (const auto& e : exposure) ++bucket[e.tile + 1];
  for (std::size_t i = 0; i < tiles; ++i) bucket[i + 1] += bucket[i];
  std::vector<ExposureInterval> by_tile(exposure.size());
  {
    std::vector<std::uint32_t> fill(bucket.begin(), bucket.end() - 1);
    for (const auto& e : exposure) by_tile[fill[e.tile]++] = e;
  }
  exposure.clear();
  exposure.shrink_to_fit();

  std::array<long double, kNumCategories> totals{};
  struct Edge {
    Cycles t;
    int delta;
    Category cat;
  };
  std::vector<Edge> edges;
  for (std::size_t t = 0; t < tiles; ++t) {
    edges.clear();
    for (std::uint32_t i = bucket[t]; i < bucket[t + 1]; ++i) {
      const auto& e = by_tile[i];
      edges.push_back({e.begin, +1, e.cat});
      edges.push_back({e.begin + e.length, -1, e.cat});
    }
    std::sort(edges.begin(), edges.end(), [](const Edge& a, const Edge& b) {
      return a.t != b.t ? a.t < b.t : a.delta < b.delta;
    });
    std::array<int, kNumCategories> active{};
    Cycles cursor = 0;
    auto charge = [&](Cycles until) {
      if (until <= cursor) return;
      std::size_t c = static_cast<std::size_t>(Category::kSync);
      for (std::size_t k = 0; k < static_cast<std::size_t>(Category::kSync); ++k) {
        if (active[k] > 0) {
          c = k;
          break;
        }
      }
      totals[c] += static_cast<long double>(until - cursor);
      cursor = until;
    };
    for (const auto& e : edges) {
      charge(e.t);
      active[static_cast<std::size_t>(e.cat)] += e.delta;
    }
    charge(makespan);
  }
  for (std::size_t c = 0; c < kNumCategories; ++c)
    rep.exposed[c] = static_cast<double>(totals[c] / static_cast<long double>(tiles));
  return rep;
}

ValidationResult check_schedule(const Schedule& sched, const ArchConfig& arch) {
  ValidationResult r;
  const std::size_t n = sched.size();
  const MeshTopology topo(arch.noc);
  if (sched.mesh_x() > arch.noc.mesh_x || sched.mesh_y() > arch.noc.mesh_y)
    r.violations.emplace_back("schedule mesh exceeds architecture mesh");

  // Bounds and collective support.
  std::vector<TileCoord> parts;
  for (StepId i = 0; i < n; ++i) {
    const Step& s = sched.step(i);
    sched.participants(s, parts);
    for (const auto& p : parts) {
      if (!topo.contains(p)) {
        r.violations.push_back(fmt::format("step {} touches tile ({},{}) outside the mesh", i,
                                           p.x, p.y));
        break;
      }
    }
    if ((s.kind == StepKind::kMulticast || s.kind == StepKind::kReduce) &&
        s.strategy == CollectiveStrategy::kHw && !arch.noc.hw_collectives_enabled &&
        s.span_extent > 1)
      r.violations.push_back(fmt::format("step {} uses HW collectives, which are disabled", i));
    for (StepId d : sched.deps(s)) {
      if (d >= n) r.violations.push_back(fmt::format("step {} depends on unknown step {}", i, d));
    }
  }
  if (sched.group_x > arch.noc.mesh_x || sched.group_y > arch.noc.mesh_y)
    r.violations.emplace_back("group shape exceeds the mesh");

  // Acyclicity (Kahn) and def-before-use replay in topological order.
  std::vector<std::uint32_t> pending(n, 0);
  std::vector<std::vector<StepId>> succ(n);
  for (StepId i = 0; i < n; ++i) {
    for (StepId d : sched.deps(i)) {
      if (d >= n) continue;
      ++pending[i];
      succ[d].push_back(i);
    }
  }
  std::vector<StepId> order;
  order.reserve(n);
  for (StepId i = 0; i < n; ++i)
    if (pending[i] == 0) order.push_back(i);
  for (std::size_t k = 0; k < order.size(); ++k)
    for (StepId s : succ[order[k]])
      if (--pending[s] == 0) order.push_back(s);
  if (order.size() != n) {
    r.violations.push_back(
        fmt::format("dependency cycle: {} steps are part of or behind a cycle", n - order.size()));
  }

  std::vector<char> written(sched.buffers().size(), 0);
  auto mark = [&](TileCoord t, NameId nm) {
    const BufferId b = sched.find_buffer(t, nm);
    if (b != kNoName) written[b] = 1;
  };
  auto need = [&](StepId i, TileCoord t, NameId nm) {
    const BufferId b = sched.find_buffer(t, nm);
    if (b == kNoName) {
      r.violations.push_back(fmt::format("step {} reads undeclared buffer", i));
    } else if (!written[b]) {
      r.violations.push_back(fmt::format("step {} reads buffer '{}' on ({},{}) before any write",
                                         i, sched.name(nm), t.x, t.y));
      written[b] = 1;  // report once
    }
  };
  for (StepId i : order) {
    const Step& s = sched.step(i);
    const auto& op = s.operands;
    switch (s.kind) {
      case StepKind::kHbmLoad: mark(s.tile, op[0]); break;
      case StepKind::kHbmStore: need(i, s.tile, op[0]); break;
      case StepKind::kMulticast:
        need(i, s.tile, op[0]);
        sched.participants(s, parts);
        for (const auto& p : parts) mark(p, op[0]);
        break;
      case StepKind::kReduce:
        sched.participants(s, parts);
        for (const auto& p : parts) need(i, p, op[0]);
        break;
      case StepKind::kMatMul:
        need(i, s.tile, op[0]);
        need(i, s.tile, op[1]);
        if (s.accumulate) need(i, s.tile, op[2]);
        mark(s.tile, op[2]);
        break;
      case StepKind::kVectorOp:
        switch (s.vop) {
          case VectorOp::kTimingOnly:
            for (NameId x : op)
              if (x != kNoName) need(i, s.tile, x);
            break;
          case VectorOp::kRowMaxMerge: need(i, s.tile, op[0]); need(i, s.tile, op[1]); mark(s.tile, op[2]); break;
          case VectorOp::kRowMaxFirst: need(i, s.tile, op[0]); mark(s.tile, op[1]); break;
          case VectorOp::kExpShift: need(i, s.tile, op[0]); need(i, s.tile, op[1]); break;
          case VectorOp::kRowSum: need(i, s.tile, op[0]); mark(s.tile, op[1]); break;
          case VectorOp::kRescale:
            for (int k = 0; k < 5; ++k) need(i, s.tile, op[k]);
            break;
          case VectorOp::kRescaleFirst:
            need(i, s.tile, op[1]); need(i, s.tile, op[3]); mark(s.tile, op[0]); mark(s.tile, op[2]);
            break;
          case VectorOp::kNormalize: need(i, s.tile, op[0]); need(i, s.tile, op[1]); break;
        }
        break;
      case StepKind::kLocalCopy: need(i, s.tile, op[0]); mark(s.tile, op[1]); break;
      case StepKind::kBarrier: break;
    }
  }

  const auto fp = sched.l1_footprint();
  for (std::size_t t = 0; t < fp.size(); ++t) {
    if (fp[t] > arch.tile.l1_capacity) {
      r.violations.push_back(fmt::format("tile ({},{}) L1 footprint {} B exceeds capacity {} B",
                                         t % sched.mesh_x(), t / sched.mesh_x(), fp[t],
                                         arch.tile.l1_capacity));
    }
  }
  return r;
}

}  // namespace flatsim
