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

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "flatsim/arch.hpp"
#include "flatsim/engines.hpp"
#include "flatsim/noc.hpp"

namespace flatsim {

enum class StepKind : std::uint8_t {
  kHbmLoad,
  kHbmStore,
  kMulticast,
  kReduce,
  kMatMul,
  kVectorOp,
  kBarrier,
  kLocalCopy,
};

const char* to_string(StepKind k);

/// Functional semantics of a vector step. Operand slots are listed per op.
enum class VectorOp : std::uint8_t {
  kTimingOnly,     // no payload effect
  kRowMaxMerge,    // {S, M, MN}:  MN = max(M, rowmax(S))
  kRowMaxFirst,    // {S, MN}:     MN = rowmax(S)
  kExpShift,       // {S, MN}:     S = exp(S - MN)
  kRowSum,         // {S, LP}:     LP = rowsum(S)
  kRescale,        // {M, MN, L, LP, O}: a = exp(M - MN); L = a L + LP; O = a O; M = MN
  kRescaleFirst,   // {M, MN, L, LP}:    L = LP; M = MN
  kNormalize,      // {O, L}:      O = O / L
};

using StepId = std::uint32_t;
using NameId = std::uint32_t;
using BufferId = std::uint32_t;
inline constexpr NameId kNoName = ~0u;
inline constexpr std::uint32_t kNoMask = ~0u;

/// Rectangular region of a named HBM tensor.
struct HbmRegion {
  std::uint32_t tensor = 0;
  std::uint32_t row0 = 0, col0 = 0;
  std::uint32_t rows = 0, cols = 0;
};

/// Masking applied to a score block after Q K^T. Row r of the block sits at
/// query index q_row0 + r of its instance; its sequence position is
/// causal_offset + (q_row0 + r) % q_period. Column j is key k_col0 + j and
/// is valid when < kv_len (and <= position when causal).
struct ScoreMask {
  std::uint32_t q_row0 = 0;
  std::uint32_t q_period = 1;
  std::int64_t causal_offset = 0;
  std::uint32_t k_col0 = 0;
  std::uint32_t kv_len = 0;
  bool causal = false;
};

struct Step {
  StepKind kind = StepKind::kBarrier;
  VectorOp vop = VectorOp::kTimingOnly;
  VectorKind vkind = VectorKind::kAdd;
  CollectiveKind ckind = CollectiveKind::kMulticast;
  CollectiveAxis axis = CollectiveAxis::kRow;
  CollectiveStrategy strategy = CollectiveStrategy::kHw;
  bool accumulate = false;  // MatMul: C += A op(B)
  bool transpose_b = false; // MatMul: op(B) = B^T

  TileCoord tile;                  // issuing tile or collective root
  std::uint32_t span_first = 0;    // collectives/barriers: first coordinate along axis
  std::uint32_t span_extent = 1;   // participants along axis (barrier: x extent)
  std::uint32_t span_extent_y = 1; // barrier only: y extent from tile.y

  GemmJob gemm;                    // MatMul
  std::uint64_t elements = 0;      // VectorOp
  Bytes bytes = 0;                 // HBM / collective / copy payload size
  HbmRegion region;                // HbmLoad / HbmStore
  std::uint32_t mask = kNoMask;    // MatMul

  std::array<NameId, 5> operands{kNoName, kNoName, kNoName, kNoName, kNoName};

  std::uint32_t dep_begin = 0;
  std::uint32_t dep_count = 0;
};

struct BufferDecl {
  TileCoord tile;
  NameId name;
  std::uint32_t rows, cols;
  Bytes bytes;
};

struct HbmTensorDesc {
  std::string name;
  std::uint32_t rows, cols;
};

/// A per-tile program set: steps with explicit dependency edges, a static
/// L1 buffer table and the HBM tensors the steps touch.
class Schedule {
 public:
  Schedule() = default;
  Schedule(std::uint32_t mesh_x, std::uint32_t mesh_y, std::uint32_t dtype_bytes);

  std::uint32_t mesh_x() const { return mesh_x_; }
  std::uint32_t mesh_y() const { return mesh_y_; }
  std::uint32_t dtype_bytes() const { return dtype_bytes_; }

  std::span<const Step> steps() const { return steps_; }
  const Step& step(StepId id) const { return steps_[id]; }
  std::size_t size() const { return steps_.size(); }
  std::span<const StepId> deps(const Step& s) const {
    return {dep_pool_.data() + s.dep_begin, s.dep_count};
  }
  std::span<const StepId> deps(StepId id) const { return deps(steps_[id]); }

  std::span<const BufferDecl> buffers() const { return buffers_; }
  /// kNoName when the tile has no buffer with that name.
  BufferId find_buffer(TileCoord tile, NameId name) const;
  const std::string& name(NameId id) const { return names_[id]; }
  std::span<const HbmTensorDesc> tensors() const { return tensors_; }
  std::span<const ScoreMask> masks() const { return masks_; }

  /// Tiles touched by a collective or barrier step, root first for
  /// collectives.
  void participants(const Step& s, std::vector<TileCoord>& out) const;

  /// Static per-tile L1 footprint (sum of declared buffers).
  std::vector<Bytes> l1_footprint() const;

  // Metadata.
  std::uint32_t group_x = 1, group_y = 1;
  std::string label;

  // Mutation, used by ScheduleBuilder and tests that hand-assemble schedules.
  NameId intern(std::string_view name);
  BufferId declare_buffer(TileCoord tile, NameId name, std::uint32_t rows, std::uint32_t cols);
  std::uint32_t add_tensor(std::string name, std::uint32_t rows, std::uint32_t cols);
  std::uint32_t add_mask(const ScoreMask& m);
  StepId push_step(Step s, std::span<const StepId> deps);
  Step& mutable_step(StepId id) { return steps_[id]; }

  /// Appends every step/buffer/tensor of `other`, offsetting ids. Buffers
  /// with equal (tile, name) must not collide.
  void append(const Schedule& other);

 private:
  static std::uint64_t key(TileCoord t, NameId n) {
    return (static_cast<std::uint64_t>(t.y) << 48) | (static_cast<std::uint64_t>(t.x) << 32) | n;
  }

  std::uint32_t mesh_x_ = 1, mesh_y_ = 1, dtype_bytes_ = 2;
  std::vector<Step> steps_;
  std::vector<StepId> dep_pool_;
  std::vector<BufferDecl> buffers_;
  std::unordered_map<std::uint64_t, BufferId> buffer_index_;
  std::vector<std::string> names_;
  std::unordered_map<std::string, NameId> name_index_;
  std::vector<HbmTensorDesc> tensors_;
  std::vector<ScoreMask> masks_;
};

/// Appends steps while inferring read-after-write, write-after-read and
/// write-after-write dependencies from each step's buffer operands.
class ScheduleBuilder {
 public:
  explicit ScheduleBuilder(Schedule& schedule);

  Schedule& schedule() { return *sched_; }
  NameId name(std::string_view n) { return sched_->intern(n); }
  void declare(TileCoord tile, NameId name, std::uint32_t rows, std::uint32_t cols);

  StepId hbm_load(TileCoord tile, NameId dst, const HbmRegion& region);
  StepId hbm_store(TileCoord tile, NameId src, const HbmRegion& region);
  /// Row or column multicast of `buf` from root to tiles
  /// [first, first + extent) along the axis.
  StepId multicast(TileCoord root, CollectiveAxis axis, std::uint32_t first,
                   std::uint32_t extent, NameId buf, CollectiveStrategy strategy);
  StepId reduce(TileCoord root, CollectiveAxis axis, std::uint32_t first, std::uint32_t extent,
                NameId buf, CollectiveKind op, CollectiveStrategy strategy);
  StepId matmul(TileCoord tile, NameId a, NameId b, NameId c, GemmJob job, bool transpose_b,
                bool accumulate, std::uint32_t mask = kNoMask);
  StepId vector(TileCoord tile, VectorKind kind, std::uint64_t elements, VectorOp op,
                std::initializer_list<NameId> operands);
  StepId barrier(TileCoord origin, std::uint32_t extent_x, std::uint32_t extent_y);
  StepId local_copy(TileCoord tile, NameId src, NameId dst);

  /// Extra ordering edges for the next step only.
  void also_after(StepId id) { extra_.push_back(id); }

 private:
  struct Hazard {
    StepId last_writer = ~0u;
    std::vector<StepId> readers;
  };
  BufferId resolve(TileCoord tile, NameId name) const;
  StepId emit(Step s, std::span<const BufferId> reads, std::span<const BufferId> writes);
  Bytes buffer_bytes(TileCoord tile, NameId name) const;

  Schedule* sched_;
  std::vector<Hazard> hazards_;
  std::vector<StepId> extra_;
  std::vector<StepId> scratch_;
};

}  // namespace flatsim
