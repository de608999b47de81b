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

#include "flatsim/schedule.hpp"

#include <algorithm>

namespace flatsim {

const char* to_string(StepKind k) {
  switch (k) {
    case StepKind::kHbmLoad: return "hbm_load";
    case StepKind::kHbmStore: return "hbm_store";
    case StepKind::kMulticast: return "multicast";
    case StepKind::kReduce: return "reduce";
    case StepKind::kMatMul: return "matmul";
    case StepKind::kVectorOp: return "vector";
    case StepKind::kBarrier: return "barrier";
    case StepKind::kLocalCopy: return "local_copy";
  }
  return "?";
}

Schedule::Schedule(std::uint32_t mesh_x, std::uint32_t mesh_y, std::uint32_t dtype_bytes)
    : mesh_x_(mesh_x), mesh_y_(mesh_y), dtype_bytes_(dtype_bytes) {}

NameId Schedule::intern(std::string_view name) {
  auto it = name_index_.find(std::string(name));
  if (it != name_index_.end()) return it->second;
  const auto id = static_cast<NameId>(names_.size());
  names_.emplace_back(name);
  name_index_.emplace(names_.back(), id);
  return id;
}

BufferId Schedule::find_buffer(TileCoord tile, NameId name) const {
  auto it = buffer_index_.find(key(tile, name));
  return it == buffer_index_.end() ? kNoName : it->second;
}

BufferId Schedule::declare_buffer(TileCoord tile, NameId name, std::uint32_t rows,
                                  std::uint32_t cols) {
  const auto k = key(tile, name);
  if (auto it = buffer_index_.find(k); it != buffer_index_.end()) {
    auto& b = buffers_[it->second];
    if (b.rows != rows || b.cols != cols)
      throw ContractViolation("buffer '" + names_[name] + "' redeclared with another shape");
    return it->second;
  }
  const auto id = static_cast<BufferId>(buffers_.size());
  buffers_.push_back({tile, name, rows, cols, Bytes{rows} * cols * dtype_bytes_});
  buffer_index_.emplace(k, id);
  return id;
}

std::uint32_t Schedule::add_tensor(std::string name, std::uint32_t rows, std::uint32_t cols) {
  tensors_.push_back({std::move(name), rows, cols});
  return static_cast<std::uint32_t>(tensors_.size() - 1);
}

std::uint32_t Schedule::add_mask(const ScoreMask& m) {
  masks_.push_back(m);
  return static_cast<std::uint32_t>(masks_.size() - 1);
}

StepId Schedule::push_step(Step s, std::span<const StepId> deps) {
  s.dep_begin = static_cast<std::uint32_t>(dep_pool_.size());
  s.dep_count = static_cast<std::uint32_t>(deps.size());
  dep_pool_.insert(dep_pool_.end(), deps.begin(), deps.end());
  steps_.push_back(s);
  return static_cast<StepId>(steps_.size() - 1);
}

void Schedule::participants(const Step& s, std::vector<TileCoord>& out) const {
  out.clear();
  if (s.kind == StepKind::kBarrier) {
    for (std::uint32_t dy = 0; dy < s.span_extent_y; ++dy)
      for (std::uint32_t dx = 0; dx < s.span_extent; ++dx)
        out.push_back({s.tile.x + dx, s.tile.y + dy});
    return;
  }
  if (s.kind != StepKind::kMulticast && s.kind != StepKind::kReduce) {
    out.push_back(s.tile);
    return;
  }
  out.push_back(s.tile);
  for (std::uint32_t i = 0; i < s.span_extent; ++i) {
    TileCoord t = s.axis == CollectiveAxis::kRow ? TileCoord{s.span_first + i, s.tile.y}
                                                 : TileCoord{s.tile.x, s.span_first + i};
    if (t != s.tile) out.push_back(t);
  }
}

std::vector<Bytes> Schedule::l1_footprint() const {
  std::vector<Bytes> fp(static_cast<std::size_t>(mesh_x_) * mesh_y_, 0);
  for (const auto& b : buffers_) {
    if (b.tile.x < mesh_x_ && b.tile.y < mesh_y_) fp[b.tile.y * mesh_x_ + b.tile.x] += b.bytes;
  }
  return fp;
}

void Schedule::append(const Schedule& other) {
  const auto step_off = static_cast<StepId>(steps_.size());
  const auto tensor_off = static_cast<std::uint32_t>(tensors_.size());
  const auto mask_off = static_cast<std::uint32_t>(masks_.size());
  std::vector<NameId> name_map(other.names_.size());
  for (std::size_t i = 0; i < other.names_.size(); ++i) name_map[i] = intern(other.names_[i]);
  for (const auto& b : other.buffers_) {
    if (find_buffer(b.tile, name_map[b.name]) != kNoName)
      throw ContractViolation("Schedule::append: buffer collision");
    declare_buffer(b.tile, name_map[b.name], b.rows, b.cols);
  }
  for (const auto& t : other.tensors_) tensors_.push_back(t);
  for (const auto& m : other.masks_) masks_.push_back(m);
  std::vector<StepId> deps;
  for (const auto& s : other.steps_) {
    Step c = s;
    for (auto& op : c.operands)
      if (op != kNoName) op = name_map[op];
    if (c.kind == StepKind::kHbmLoad || c.kind == StepKind::kHbmStore) c.region.tensor += tensor_off;
    if (c.mask != kNoMask) c.mask += mask_off;
    deps.clear();
    for (StepId d : other.deps(s)) deps.push_back(d + step_off);
    push_step(c, deps);
  }
}

ScheduleBuilder::ScheduleBuilder(Schedule& schedule) : sched_(&schedule) {}

void ScheduleBuilder::declare(TileCoord tile, NameId name, std::uint32_t rows,
                              std::uint32_t cols) {
  const BufferId id = sched_->declare_buffer(tile, name, rows, cols);
  if (hazards_.size() <= id) hazards_.resize(id + 1);
}

BufferId ScheduleBuilder::resolve(TileCoord tile, NameId name) const {
  const BufferId id = sched_->find_buffer(tile, name);
  if (id == kNoName)
    throw ContractViolation("undeclared buffer '" + sched_->name(name) + "' on tile (" +
                            std::to_string(tile.x) + "," + std::to_string(tile.y) + ")");
  return id;
}

Bytes ScheduleBuilder::buffer_bytes(TileCoord tile, NameId name) const {
  return sched_->buffers()[resolve(tile, name)].bytes;
}

StepId ScheduleBuilder::emit(Step s, std::span<const BufferId> reads,
                             std::span<const BufferId> writes) {
  scratch_.clear();
  for (BufferId b : reads) {
    if (hazards_[b].last_writer != ~0u) scratch_.push_back(hazards_[b].last_writer);
  }
  for (BufferId b : writes) {
    const auto& h = hazards_[b];
    if (h.last_writer != ~0u) scratch_.push_back(h.last_writer);
    scratch_.insert(scratch_.end(), h.readers.begin(), h.readers.end());
  }
  scratch_.insert(scratch_.end(), extra_.begin(), extra_.end());
  extra_.clear();
  std::sort(scratch_.begin(), scratch_.end());
  scratch_.erase(std::unique(scratch_.begin(), scratch_.end()), scratch_.end());

  const StepId id = sched_->push_step(s, scratch_);
  for (BufferId b : reads) {
    auto& r = hazards_[b].readers;
    if (r.empty() || r.back() != id) r.push_back(id);
  }
  for (BufferId b : writes) {
    hazards_[b].last_writer = id;
    hazards_[b].readers.clear();
  }
  return id;
}

StepId ScheduleBuilder::hbm_load(TileCoord tile, NameId dst, const HbmRegion& region) {
  Step s;
  s.kind = StepKind::kHbmLoad;
  s.tile = tile;
  s.region = region;
  s.bytes = Bytes{region.rows} * region.cols * sched_->dtype_bytes();
  s.operands[0] = dst;
  const BufferId w = resolve(tile, dst);
  return emit(s, {}, {&w, 1});
}

StepId ScheduleBuilder::hbm_store(TileCoord tile, NameId src, const HbmRegion& region) {
  Step s;
  s.kind = StepKind::kHbmStore;
  s.tile = tile;
  s.region = region;
  s.bytes = Bytes{region.rows} * region.cols * sched_->dtype_bytes();
  s.operands[0] = src;
  const BufferId r = resolve(tile, src);
  return emit(s, {&r, 1}, {});
}

StepId ScheduleBuilder::multicast(TileCoord root, CollectiveAxis axis, std::uint32_t first,
                                  std::uint32_t extent, NameId buf,
                                  CollectiveStrategy strategy) {
  Step s;
  s.kind = StepKind::kMulticast;
  s.ckind = CollectiveKind::kMulticast;
  s.axis = axis;
  s.strategy = strategy;
  s.tile = root;
  s.span_first = first;
  s.span_extent = extent;
  s.bytes = buffer_bytes(root, buf);
  s.operands[0] = buf;
  std::vector<TileCoord> parts;
  sched_->participants(s, parts);
  const BufferId r = resolve(root, buf);
  std::vector<BufferId> w;
  for (std::size_t i = 1; i < parts.size(); ++i) w.push_back(resolve(parts[i], buf));
  return emit(s, {&r, 1}, w);
}

StepId ScheduleBuilder::reduce(TileCoord root, CollectiveAxis axis, std::uint32_t first,
                               std::uint32_t extent, NameId buf, CollectiveKind op,
                               CollectiveStrategy strategy) {
  Step s;
  s.kind = StepKind::kReduce;
  s.ckind = op;
  s.axis = axis;
  s.strategy = strategy;
  s.tile = root;
  s.span_first = first;
  s.span_extent = extent;
  s.bytes = buffer_bytes(root, buf);
  s.operands[0] = buf;
  std::vector<TileCoord> parts;
  sched_->participants(s, parts);
  std::vector<BufferId> r;
  for (const auto& t : parts) r.push_back(resolve(t, buf));
  const BufferId w = resolve(root, buf);
  return emit(s, r, {&w, 1});
}

StepId ScheduleBuilder::matmul(TileCoord tile, NameId a, NameId b, NameId c, GemmJob job,
                               bool transpose_b, bool accumulate, std::uint32_t mask) {
  Step s;
  s.kind = StepKind::kMatMul;
  s.tile = tile;
  s.gemm = job;
  s.transpose_b = transpose_b;
  s.accumulate = accumulate;
  s.mask = mask;
  s.operands = {a, b, c, kNoName, kNoName};
  std::vector<BufferId> r{resolve(tile, a), resolve(tile, b)};
  const BufferId w = resolve(tile, c);
  if (accumulate) r.push_back(w);
  return emit(s, r, {&w, 1});
}

StepId ScheduleBuilder::vector(TileCoord tile, VectorKind kind, std::uint64_t elements,
                               VectorOp op, std::initializer_list<NameId> operands) {
  Step s;
  s.kind = StepKind::kVectorOp;
  s.tile = tile;
  s.vkind = kind;
  s.vop = op;
  s.elements = elements;
  std::size_t i = 0;
  for (NameId n : operands) s.operands.at(i++) = n;
  std::vector<BufferId> r, w;
  auto rd = [&](std::size_t k) { r.push_back(resolve(tile, s.operands[k])); };
  auto wr = [&](std::size_t k) { w.push_back(resolve(tile, s.operands[k])); };
  switch (op) {
    case VectorOp::kTimingOnly:
      for (std::size_t k = 0; k < i; ++k) rd(k);
      break;
    case VectorOp::kRowMaxMerge: rd(0); rd(1); wr(2); break;
    case VectorOp::kRowMaxFirst: rd(0); wr(1); break;
    case VectorOp::kExpShift: rd(0); rd(1); wr(0); break;
    case VectorOp::kRowSum: rd(0); wr(1); break;
    case VectorOp::kRescale:
      rd(0); rd(1); rd(2); rd(3); rd(4); wr(0); wr(2); wr(4);
      break;
    case VectorOp::kRescaleFirst: rd(1); rd(3); wr(0); wr(2); break;
    case VectorOp::kNormalize: rd(0); rd(1); wr(0); break;
  }
  return emit(s, r, w);
}

StepId ScheduleBuilder::barrier(TileCoord origin, std::uint32_t extent_x,
                                std::uint32_t extent_y) {
  Step s;
  s.kind = StepKind::kBarrier;
  s.tile = origin;
  s.span_first = origin.x;
  s.span_extent = extent_x;
  s.span_extent_y = extent_y;
  return emit(s, {}, {});
}

StepId ScheduleBuilder::local_copy(TileCoord tile, NameId src, NameId dst) {
  Step s;
  s.kind = StepKind::kLocalCopy;
  s.tile = tile;
  s.bytes = buffer_bytes(tile, src);
  s.operands[0] = src;
  s.operands[1] = dst;
  const BufferId r = resolve(tile, src);
  const BufferId w = resolve(tile, dst);
  return emit(s, {&r, 1}, {&w, 1});
}

}  // namespace flatsim
