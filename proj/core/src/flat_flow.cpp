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

#include <algorithm>
#include <array>

#include <fmt/format.h>

#include "flatsim/dataflows.hpp"

namespace flatsim {

namespace {

std::uint32_t ceil_div(std::uint32_t a, std::uint32_t b) { return (a + b - 1) / b; }

std::uint32_t clip(std::int64_t total, std::int64_t begin, std::uint32_t len) {
  if (begin >= total) return 0;
  return static_cast<std::uint32_t>(std::min<std::int64_t>(len, total - begin));
}

struct BufferSet {
  NameId q, k, v, s, o, m, mn, l, lp;
};

class FlatEmitter {
 public:
  FlatEmitter(const AttentionWorkload& w, const ArchConfig& arch, const FlatParams& p)
      : e_(effective_attention(w)),
        p_(p),
        sched_(arch.noc.mesh_x, arch.noc.mesh_y, w.dtype_bytes),
        b_(sched_) {
    if (auto errs = validate(p, arch); !errs.empty())
      throw ContractViolation("invalid flat parameters: " + errs.front());
    sr_ = p.slice_r();
    sc_ = p.slice_c();
    groups_x_ = arch.noc.mesh_x / p.gx;
    groups_y_ = arch.noc.mesh_y / p.gy;
    sched_.group_x = p.gx;
    sched_.group_y = p.gy;
    const std::uint32_t inst = e_.instances;
    tq_ = sched_.add_tensor("Q", inst * e_.rows, e_.d_qk);
    tk_ = sched_.add_tensor("K", inst * e_.kv_len, e_.d_qk);
    if (!e_.v_from_k) tv_ = sched_.add_tensor("V", inst * e_.kv_len, e_.d_v);
    to_ = sched_.add_tensor("O", inst * e_.rows, e_.d_v);
    const std::uint32_t sets = p.async ? 2 : 1;
    for (std::uint32_t i = 0; i < sets; ++i) {
      auto n = [&](const char* base) { return b_.name(fmt::format("{}{}", base, i)); };
      sets_[i] = {n("Q"), n("K"), e_.v_from_k ? n("K") : n("V"), n("S"), n("O"),
                  n("M"), n("MN"), n("L"), n("LP")};
    }
  }

  Schedule run() {
    const std::uint32_t row_blocks = ceil_div(e_.rows, p_.block_r);
    const std::uint32_t items = e_.instances * row_blocks;
    const std::uint32_t groups = std::min(groups_x_ * groups_y_, items);
    std::vector<bool> declared(groups, false);
    // Items are dealt round-robin; emission interleaves groups so that step
    // ids follow the natural issue order across the mesh.
    const std::uint32_t rounds = ceil_div(items, groups);
    for (std::uint32_t r = 0; r < rounds; ++r) {
      for (std::uint32_t g = 0; g < groups; ++g) {
        const std::uint32_t item = r * groups + g;
        if (item >= items) break;
        const TileCoord origin{(g % groups_x_) * p_.gx, (g / groups_x_) * p_.gy};
        if (!declared[g]) {
          declare(origin, r + 1 < rounds && p_.async ? 2 : 1);
          declared[g] = true;
        }
        emit_item(origin, item / row_blocks, item % row_blocks,
                  sets_[p_.async ? r % 2 : 0]);
      }
    }
    sched_.label = fmt::format("flat {}x{} slice {}x{}{}", p_.gx, p_.gy, sr_, sc_,
                               p_.async ? " async" : "");
    return std::move(sched_);
  }

 private:
  TileCoord at(TileCoord origin, std::uint32_t lx, std::uint32_t ly) const {
    return {origin.x + lx, origin.y + ly};
  }
  TileCoord row_root(TileCoord origin, std::uint32_t ly) const {
    return at(origin, ly % p_.gx, ly);
  }
  TileCoord col_root(TileCoord origin, std::uint32_t lx) const {
    return at(origin, lx, lx % p_.gy);
  }

  void declare(TileCoord origin, std::uint32_t sets) {
    for (std::uint32_t ly = 0; ly < p_.gy; ++ly) {
      for (std::uint32_t lx = 0; lx < p_.gx; ++lx) {
        const TileCoord t = at(origin, lx, ly);
        for (std::uint32_t i = 0; i < sets; ++i) {
          const BufferSet& s = sets_[i];
          b_.declare(t, s.q, sr_, e_.d_qk);
          b_.declare(t, s.k, sc_, e_.d_qk);
          if (!e_.v_from_k) b_.declare(t, s.v, sc_, e_.d_v);
          b_.declare(t, s.s, sr_, sc_);
          b_.declare(t, s.o, sr_, e_.d_v);
          for (NameId st : {s.m, s.mn, s.l, s.lp}) b_.declare(t, st, sr_, 1);
        }
      }
    }
  }

  void row_reduce(TileCoord origin, NameId buf, CollectiveKind op) {
    if (p_.gx < 2) return;
    for (std::uint32_t ly = 0; ly < p_.gy; ++ly)
      b_.reduce(row_root(origin, ly), CollectiveAxis::kRow, origin.x, p_.gx, buf, op,
                p_.strategy);
  }
  void row_multicast(TileCoord origin, NameId buf) {
    if (p_.gx < 2) return;
    for (std::uint32_t ly = 0; ly < p_.gy; ++ly)
      b_.multicast(row_root(origin, ly), CollectiveAxis::kRow, origin.x, p_.gx, buf,
                   p_.strategy);
  }

  // Highest sequence position among the rows of a row block.
  std::int64_t max_position(std::uint32_t rb) const {
    const std::uint32_t r0 = rb * p_.block_r;
    const std::uint32_t r1 = std::min(e_.rows, r0 + p_.block_r);
    std::uint32_t best = 0;
    if (r1 - r0 >= e_.q_period) {
      best = e_.q_period - 1;
    } else {
      for (std::uint32_t r = r0; r < r1; ++r) best = std::max(best, r % e_.q_period);
    }
    return e_.causal_offset + best;
  }

  void emit_item(TileCoord origin, std::uint32_t inst, std::uint32_t rb, const BufferSet& s) {
    const std::uint32_t dtype = sched_.dtype_bytes();
    const std::uint32_t kv_blocks = ceil_div(e_.kv_len, p_.block_c);
    const std::int64_t last_pos = max_position(rb);

    // Q slices: row fetchers load, then multicast along their row.
    for (std::uint32_t ly = 0; ly < p_.gy; ++ly) {
      const std::uint32_t r0 = rb * p_.block_r + ly * sr_;
      const std::uint32_t rows = clip(e_.rows, r0, sr_);
      b_.hbm_load(row_root(origin, ly), s.q,
                  {tq_, inst * e_.rows + r0, 0, rows, e_.d_qk});
    }
    row_multicast(origin, s.q);

    for (std::uint32_t j = 0; j < kv_blocks; ++j) {
      const std::uint32_t c0 = j * p_.block_c;
      if (e_.causal && j > 0 && static_cast<std::int64_t>(c0) > last_pos) break;
      const bool first = j == 0;
      const bool need_mask = e_.causal || c0 + p_.block_c > e_.kv_len;

      for (std::uint32_t lx = 0; lx < p_.gx; ++lx) {
        const std::uint32_t k0 = c0 + lx * sc_;
        const std::uint32_t cols = clip(e_.kv_len, k0, sc_);
        const TileCoord f = col_root(origin, lx);
        b_.hbm_load(f, s.k, {tk_, inst * e_.kv_len + k0, 0, cols, e_.d_qk});
        if (!e_.v_from_k) b_.hbm_load(f, s.v, {tv_, inst * e_.kv_len + k0, 0, cols, e_.d_v});
      }
      if (p_.gy > 1) {
        for (std::uint32_t lx = 0; lx < p_.gx; ++lx) {
          b_.multicast(col_root(origin, lx), CollectiveAxis::kColumn, origin.y, p_.gy, s.k,
                       p_.strategy);
          if (!e_.v_from_k)
            b_.multicast(col_root(origin, lx), CollectiveAxis::kColumn, origin.y, p_.gy, s.v,
                         p_.strategy);
        }
      }

      const std::uint64_t score = static_cast<std::uint64_t>(sr_) * sc_;
      for (std::uint32_t ly = 0; ly < p_.gy; ++ly) {
        for (std::uint32_t lx = 0; lx < p_.gx; ++lx) {
          const TileCoord t = at(origin, lx, ly);
          std::uint32_t mask = kNoMask;
          if (need_mask) {
            ScoreMask m;
            m.q_row0 = rb * p_.block_r + ly * sr_;
            m.q_period = e_.q_period;
            m.causal_offset = e_.causal_offset;
            m.k_col0 = c0 + lx * sc_;
            m.kv_len = e_.kv_len;
            m.causal = e_.causal;
            mask = sched_.add_mask(m);
          }
          b_.matmul(t, s.q, s.k, s.s, {sr_, sc_, e_.d_qk, dtype}, true, false, mask);
          if (first)
            b_.vector(t, VectorKind::kRowMax, score, VectorOp::kRowMaxFirst, {s.s, s.mn});
          else
            b_.vector(t, VectorKind::kRowMax, score, VectorOp::kRowMaxMerge, {s.s, s.m, s.mn});
        }
      }
      row_reduce(origin, s.mn, CollectiveKind::kReduceMax);
      row_multicast(origin, s.mn);

      for (std::uint32_t ly = 0; ly < p_.gy; ++ly) {
        for (std::uint32_t lx = 0; lx < p_.gx; ++lx) {
          const TileCoord t = at(origin, lx, ly);
          b_.vector(t, VectorKind::kExp, score, VectorOp::kExpShift, {s.s, s.mn});
          b_.vector(t, VectorKind::kRowSum, score, VectorOp::kRowSum, {s.s, s.lp});
        }
      }
      row_reduce(origin, s.lp, CollectiveKind::kReduceSum);
      row_multicast(origin, s.lp);

      const std::uint64_t out = static_cast<std::uint64_t>(sr_) * e_.d_v;
      for (std::uint32_t ly = 0; ly < p_.gy; ++ly) {
        for (std::uint32_t lx = 0; lx < p_.gx; ++lx) {
          const TileCoord t = at(origin, lx, ly);
          if (first)
            b_.vector(t, VectorKind::kAdd, sr_, VectorOp::kRescaleFirst, {s.m, s.mn, s.l, s.lp});
          else
            b_.vector(t, VectorKind::kScaleAccumulate, out, VectorOp::kRescale,
                      {s.m, s.mn, s.l, s.lp, s.o});
          b_.matmul(t, s.s, s.v, s.o, {sr_, e_.d_v, sc_, dtype}, false, !first);
        }
      }
    }

    row_reduce(origin, s.o, CollectiveKind::kReduceSum);
    for (std::uint32_t ly = 0; ly < p_.gy; ++ly) {
      const TileCoord root = row_root(origin, ly);
      const std::uint32_t r0 = rb * p_.block_r + ly * sr_;
      b_.vector(root, VectorKind::kScaleAccumulate, static_cast<std::uint64_t>(sr_) * e_.d_v,
                VectorOp::kNormalize, {s.o, s.l});
      b_.hbm_store(root, s.o, {to_, inst * e_.rows + r0, 0, clip(e_.rows, r0, sr_), e_.d_v});
    }
  }

  EffectiveAttention e_;
  FlatParams p_;
  Schedule sched_;
  ScheduleBuilder b_;
  std::uint32_t sr_ = 0, sc_ = 0;
  std::uint32_t groups_x_ = 1, groups_y_ = 1;
  std::uint32_t tq_ = 0, tk_ = 0, tv_ = 0, to_ = 0;
  std::array<BufferSet, 2> sets_{};
};

}  // namespace

Schedule gen_flatattention(const AttentionWorkload& w, const ArchConfig& arch,
                           const FlatParams& params) {
  return FlatEmitter(w, arch, params).run();
}

Schedule gen_flashattention(const AttentionWorkload& w, const ArchConfig& arch,
                            FlashVariant variant, std::uint32_t M) {
  if (M == 0) throw ContractViolation("gen_flashattention: M must be positive");
  FlatParams p;
  p.block_r = p.block_c = M;
  p.async = variant == FlashVariant::kFa3;
  Schedule s = FlatEmitter(w, arch, p).run();
  s.label = fmt::format("{} M={}", variant == FlashVariant::kFa3 ? "fa3" : "fa2", M);
  return s;
}

}  // namespace flatsim
