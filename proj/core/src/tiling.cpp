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

#include "flatsim/tiling.hpp"

#include <algorithm>

#include <fmt/format.h>

#include "flatsim/engines.hpp"

namespace flatsim {

namespace {

constexpr double kMinUtil = 0.95;

std::uint32_t ceil_div(std::uint32_t a, std::uint32_t b) { return (a + b - 1) / b; }

std::uint32_t pow2_at_least(std::uint32_t v) {
  std::uint32_t p = 1;
  while (p < v) p <<= 1;
  return p;
}

}  // namespace

Bytes l1_footprint(const AttentionWorkload& w, std::uint32_t slice_r, std::uint32_t slice_c,
                   bool async) {
  if (slice_r == 0 || slice_c == 0) return 0;
  const EffectiveAttention e = effective_attention(w);
  const Bytes r = slice_r, c = slice_c;
  Bytes elems = r * e.d_qk + c * e.d_qk + r * e.d_v + r * c + 4 * r;
  if (!e.v_from_k) elems += c * e.d_v;
  return (async ? 2 : 1) * elems * e.dtype_bytes;
}

double slice_utilization(const EffectiveAttention& e, std::uint32_t slice_r,
                         std::uint32_t slice_c, const TileSpec& tile) {
  const GemmJob qk{slice_r, slice_c, e.d_qk, e.dtype_bytes};
  const GemmJob pv{slice_r, e.d_v, slice_c, e.dtype_bytes};
  return (gemm_ideal_cycles(qk, tile) + gemm_ideal_cycles(pv, tile)) /
         static_cast<double>(gemm_cycles(qk, tile) + gemm_cycles(pv, tile));
}

TilingChoice select_tiling(const AttentionWorkload& w, const ArchConfig& arch, bool async) {
  const EffectiveAttention e = effective_attention(w);
  TilingChoice best;
  bool found = false;
  for (std::uint32_t s = 16; s <= 512; s <<= 1) {
    const std::uint32_t r = std::min(s, e.rows);
    const double occupancy =
        std::min(1.0, static_cast<double>(r) / arch.tile.matrix_ce_rows);
    const double util = slice_utilization(e, r, s, arch.tile);
    const Bytes fp = l1_footprint(w, r, s, async);
    if (util / occupancy < kMinUtil || fp > arch.tile.l1_capacity) continue;
    if (found && util < best.predicted_util) continue;
    best.slice_r = r;
    best.slice_c = s;
    best.predicted_util = util;
    best.l1_footprint = fp;
    found = true;
  }
  if (!found) {
    throw TilingError(fmt::format(
        "no slice reaches {:.0f}% matrix utilization within {} B of L1; use a smaller dtype "
        "or a larger L1",
        kMinUtil * 100, arch.tile.l1_capacity));
  }
  best.gy = std::min(arch.noc.mesh_y, ceil_div(e.rows, best.slice_r));
  best.gx = std::min(arch.noc.mesh_x, ceil_div(e.kv_len, best.slice_c));
  return best;
}

TilingChoice tiling_for_group(const AttentionWorkload& w, const ArchConfig& arch, bool async,
                              std::uint32_t gx, std::uint32_t gy) {
  if (gx < 1 || gy < 1 || gx > arch.noc.mesh_x || gy > arch.noc.mesh_y)
    throw TilingError(fmt::format("group {}x{} does not fit the {}x{} mesh", gx, gy,
                                  arch.noc.mesh_x, arch.noc.mesh_y));
  const EffectiveAttention e = effective_attention(w);
  TilingChoice t = select_tiling(w, arch, async);
  t.gx = gx;
  t.gy = gy;
  t.slice_r = std::max(1u, std::min(t.slice_r, pow2_at_least(ceil_div(e.rows, gy))));
  t.slice_c = std::max(1u, std::min(t.slice_c, pow2_at_least(ceil_div(e.kv_len, gx))));
  t.predicted_util = slice_utilization(e, t.slice_r, t.slice_c, arch.tile);
  t.l1_footprint = l1_footprint(w, t.slice_r, t.slice_c, async);
  return t;
}

}  // namespace flatsim
