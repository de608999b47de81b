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

#include <fmt/format.h>

#include "flatsim/dataflows.hpp"

namespace flatsim {

namespace {

std::uint32_t ceil_div(std::uint32_t a, std::uint32_t b) { return (a + b - 1) / b; }

std::uint32_t clip(std::uint32_t total, std::uint32_t begin, std::uint32_t len) {
  return begin >= total ? 0 : std::min(len, total - begin);
}

std::uint32_t auto_block(std::uint32_t dim, std::uint32_t tiles, std::uint32_t ce) {
  const std::uint32_t per_tile = ceil_div(dim, tiles);
  return std::clamp(ceil_div(per_tile, ce) * ce, 32u, 256u);
}

}  // namespace

Schedule gen_summa(std::uint32_t m, std::uint32_t n, std::uint32_t k, const ArchConfig& arch,
                   const SummaBlock& block) {
  if (m == 0 || n == 0 || k == 0) throw ContractViolation("gen_summa: zero dimension");
  const std::uint32_t ex = block.extent_x ? block.extent_x : arch.noc.mesh_x;
  const std::uint32_t ey = block.extent_y ? block.extent_y : arch.noc.mesh_y;
  const TileCoord o = block.origin;
  if (o.x + ex > arch.noc.mesh_x || o.y + ey > arch.noc.mesh_y)
    throw ContractViolation("gen_summa: region exceeds mesh");
  const std::uint32_t bm = block.bm ? block.bm : auto_block(m, ey, arch.tile.matrix_ce_rows);
  const std::uint32_t bn = block.bn ? block.bn : auto_block(n, ex, arch.tile.matrix_ce_cols);
  const std::uint32_t bk = block.bk;
  if (bk == 0) throw ContractViolation("gen_summa: bk must be positive");

  Schedule sched(arch.noc.mesh_x, arch.noc.mesh_y, arch.dtype_bytes);
  ScheduleBuilder b(sched);
  sched.group_x = ex;
  sched.group_y = ey;
  sched.label = fmt::format("summa {}x{}x{} on {}x{}", m, n, k, ex, ey);
  const std::string& pre = block.prefix;
  const std::uint32_t ta = sched.add_tensor(pre + "A", m, k);
  const std::uint32_t tb = sched.add_tensor(pre + "B", k, n);
  const std::uint32_t tc = sched.add_tensor(pre + "C", m, n);
  const NameId a[2] = {b.name(pre + "A0"), b.name(pre + "A1")};
  const NameId bb[2] = {b.name(pre + "B0"), b.name(pre + "B1")};
  const NameId c = b.name(pre + "C");

  const std::uint32_t k_steps = ceil_div(k, bk);
  const std::uint32_t sets = k_steps > 1 ? 2 : 1;
  for (std::uint32_t y = 0; y < ey; ++y) {
    for (std::uint32_t x = 0; x < ex; ++x) {
      const TileCoord t{o.x + x, o.y + y};
      for (std::uint32_t i = 0; i < sets; ++i) {
        b.declare(t, a[i], bm, bk);
        b.declare(t, bb[i], bk, bn);
      }
      b.declare(t, c, bm, bn);
    }
  }

  const std::uint32_t rounds_i = ceil_div(m, ey * bm);
  const std::uint32_t rounds_j = ceil_div(n, ex * bn);
  const std::uint32_t dtype = arch.dtype_bytes;
  for (std::uint32_t ri = 0; ri < rounds_i; ++ri) {
    for (std::uint32_t rj = 0; rj < rounds_j; ++rj) {
      auto rows_of = [&](std::uint32_t y) { return clip(m, (ri * ey + y) * bm, bm); };
      auto cols_of = [&](std::uint32_t x) { return clip(n, (rj * ex + x) * bn, bn); };
      for (std::uint32_t kk = 0; kk < k_steps; ++kk) {
        const std::uint32_t k0 = kk * bk;
        const std::uint32_t kw = clip(k, k0, bk);
        const std::uint32_t set = kk % sets;
        for (std::uint32_t y = 0; y < ey; ++y) {
          const std::uint32_t rows = rows_of(y);
          if (rows == 0) continue;
          const TileCoord f{o.x + y % ex, o.y + y};
          b.hbm_load(f, a[set], {ta, (ri * ey + y) * bm, k0, rows, kw});
          if (ex > 1)
            b.multicast(f, CollectiveAxis::kRow, o.x, ex, a[set], CollectiveStrategy::kHw);
        }
        for (std::uint32_t x = 0; x < ex; ++x) {
          const std::uint32_t cols = cols_of(x);
          if (cols == 0) continue;
          const TileCoord f{o.x + x, o.y + x % ey};
          b.hbm_load(f, bb[set], {tb, k0, (rj * ex + x) * bn, kw, cols});
          if (ey > 1)
            b.multicast(f, CollectiveAxis::kColumn, o.y, ey, bb[set], CollectiveStrategy::kHw);
        }
        for (std::uint32_t y = 0; y < ey; ++y) {
          for (std::uint32_t x = 0; x < ex; ++x) {
            const std::uint32_t rows = rows_of(y), cols = cols_of(x);
            if (rows == 0 || cols == 0) continue;
            b.matmul({o.x + x, o.y + y}, a[set], bb[set], c, {rows, cols, kw, dtype}, false,
                     kk > 0);
          }
        }
      }
      for (std::uint32_t y = 0; y < ey; ++y) {
        for (std::uint32_t x = 0; x < ex; ++x) {
          const std::uint32_t rows = rows_of(y), cols = cols_of(x);
          if (rows == 0 || cols == 0) continue;
          b.hbm_store({o.x + x, o.y + y}, c,
                      {tc, (ri * ey + y) * bm, (rj * ex + x) * bn, rows, cols});
        }
      }
    }
  }
  return sched;
}

}  // namespace flatsim
