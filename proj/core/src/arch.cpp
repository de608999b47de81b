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

#include "flatsim/arch.hpp"

#include <string>

namespace flatsim {

ValidationResult validate(const ArchConfig& c) {
  ValidationResult r;
  auto need = [&r](bool cond, const char* what) {
    if (!cond) r.violations.emplace_back(what);
  };
  need(c.noc.mesh_x >= 1, "mesh_x >= 1");
  need(c.noc.mesh_y >= 1, "mesh_y >= 1");
  need(c.noc.link_bytes_per_cycle > 0, "link_bytes_per_cycle > 0");
  need(c.noc.hop_latency >= 1, "hop_latency >= 1");
  need(c.tile.matrix_ce_rows >= 1, "matrix_ce_rows >= 1");
  need(c.tile.matrix_ce_cols >= 1, "matrix_ce_cols >= 1");
  need(c.tile.vector_flop_per_cycle >= 1, "vector_flop_per_cycle >= 1");
  need(c.tile.l1_capacity >= 64 * 1024, "l1_capacity >= 64 KiB");
  need(c.tile.l1_bytes_per_cycle >= 1, "l1_bytes_per_cycle >= 1");
  need(c.tile.dma_channels >= 1, "dma_channels >= 1");
  need(c.hbm.num_channels >= 1, "hbm num_channels >= 1");
  need(c.hbm.channel_bytes_per_cycle >= 1, "hbm channel_bytes_per_cycle >= 1");
  need(c.frequency_hz > 0, "frequency_hz > 0");
  need(c.dtype_bytes >= 1, "dtype_bytes >= 1");
  return r;
}

PeakSummary derive_peaks(const ArchConfig& c) {
  PeakSummary p;
  p.tile_flop_per_cycle = c.tile.matrix_flop_per_cycle();
  p.mesh_flop_per_cycle =
      p.tile_flop_per_cycle * c.noc.mesh_x * static_cast<std::uint64_t>(c.noc.mesh_y);
  p.peak_flops = static_cast<double>(p.mesh_flop_per_cycle) * c.frequency_hz;
  p.hbm_bytes_per_cycle =
      static_cast<std::uint64_t>(c.hbm.num_channels) * c.hbm.channel_bytes_per_cycle;
  p.peak_hbm_bytes_per_s = static_cast<double>(p.hbm_bytes_per_cycle) * c.frequency_hz;
  p.link_bytes_per_s = static_cast<double>(c.noc.link_bytes_per_cycle) * c.frequency_hz;
  return p;
}

ArchConfig reference_arch() { return ArchConfig{}; }

ArchConfig reference_arch_fp8() {
  ArchConfig c;
  c.frequency_hz = 1.9e9;
  c.dtype_bytes = 1;
  c.hbm.capacity = 128ull << 30;
  return c;
}

const char* to_string(MeshEdge edge) {
  switch (edge) {
    case MeshEdge::kNorth: return "north";
    case MeshEdge::kSouth: return "south";
    case MeshEdge::kEast: return "east";
    case MeshEdge::kWest: return "west";
  }
  return "?";
}

}  // namespace flatsim
