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

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace flatsim {

using Cycles = std::uint64_t;
using Bytes = std::uint64_t;

/// Thrown when a caller breaks a documented precondition (shape mismatch,
/// out-of-range group, empty input where one is required).
class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Violations are data: an empty list means the object is valid.
struct ValidationResult {
  std::vector<std::string> violations;

  bool ok() const { return violations.empty(); }
  explicit operator bool() const { return ok(); }
};

/// Per-tile compute and memory resources.
struct TileSpec {
  std::uint32_t matrix_ce_rows = 32;
  std::uint32_t matrix_ce_cols = 16;
  Cycles matrix_setup_cycles = 85;
  std::uint32_t vector_flop_per_cycle = 128;  // 4 engines x 32 FLOP/cyc
  Bytes l1_capacity = 384 * 1024;
  std::uint32_t l1_bytes_per_cycle = 512;
  std::uint32_t dma_channels = 2;
  Cycles dma_setup_cycles = 16;

  // One FMA per CE per cycle, counted as two FLOPs.
  std::uint64_t matrix_flop_per_cycle() const {
    return 2ull * matrix_ce_rows * matrix_ce_cols;
  }
};

struct NocSpec {
  std::uint32_t mesh_x = 32;
  std::uint32_t mesh_y = 32;
  std::uint32_t link_bytes_per_cycle = 128;  // 1024-bit links
  Cycles hop_latency = 1;
  bool hw_collectives_enabled = true;
  Cycles sync_barrier_cost = 64;

  std::uint32_t tiles() const { return mesh_x * mesh_y; }
};

enum class MeshEdge { kNorth, kSouth, kEast, kWest };

struct HbmSpec {
  std::uint32_t num_channels = 32;
  std::uint32_t channel_bytes_per_cycle = 64;
  Cycles access_latency = 200;
  MeshEdge edge = MeshEdge::kSouth;
  Bytes capacity = 64ull << 30;
};

struct ArchConfig {
  TileSpec tile;
  NocSpec noc;
  HbmSpec hbm;
  double frequency_hz = 965e6;
  std::uint32_t dtype_bytes = 2;
};

struct PeakSummary {
  double peak_flops = 0;           // FLOP/s over the whole mesh
  double peak_hbm_bytes_per_s = 0;
  std::uint64_t tile_flop_per_cycle = 0;
  double link_bytes_per_s = 0;
  std::uint64_t mesh_flop_per_cycle = 0;
  std::uint64_t hbm_bytes_per_cycle = 0;
};

ValidationResult validate(const ArchConfig& config);
PeakSummary derive_peaks(const ArchConfig& config);

/// 32x32 tiles, 32x16 CEs, 965 MHz, one 32-channel HBM stack on the south
/// edge, FP16.
ArchConfig reference_arch();

/// Reference tile array clocked at 1.9 GHz with FP8 operands.
ArchConfig reference_arch_fp8();

const char* to_string(MeshEdge edge);

}  // namespace flatsim
