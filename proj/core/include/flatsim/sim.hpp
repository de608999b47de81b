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
#include <stdexcept>
#include <string>
#include <vector>

#include "flatsim/arch.hpp"
#include "flatsim/numerics.hpp"
#include "flatsim/schedule.hpp"

namespace flatsim {

enum class SimMode { kTiming, kFunctional };

/// Raised for runtime failures of a simulation (L1 overflow, deadlock).
class SimError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Category : std::uint8_t {
  kMatrix = 0,
  kVector = 1,
  kComm = 2,
  kHbm = 3,
  kSync = 4,
};
inline constexpr std::size_t kNumCategories = 5;
const char* to_string(Category c);

struct SimReport {
  Cycles total_cycles = 0;
  /// Exposed time per category averaged over tiles; sums to total_cycles.
  /// Each cycle of a tile is charged to the highest-priority busy category
  /// (matrix > vector > comm > hbm); idle cycles are charged to sync.
  std::array<double, kNumCategories> exposed{};

  std::vector<Cycles> matrix_busy;  // per tile
  std::vector<Cycles> vector_busy;
  std::vector<Cycles> dma_busy;

  Bytes hbm_bytes_read = 0;
  Bytes hbm_bytes_written = 0;
  double flops = 0;
  double matrix_ideal_cycles = 0;
  Cycles matrix_busy_cycles = 0;
  /// Ideal GEMM cycles over (tiles x total_cycles).
  double matrix_utilization = 0;
  /// Ideal GEMM cycles over matrix-engine busy cycles.
  double matrix_active_utilization = 0;
  /// Ideal GEMM cycles over each tile's span from its first GEMM start to
  /// its last GEMM end, summed over tiles that ran a GEMM.
  double matrix_window_utilization = 0;
  double avg_hbm_bw_utilization = 0;
  Cycles max_link_busy = 0;
  double mean_link_utilization = 0;
  std::size_t steps = 0;

  double exposed_of(Category c) const { return exposed[static_cast<std::size_t>(c)]; }
  bool operator==(const SimReport&) const = default;
};

/// HBM contents for functional mode, indexed by the schedule's tensor ids.
struct FunctionalMemory {
  std::vector<Matrix> tensors;
};

/// Executes the schedule over the timing models. In functional mode the
/// step payloads are also evaluated on `memory`; the returned report is
/// identical to timing mode.
SimReport simulate(const Schedule& schedule, const ArchConfig& arch, SimMode mode,
                   FunctionalMemory* memory = nullptr);

/// Static checks: acyclic deps, buffer written before read, L1 footprint,
/// tiles and groups inside the mesh, collectives supported by the NoC.
ValidationResult check_schedule(const Schedule& schedule, const ArchConfig& arch);

}  // namespace flatsim
