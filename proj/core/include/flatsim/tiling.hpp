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

#include "flatsim/arch.hpp"
#include "flatsim/dataflows.hpp"
#include "flatsim/numerics.hpp"

namespace flatsim {

class TilingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct TilingChoice {
  std::uint32_t slice_r = 0, slice_c = 0;
  std::uint32_t gx = 1, gy = 1;
  double predicted_util = 0;
  Bytes l1_footprint = 0;
};

/// Per-tile L1 bytes of the flat dataflow: Q, K, V, O and score slices plus
/// four per-row statistics, doubled for the async second buffer set.
Bytes l1_footprint(const AttentionWorkload& w, std::uint32_t slice_r, std::uint32_t slice_c,
                   bool async);

/// Combined utilization of the score and value GEMMs of one slice.
double slice_utilization(const EffectiveAttention& e, std::uint32_t slice_r,
                         std::uint32_t slice_c, const TileSpec& tile);

/// Largest power-of-two slice in [16, 512] that keeps at least 95% matrix
/// utilization (relative to the achievable row occupancy when fewer query
/// rows than CE rows exist) and fits L1, then the largest group that still
/// gives every tile a full slice.
TilingChoice select_tiling(const AttentionWorkload& w, const ArchConfig& arch, bool async);

/// A fixed group shape; the slice shrinks when the sequence is too short to
/// give every tile the selected slice.
TilingChoice tiling_for_group(const AttentionWorkload& w, const ArchConfig& arch, bool async,
                              std::uint32_t gx, std::uint32_t gy);

}  // namespace flatsim
