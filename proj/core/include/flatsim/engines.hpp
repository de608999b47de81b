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
#include <span>
#include <vector>

#include "flatsim/arch.hpp"

namespace flatsim {

struct GemmJob {
  std::uint32_t m = 1, n = 1, k = 1;
  std::uint32_t dtype_bytes = 2;
};

/// ceil(m/rows) * ceil(n/cols) * k + setup.
Cycles gemm_cycles(const GemmJob& job, const TileSpec& tile);
/// Cycles a perfectly packed CE array would need: 2mnk / peak FLOP/cycle.
double gemm_ideal_cycles(const GemmJob& job, const TileSpec& tile);
double gemm_utilization(const GemmJob& job, const TileSpec& tile);

enum class VectorKind : std::uint8_t {
  kRowMax,
  kRowSum,
  kExp,
  kScaleAccumulate,
  kAdd,
  kRope,
  kRmsNorm,
};

const char* to_string(VectorKind k);

struct VectorJob {
  VectorKind kind = VectorKind::kAdd;
  std::uint64_t elements = 0;
  std::uint32_t dtype_bytes = 2;
};

std::uint32_t vector_flops_per_element(VectorKind k);
/// L1 traffic per element, in units of dtype_bytes (operand reads plus
/// result writes; row reductions amortize their per-row write).
double vector_bytes_factor(VectorKind k);

/// max(compute, L1 traffic), rounded up to whole cycles.
Cycles vector_cycles(const VectorJob& job, const TileSpec& tile);

enum class HbmDirection : std::uint8_t { kRead, kWrite };

struct HbmRequest {
  std::uint32_t channel = 0;
  Bytes size = 0;
  HbmDirection direction = HbmDirection::kRead;
};

/// FIFO per channel; access latency is pipelined, the channel is busy only
/// for the data transfer.
class HbmChannels {
 public:
  explicit HbmChannels(const HbmSpec& spec);

  struct Service {
    Cycles begin;     // channel starts streaming
    Cycles complete;  // last byte delivered
  };
  Service serve(const HbmRequest& req, Cycles arrival);

  Bytes bytes_read() const { return read_; }
  Bytes bytes_written() const { return written_; }
  Cycles service_cycles(Bytes size) const;

 private:
  HbmSpec spec_;
  std::vector<Cycles> free_at_;
  Bytes read_ = 0;
  Bytes written_ = 0;
};

/// Completion cycle of each request, all arriving at cycle 0 in order.
std::vector<Cycles> hbm_service(std::span<const HbmRequest> reqs, const HbmSpec& hbm);

}  // namespace flatsim
